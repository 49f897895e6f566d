#include "ddlqr/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddlqr/experiments.hpp"
#include "ddlqr/io.hpp"
#include "ddlqr/trajectory_generation.hpp"

namespace ddlqr {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool verbose = false;
};

ExperimentConfig resolved_config(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  return cfg;
}

LtiPlant require_plant(const ExperimentConfig& cfg) {
  if (!cfg.plant.has_value())
    throw ValidationError("this subcommand needs an explicit plant in the config");
  return *cfg.plant;
}

Vector require_x0(const ExperimentConfig& cfg, const LtiPlant& plant, Rng& rng) {
  if (cfg.x0.has_value()) {
    if (cfg.x0->size() != plant.n()) throw ValidationError("config: x0 dimension");
    return *cfg.x0;
  }
  return rng.uniform_vector(static_cast<int>(plant.n()), -1.0, 1.0);
}

Eigen::Index resolved_T(const ExperimentConfig& cfg, const LtiPlant& plant) {
  return cfg.sampling.T > 0
             ? cfg.sampling.T
             : static_cast<Eigen::Index>(2 * (plant.m() + 2) * plant.n());
}

struct Pipeline {
  FilterBank bank;
  RawDataset data;
  ProjectedData proj;
};

Pipeline run_pipeline(const ExperimentConfig& cfg, const LtiPlant& plant,
                      const Vector& x0, Rng& rng, double record_tail) {
  Pipeline pipe{
      build_filter_bank(cfg.observer_eigenvalues, static_cast<int>(plant.m()),
                        static_cast<int>(plant.p()), cfg.eta0_eps, &rng),
      {},
      {}};
  pipe.data = collect_data(plant, pipe.bank, cfg.input, x0, cfg.sampling.t0,
                           cfg.sampling.dt, resolved_T(cfg, plant),
                           cfg.sampling.dt_integration, record_tail);
  pipe.proj = project(pipe.data, pipe.bank, cfg.projection_rel_tol);
  return pipe;
}

int cmd_simulate(const CommonArgs& args) {
  ExperimentConfig cfg = resolved_config(args);
  LtiPlant plant = require_plant(cfg);
  Rng rng(cfg.seed);
  Vector x0 = require_x0(cfg, plant, rng);
  double t_end = cfg.sampling.t0 +
                 cfg.sampling.dt * static_cast<double>(resolved_T(cfg, plant) - 1) +
                 cfg.sampling.record_tail;
  Trajectory traj = simulate(plant, cfg.input, x0, t_end, cfg.sampling.dt_integration);
  fs::create_directories(cfg.output_dir);
  save_trajectory_csv((fs::path(cfg.output_dir) / "trajectory.csv").string(), traj);
  if (args.verbose)
    std::cout << "simulate: " << traj.samples() << " samples -> "
              << cfg.output_dir << "/trajectory.csv\n";
  return 0;
}

int cmd_collect(const CommonArgs& args) {
  ExperimentConfig cfg = resolved_config(args);
  LtiPlant plant = require_plant(cfg);
  Rng rng(cfg.seed);
  Vector x0 = require_x0(cfg, plant, rng);
  FilterBank bank =
      build_filter_bank(cfg.observer_eigenvalues, static_cast<int>(plant.m()),
                        static_cast<int>(plant.p()), cfg.eta0_eps, &rng);
  RawDataset data = collect_data(plant, bank, cfg.input, x0, cfg.sampling.t0,
                                 cfg.sampling.dt, resolved_T(cfg, plant),
                                 cfg.sampling.dt_integration, cfg.sampling.record_tail);
  fs::create_directories(cfg.output_dir);
  save_dataset_json((fs::path(cfg.output_dir) / "dataset.json").string(), data, bank,
                    cfg.input);
  save_matrix_csv((fs::path(cfg.output_dir) / "E0.csv").string(), data.E0);
  if (args.verbose)
    std::cout << "collect: T=" << data.T << " -> " << cfg.output_dir
              << "/dataset.json\n";
  return 0;
}

int cmd_project(const CommonArgs& args) {
  ExperimentConfig cfg = resolved_config(args);
  if (args.data_path.empty())
    throw ValidationError("project: --data <dataset.json> is required");
  DatasetFile file = load_dataset_json(args.data_path);
  FilterBank bank = bank_from_dataset(file);
  ProjectedData proj = project(file.data, bank, cfg.projection_rel_tol);
  fs::create_directories(cfg.output_dir);
  save_projected_json((fs::path(cfg.output_dir) / "projected.json").string(), proj);
  save_matrix_csv((fs::path(cfg.output_dir) / "Phi0.csv").string(), proj.Phi0);

  json rank_report = {
      {"schema", 1},
      {"kind", "rank_report"},
      {"rows", file.data.E0.rows()},
      {"rank", proj.rank_r},
      {"order_estimate", proj.order_estimate},
      {"min_singular_Phi0", proj.min_singular_Phi0},
      {"tolerance_used", proj.tolerance_used},
  };
  std::ofstream out(fs::path(cfg.output_dir) / "rank_report.json");
  out << std::setprecision(17) << rank_report.dump(2) << "\n";
  if (args.verbose)
    std::cout << "project: rank " << proj.rank_r << ", order estimate "
              << proj.order_estimate << "\n";
  return 0;
}

int cmd_solver(const CommonArgs& args, bool vi) {
  ExperimentConfig cfg = resolved_config(args);
  if (args.data_path.empty())
    throw ValidationError("pi/vi: --data <dataset.json> is required");
  DatasetFile file = load_dataset_json(args.data_path);
  FilterBank bank = bank_from_dataset(file);
  ProjectedData proj = project(file.data, bank, cfg.projection_rel_tol);
  CostSpec cost(cfg.Q, cfg.R);

  SolveReport report;
  if (vi) {
    ViConfig vc;
    vc.epsilon = cfg.vi.epsilon;
    vc.max_iterations = cfg.vi.max_iterations;
    vc.step_numerator = cfg.vi.step_numerator;
    vc.step_offset = cfg.vi.step_offset;
    vc.set_growth = cfg.vi.set_growth;
    vc.Sigma0 = cfg.vi.sigma0_scale * Matrix::Identity(proj.rank_r, proj.rank_r);
    report = value_iteration(proj, file.data.U0, file.data.Y0, cost, vc);
  } else {
    PiConfig pc;
    pc.epsilon = cfg.pi.epsilon;
    pc.max_iterations = cfg.pi.max_iterations;
    report = policy_iteration(proj, file.data.U0, file.data.Y0, cost, pc);
  }

  fs::create_directories(cfg.output_dir);
  const std::string stem = vi ? "vi" : "pi";
  save_solve_report_json((fs::path(cfg.output_dir) / (stem + "_report.json")).string(),
                         report);
  save_trace_csv((fs::path(cfg.output_dir) / (stem + "_trace.csv")).string(), report);
  if (args.verbose)
    std::cout << stem << ": " << to_string(report.termination) << " after "
              << report.iterations_run << " iterations\n";
  if (report.termination != Termination::Converged)
    throw NumericalError(stem + " did not converge: " + to_string(report.termination));
  return 0;
}

int cmd_oracle(const CommonArgs& args) {
  ExperimentConfig cfg = resolved_config(args);
  LtiPlant plant = require_plant(cfg);
  CostSpec cost(cfg.Q, cfg.R);
  Rng rng(cfg.seed);
  Vector x0 = require_x0(cfg, plant, rng);
  Pipeline pipe = run_pipeline(cfg, plant, x0, rng, 0.0);

  Matrix L = place_observer(plant, cfg.observer_eigenvalues, &rng);
  StateParameterization param = build_state_parameterization(plant, pipe.bank, L, x0);
  IdentityResiduals identities =
      verify_parameterization_identities(param, pipe.bank, pipe.proj.F1, plant);
  RegularityReport regularity =
      verify_regularity(pipe.bank, param, pipe.proj.F1, plant, cost);
  AreSolution are = solve_lqr(plant, cost);
  TransformedOptimum opt =
      transformed_optimum(param, pipe.bank, pipe.proj.F1, plant, cost);
  double recon = state_reconstruction_residual(param, pipe.data.fine);
  Matrix K_pull = are.K_star * param.S * pipe.proj.F1.transpose();

  json doc = {
      {"schema", 1},
      {"kind", "oracle_report"},
      {"plant_spectrum_real_parts", eig_real_parts(plant.A)},
      {"are", {{"iterations", are.iterations}, {"residual", are.residual}}},
      {"optimal_cost_x0", x0.dot(are.P_star * x0)},
      {"identity_residuals",
       {{"input_map", identities.input_map},
        {"dynamics_map", identities.dynamics_map},
        {"unprojected_input", identities.unprojected_input},
        {"unprojected_dynamics", identities.unprojected_dynamics}}},
      {"regularity",
       {{"stabilizable", regularity.stabilizable},
        {"detectable", regularity.detectable}}},
      {"state_reconstruction_residual", recon},
      {"gain_pullback_mismatch", spectral_norm(opt.K_star_phi - K_pull)},
      {"rank", pipe.proj.rank_r},
      {"order_estimate", pipe.proj.order_estimate},
  };
  fs::create_directories(cfg.output_dir);
  std::ofstream out(fs::path(cfg.output_dir) / "oracle_report.json");
  out << std::setprecision(17) << doc.dump(2) << "\n";
  save_plant_spec_json((fs::path(cfg.output_dir) / "plant_spec.json").string(), plant,
                       cost, cfg.input);
  if (args.verbose)
    std::cout << "oracle: reconstruction residual " << recon << "\n";
  return 0;
}

int cmd_trajgen(const CommonArgs& args) {
  ExperimentConfig cfg = resolved_config(args);
  LtiPlant plant = require_plant(cfg);
  Rng rng(cfg.seed);
  Vector x0 = require_x0(cfg, plant, rng);
  double tail = cfg.trajgen.t_end + 2.0 * cfg.sampling.dt_integration;
  Pipeline pipe = run_pipeline(cfg, plant, x0, rng, std::max(cfg.sampling.record_tail, tail));

  TrajGenData tg = make_trajgen_data(pipe.data, pipe.proj, cfg.input,
                                     cfg.trajgen.anchor_time);
  const int n = pipe.data.n;
  if (args.verbose && tg.pe_order_verified < 2 * n + 1)
    std::cerr << "trajgen: input verified PE only up to order " << tg.pe_order_verified
              << " (< " << 2 * n + 1 << "); relying on runtime rank checks\n";

  GeneratedTrajectory gen;
  if (cfg.trajgen.mode == "a") {
    Vector alpha0 = initial_alpha_from_filter_state(
        tg, tg.fine.eta.col(tg.anchor_index));
    const Eigen::Index kernel_dim = tg.T - tg.rank_r;
    double amp = cfg.trajgen.coeff_amplitude;
    double freq = cfg.trajgen.coeff_frequency;
    auto coeffs = [kernel_dim, amp, freq](double t) -> Vector {
      return amp * std::sin(freq * t) * Vector::Ones(kernel_dim);
    };
    gen = generate_trajectory_a(tg, alpha0, coeffs, cfg.trajgen.t_end);
  } else if (cfg.trajgen.mode == "b") {
    if (!cfg.trajgen.fresh_input.has_value())
      throw ValidationError("trajgen: mode b needs trajgen.fresh_input");
    Vector u0 = cfg.trajgen.fresh_input->value(cfg.trajgen.anchor_time);
    Vector phi0 = tg.F1 * tg.fine.eta.col(tg.anchor_index);
    Vector alpha0 = initial_alpha_consistent(tg, phi0, u0);
    gen = generate_output_b(tg, *cfg.trajgen.fresh_input, alpha0, cfg.trajgen.t_end);
  } else {
    throw ValidationError("trajgen: mode must be 'a' or 'b'");
  }

  fs::create_directories(cfg.output_dir);
  save_generated_csv((fs::path(cfg.output_dir) / "generated.csv").string(), gen);

  // Oracle cross-check of the synthesized pair.
  Matrix L = place_observer(plant, cfg.observer_eigenvalues, &rng);
  StateParameterization param = build_state_parameterization(plant, pipe.bank, L, x0);
  double residual = cfg.trajgen.mode == "a"
                        ? verify_generated_against_plant(tg, gen, plant, param.S)
                        : verify_generated_against_plant(tg, gen, *cfg.trajgen.fresh_input,
                                                         plant, param.S);
  json doc = {{"schema", 1},
              {"kind", "trajgen_report"},
              {"mode", cfg.trajgen.mode},
              {"pe_order_verified", tg.pe_order_verified},
              {"oracle_output_residual", residual}};
  std::ofstream out(fs::path(cfg.output_dir) / "trajgen_report.json");
  out << std::setprecision(17) << doc.dump(2) << "\n";
  if (args.verbose) std::cout << "trajgen: oracle residual " << residual << "\n";
  return 0;
}

int cmd_study(const CommonArgs& args) {
  ExperimentConfig cfg = resolved_config(args);
  StudyReport report = run_study(cfg);
  save_study(report, cfg.output_dir);
  if (args.verbose)
    std::cout << "study: " << report.aggregates.instances << " instances, "
              << report.aggregates.failures << " failures -> " << cfg.output_dir
              << "/report.json\n";
  return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Data-driven continuous-time LQR from input-output data"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand name

  CommonArgs common;
  app.add_option("--config", common.config_path, "Experiment config (JSON)");
  app.add_option("--data", common.data_path, "Dataset file produced by `collect`");
  app.add_option("--out", common.out_dir, "Output directory (overrides config)");
  auto* seed_opt = app.add_option("--seed", common.seed, "Seed override");
  app.add_flag("--verbose", common.verbose, "Chatty progress output");

  auto* sim = app.add_subcommand("simulate", "Integrate the plant and export a trajectory CSV");
  auto* collect = app.add_subcommand("collect", "Co-simulate plant and filter bank; write dataset JSON");
  auto* projectc = app.add_subcommand("project", "Rank-revealing projection of a dataset");
  auto* pi = app.add_subcommand("pi", "Model-free policy iteration on a dataset");
  auto* vi = app.add_subcommand("vi", "Model-free value iteration on a dataset");
  auto* oracle = app.add_subcommand("oracle", "Model-based verification report");
  auto* trajgen = app.add_subcommand("trajgen", "Model-free trajectory generation");
  auto* study = app.add_subcommand("study", "Run the configured experiment study");

  try {
    // CLI11 consumes vector arguments back to front.
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 1;
  }
  common.seed_set = seed_opt->count() > 0;

  try {
    if (common.config_path.empty())
      throw ValidationError("--config <file> is required");
    if (sim->parsed()) return cmd_simulate(common);
    if (collect->parsed()) return cmd_collect(common);
    if (projectc->parsed()) return cmd_project(common);
    if (pi->parsed()) return cmd_solver(common, false);
    if (vi->parsed()) return cmd_solver(common, true);
    if (oracle->parsed()) return cmd_oracle(common);
    if (trajgen->parsed()) return cmd_trajgen(common);
    if (study->parsed()) return cmd_study(common);
    throw ValidationError("no subcommand given");
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ddlqr
