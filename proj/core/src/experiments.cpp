#include "ddlqr/experiments.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <thread>

#include <json.hpp>

namespace ddlqr {

namespace {

using nlohmann::json;

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw ValidationError(std::string("config: expected a matrix for ") + what);
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError(std::string("config: ragged matrix for ") + what);
    for (Eigen::Index c = 0; c < cols; ++c)
      M(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return M;
}

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array())
    throw ValidationError(std::string("config: expected an array for ") + what);
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

SinusoidInput input_from_json(const json& j) {
  SinusoidInput input;
  if (!j.contains("channels"))
    throw ValidationError("config: input needs a channels array");
  for (const json& jc : j.at("channels")) {
    SinusoidChannel ch;
    ch.offset = jc.value("offset", 0.0);
    if (jc.contains("terms"))
      for (const json& jt : jc.at("terms"))
        ch.terms.push_back({jt.at("amplitude").get<double>(),
                            jt.at("omega").get<double>(),
                            jt.value("phase", 0.0)});
    input.channels.push_back(std::move(ch));
  }
  if (input.channels.empty())
    throw ValidationError("config: input needs at least one channel");
  return input;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed JSON config " + path + ": " + e.what());
  }

  ExperimentConfig cfg;
  cfg.schema = doc.value("schema", 0);
  if (cfg.schema != 1)
    throw ValidationError("config: unsupported schema (expected 1)");
  cfg.seed = doc.value("seed", std::uint64_t{0});

  if (doc.contains("plant")) {
    const json& jp = doc.at("plant");
    cfg.plant.emplace(matrix_from_json(jp.at("A"), "A"),
                      matrix_from_json(jp.at("B"), "B"),
                      matrix_from_json(jp.at("C"), "C"));
  }
  if (doc.contains("ensemble")) {
    const json& je = doc.at("ensemble");
    EnsembleSpec spec;
    spec.count = je.at("count").get<int>();
    spec.n = je.value("n", 2);
    spec.m = je.value("m", 1);
    spec.p = je.value("p", 1);
    if (je.contains("eig_interval")) {
      spec.eig_lo = je.at("eig_interval").at(0).get<double>();
      spec.eig_hi = je.at("eig_interval").at(1).get<double>();
    }
    cfg.ensemble = spec;
  }
  if (cfg.plant.has_value() == cfg.ensemble.has_value())
    throw ValidationError("config: exactly one of plant / ensemble is required");

  if (!doc.contains("observer_eigenvalues"))
    throw ValidationError("config: observer_eigenvalues is required");
  for (const json& je : doc.at("observer_eigenvalues")) {
    if (je.is_number())
      cfg.observer_eigenvalues.emplace_back(je.get<double>(), 0.0);
    else
      cfg.observer_eigenvalues.emplace_back(je.at("re").get<double>(),
                                            je.value("im", 0.0));
  }

  if (!doc.contains("cost")) throw ValidationError("config: cost is required");
  cfg.Q = matrix_from_json(doc.at("cost").at("Q"), "Q");
  cfg.R = matrix_from_json(doc.at("cost").at("R"), "R");

  if (!doc.contains("input")) throw ValidationError("config: input is required");
  cfg.input = input_from_json(doc.at("input"));

  if (doc.contains("sampling")) {
    const json& js = doc.at("sampling");
    cfg.sampling.t0 = js.value("t0", 0.0);
    cfg.sampling.dt = js.value("dt", 0.2);
    cfg.sampling.T = js.value("T", Eigen::Index{0});
    cfg.sampling.dt_integration = js.value("dt_integration", 1e-3);
    cfg.sampling.record_tail = js.value("record_tail", 0.0);
  }

  if (doc.contains("x0")) cfg.x0 = vector_from_json(doc.at("x0"), "x0");
  if (doc.contains("eta0_eps"))
    cfg.eta0_eps = vector_from_json(doc.at("eta0_eps"), "eta0_eps");

  cfg.run_pi = doc.contains("pi");
  if (cfg.run_pi) {
    cfg.pi.epsilon = doc.at("pi").value("epsilon", 0.01);
    cfg.pi.max_iterations = doc.at("pi").value("max_iterations", 100);
  }
  cfg.run_vi = doc.contains("vi");
  if (cfg.run_vi) {
    const json& jv = doc.at("vi");
    cfg.vi.epsilon = jv.value("epsilon", 0.01);
    cfg.vi.max_iterations = jv.value("max_iterations", 3000);
    cfg.vi.step_numerator = jv.value("step_numerator", 10.0);
    cfg.vi.step_offset = jv.value("step_offset", 1000.0);
    cfg.vi.set_growth = jv.value("set_growth", 1e5);
    cfg.vi.sigma0_scale = jv.value("sigma0_scale", 1.0);
  }
  if (!cfg.run_pi && !cfg.run_vi)
    throw ValidationError("config: at least one of pi / vi is required");

  if (doc.contains("trajgen")) {
    const json& jt = doc.at("trajgen");
    cfg.trajgen.mode = jt.value("mode", "a");
    cfg.trajgen.anchor_time = jt.value("anchor_time", 0.0);
    cfg.trajgen.t_end = jt.value("t_end", 2.0);
    cfg.trajgen.coeff_amplitude = jt.value("coeff_amplitude", 0.05);
    cfg.trajgen.coeff_frequency = jt.value("coeff_frequency", 1.0);
    if (jt.contains("fresh_input"))
      cfg.trajgen.fresh_input = input_from_json(jt.at("fresh_input"));
  }

  cfg.evaluate_horizon = doc.value("evaluate_horizon", 0.0);
  cfg.output_dir = doc.value("output_dir", std::string("out"));
  cfg.workers = doc.value("workers", 0);
  cfg.projection_rel_tol = doc.value("projection_rel_tol", 1e-9);
  return cfg;
}

LtiPlant random_assumption1_plant(Rng& rng, const EnsembleSpec& spec, const CostSpec& cost) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    Vector eigenvalues = rng.uniform_vector(spec.n, spec.eig_lo, spec.eig_hi);
    // Random orthogonal basis from the QR factor of a Gaussian matrix.
    Matrix G = rng.gaussian_matrix(spec.n, spec.n);
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Qo = qr.householderQ();
    Matrix A = Qo * eigenvalues.asDiagonal() * Qo.transpose();
    A = 0.5 * (A + A.transpose());
    Matrix B = rng.positive_matrix(spec.n, spec.m);
    Matrix C = rng.positive_matrix(spec.p, spec.n);

    try {
      LtiPlant plant(A, B, C);
      if (controllability_rank(plant) != spec.n) continue;
      if (observability_rank(plant) != spec.n) continue;
      if (observability_rank(A, symmetric_sqrt(cost.Qx(plant))) != spec.n) continue;
      return plant;
    } catch (const NumericalError&) {
      continue;
    }
  }
  throw NumericalError("random_assumption1_plant: no admissible plant in 200 draws");
}

namespace {

InstanceResult run_instance(const ExperimentConfig& cfg, int index, Rng rng) {
  InstanceResult result;
  result.index = index;
  auto started = std::chrono::steady_clock::now();

  try {
    CostSpec cost(cfg.Q, cfg.R);
    LtiPlant plant = cfg.plant.has_value()
                         ? *cfg.plant
                         : random_assumption1_plant(rng, *cfg.ensemble, cost);
    const int n = static_cast<int>(plant.n());
    const int m = static_cast<int>(plant.m());
    const int p = static_cast<int>(plant.p());

    Vector x0 = cfg.plant.has_value() && cfg.x0.has_value()
                    ? *cfg.x0
                    : rng.uniform_vector(n, -1.0, 1.0);
    std::optional<Vector> eta0 =
        cfg.plant.has_value() && cfg.eta0_eps.has_value() ? cfg.eta0_eps : std::nullopt;

    FilterBank bank = build_filter_bank(cfg.observer_eigenvalues, m, p, eta0, &rng);

    Eigen::Index T = cfg.sampling.T > 0
                         ? cfg.sampling.T
                         : static_cast<Eigen::Index>(2 * (m + 2) * n);
    RawDataset data = collect_data(plant, bank, cfg.input, x0, cfg.sampling.t0,
                                   cfg.sampling.dt, T, cfg.sampling.dt_integration,
                                   cfg.sampling.record_tail);
    ProjectedData proj = project(data, bank, cfg.projection_rel_tol);
    result.rank_r = proj.rank_r;
    result.order_estimate = proj.order_estimate;
    result.min_singular_phi0 = proj.min_singular_Phi0;
    result.phi0_full_row_rank = proj.min_singular_Phi0 > proj.tolerance_used;

    // Oracle pass: reference gain, identity residuals, regularity.
    Matrix L = place_observer(plant, cfg.observer_eigenvalues, &rng);
    StateParameterization param = build_state_parameterization(plant, bank, L, x0);
    IdentityResiduals identities =
        verify_parameterization_identities(param, bank, proj.F1, plant);
    result.identity_residual_input = identities.input_map;
    result.identity_residual_dynamics = identities.dynamics_map;
    RegularityReport regularity = verify_regularity(bank, param, proj.F1, plant, cost);
    result.stabilizable = regularity.stabilizable;
    result.detectable = regularity.detectable;

    AreSolution are = solve_lqr(plant, cost);
    result.oracle_cost = x0.dot(are.P_star * x0);
    Matrix K_oracle = are.K_star * param.S * proj.F1.transpose();
    double K_oracle_norm = spectral_norm(K_oracle);

    if (cfg.run_pi) {
      PiConfig pi_cfg;
      pi_cfg.epsilon = cfg.pi.epsilon;
      pi_cfg.max_iterations = cfg.pi.max_iterations;
      pi_cfg.record_iterates = true;
      SolveReport rep = policy_iteration(proj, data.U0, data.Y0, cost, pi_cfg);
      result.pi_run = true;
      result.pi_iterations = rep.iterations_run;
      result.pi_termination = to_string(rep.termination);
      result.pi_rel_error = spectral_norm(rep.final_gain - K_oracle) / K_oracle_norm;
      for (const auto& K : rep.gain_iterates)
        result.pi_error_curve.push_back(spectral_norm(K - K_oracle) / K_oracle_norm);
      if (cfg.evaluate_horizon > 0.0 && rep.termination == Termination::Converged)
        result.pi_cost = evaluate_controller(plant, bank, proj.F1, rep.final_gain,
                                             cost, x0, cfg.evaluate_horizon,
                                             cfg.sampling.dt_integration);
    }

    if (cfg.run_vi) {
      ViConfig vi_cfg;
      vi_cfg.epsilon = cfg.vi.epsilon;
      vi_cfg.max_iterations = cfg.vi.max_iterations;
      vi_cfg.step_numerator = cfg.vi.step_numerator;
      vi_cfg.step_offset = cfg.vi.step_offset;
      vi_cfg.set_growth = cfg.vi.set_growth;
      vi_cfg.Sigma0 =
          cfg.vi.sigma0_scale * Matrix::Identity(proj.rank_r, proj.rank_r);
      vi_cfg.record_iterates = true;
      SolveReport rep = value_iteration(proj, data.U0, data.Y0, cost, vi_cfg);
      result.vi_run = true;
      result.vi_iterations = rep.iterations_run;
      result.vi_termination = to_string(rep.termination);
      result.vi_resets = rep.resets;
      result.vi_rel_error = spectral_norm(rep.final_gain - K_oracle) / K_oracle_norm;
      for (const auto& K : rep.gain_iterates)
        result.vi_error_curve.push_back(spectral_norm(K - K_oracle) / K_oracle_norm);
      if (cfg.evaluate_horizon > 0.0 && rep.termination == Termination::Converged)
        result.vi_cost = evaluate_controller(plant, bank, proj.F1, rep.final_gain,
                                             cost, x0, cfg.evaluate_horizon,
                                             cfg.sampling.dt_integration);
    }

    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
  }

  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace

StudyReport run_study(const ExperimentConfig& cfg) {
  const int count = cfg.ensemble.has_value() ? cfg.ensemble->count : 1;
  StudyReport report;
  report.seed = cfg.seed;
  report.instances.resize(static_cast<std::size_t>(count));
  if (count == 0) return report;

  // Instance streams depend only on (seed, index) so results do not depend on
  // worker scheduling.
  Rng root(cfg.seed);
  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) streams.push_back(root.spawn(static_cast<std::uint64_t>(i)));

  int workers = cfg.workers > 0
                    ? cfg.workers
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, count));

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= count) break;
      report.instances[static_cast<std::size_t>(i)] =
          run_instance(cfg, i, streams[static_cast<std::size_t>(i)]);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers - 1; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  StudyAggregates& agg = report.aggregates;
  agg.instances = count;
  int pi_count = 0, vi_count = 0;
  for (const auto& inst : report.instances) {
    if (!inst.ok) {
      ++agg.failures;
      continue;
    }
    if (inst.phi0_full_row_rank) ++agg.full_rank_count;
    if (inst.pi_run) {
      ++pi_count;
      agg.pi_mean_iterations += inst.pi_iterations;
      agg.pi_mean_rel_error += inst.pi_rel_error;
    }
    if (inst.vi_run) {
      ++vi_count;
      agg.vi_mean_iterations += inst.vi_iterations;
      agg.vi_mean_rel_error += inst.vi_rel_error;
    }
  }
  if (pi_count > 0) {
    agg.pi_mean_iterations /= pi_count;
    agg.pi_mean_rel_error /= pi_count;
  }
  if (vi_count > 0) {
    agg.vi_mean_iterations /= vi_count;
    agg.vi_mean_rel_error /= vi_count;
  }
  return report;
}

void save_study(const StudyReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  json instances = json::array();
  for (const auto& inst : report.instances) {
    json entry = {
        {"index", inst.index},
        {"ok", inst.ok},
        {"phi0_full_row_rank", inst.phi0_full_row_rank},
        {"rank", inst.rank_r},
        {"order_estimate", inst.order_estimate},
        {"min_singular_phi0", inst.min_singular_phi0},
        {"identity_residual_input", inst.identity_residual_input},
        {"identity_residual_dynamics", inst.identity_residual_dynamics},
        {"stabilizable", inst.stabilizable},
        {"detectable", inst.detectable},
        {"oracle_cost", inst.oracle_cost},
    };
    if (!inst.ok) entry["error"] = inst.error;
    if (inst.pi_run) {
      entry["pi"] = {{"iterations", inst.pi_iterations},
                     {"termination", inst.pi_termination},
                     {"rel_error", inst.pi_rel_error},
                     {"cost", inst.pi_cost}};
    }
    if (inst.vi_run) {
      entry["vi"] = {{"iterations", inst.vi_iterations},
                     {"termination", inst.vi_termination},
                     {"rel_error", inst.vi_rel_error},
                     {"resets", inst.vi_resets},
                     {"cost", inst.vi_cost}};
    }
    instances.push_back(std::move(entry));
  }

  json doc = {
      {"schema", 1},
      {"kind", "study_report"},
      {"seed", report.seed},
      {"aggregates",
       {{"instances", report.aggregates.instances},
        {"failures", report.aggregates.failures},
        {"full_rank_count", report.aggregates.full_rank_count},
        {"pi_mean_iterations", report.aggregates.pi_mean_iterations},
        {"pi_mean_rel_error", report.aggregates.pi_mean_rel_error},
        {"vi_mean_iterations", report.aggregates.vi_mean_iterations},
        {"vi_mean_rel_error", report.aggregates.vi_mean_rel_error}}},
      {"instances", std::move(instances)},
  };
  {
    std::ofstream out(fs::path(dir) / "report.json");
    out << std::setprecision(17) << doc.dump(2) << "\n";
  }

  {
    std::ofstream out(fs::path(dir) / "instances.csv");
    out << std::setprecision(17)
        << "index,ok,full_row_rank,rank,order_estimate,min_singular_phi0,"
           "pi_iterations,pi_rel_error,vi_iterations,vi_rel_error,oracle_cost\n";
    for (const auto& inst : report.instances)
      out << inst.index << "," << inst.ok << "," << inst.phi0_full_row_rank << ","
          << inst.rank_r << "," << inst.order_estimate << ","
          << inst.min_singular_phi0 << "," << inst.pi_iterations << ","
          << inst.pi_rel_error << "," << inst.vi_iterations << ","
          << inst.vi_rel_error << "," << inst.oracle_cost << "\n";
  }

  {
    std::ofstream out(fs::path(dir) / "singular_values.csv");
    out << std::setprecision(17) << "index,min_singular_phi0\n";
    for (const auto& inst : report.instances)
      out << inst.index << "," << inst.min_singular_phi0 << "\n";
  }

  auto write_curves = [&](const char* name, bool vi) {
    std::ofstream out(fs::path(dir) / name);
    out << std::setprecision(17) << "index,iter,rel_error\n";
    for (const auto& inst : report.instances) {
      const auto& curve = vi ? inst.vi_error_curve : inst.pi_error_curve;
      for (std::size_t k = 0; k < curve.size(); ++k)
        out << inst.index << "," << k << "," << curve[k] << "\n";
    }
  };
  write_curves("pi_error_curves.csv", false);
  write_curves("vi_error_curves.csv", true);

  {
    std::ofstream out(fs::path(dir) / "timings.csv");
    out << std::setprecision(6) << "index,wall_time_s\n";
    for (const auto& inst : report.instances)
      out << inst.index << "," << inst.wall_time_s << "\n";
  }
}

}  // namespace ddlqr
