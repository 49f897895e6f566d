#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ddlqr/oracle.hpp"
#include "ddlqr/solvers.hpp"
#include "support/fixtures.hpp"

using namespace ddlqr;
namespace fx = ddlqr::testing;

namespace {

Vector fixed_eta0(int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = 0.9 - 0.45 * i + 0.2 * (i % 2);
  return v;
}

struct Bench {
  LtiPlant plant;
  CostSpec cost;
  fx::PipelineFixture pipe;
  StateParameterization param;
  Matrix K_oracle;
  Vector x0;

  explicit Bench(const LtiPlant& plant_in, const Vector& x0_in,
                 double dt_integration = 1e-3, Eigen::Index T = 32)
      : plant(plant_in),
        cost(fx::multi_output_cost()),
        pipe(fx::run_pipeline(plant_in, fx::multi_output_observer_eigenvalues(),
                              fx::multi_output_input(), x0_in, fixed_eta0(4), 0.2, T,
                              dt_integration)),
        param(build_state_parameterization(
            plant_in, pipe.bank,
            place_observer(plant_in, fx::multi_output_observer_eigenvalues()), x0_in)),
        x0(x0_in) {
    AreSolution are = solve_lqr(plant, cost);
    K_oracle = are.K_star * param.S * pipe.proj.F1.transpose();
  }
};

Vector bench_x0() {
  Vector x0(4);
  x0 << 4.2, -7.7, 8.9, -3.1;
  return x0;
}

}  // namespace

TEST_CASE("policy iteration solves the multi-output benchmark from zero gain") {
  Bench bench(fx::multi_output_plant(), bench_x0());
  PiConfig cfg;
  cfg.record_iterates = true;
  SolveReport report =
      policy_iteration(bench.pipe.proj, bench.pipe.data.U0, bench.pipe.data.Y0,
                       bench.cost, cfg);

  CHECK(report.termination == Termination::Converged);
  CHECK(report.iterations_run <= 12);
  double rel_error = spectral_norm(report.final_gain - bench.K_oracle) /
                     spectral_norm(bench.K_oracle);
  CHECK(rel_error <= 1e-6);

  SUBCASE("every iterate keeps a Hurwitz reduced closed loop") {
    for (const auto& rec : report.per_iteration) {
      REQUIRE(rec.closed_loop_abscissa.has_value());
      CHECK(*rec.closed_loop_abscissa < -1e-9);
    }
  }

  SUBCASE("cost matrices decrease monotonically") {
    for (std::size_t i = 0; i + 1 < report.sigma_iterates.size(); ++i) {
      Matrix diff = report.sigma_iterates[i] - report.sigma_iterates[i + 1];
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (diff + diff.transpose()));
      CHECK(es.eigenvalues().minCoeff() > -1e-8);
    }
  }

  SUBCASE("reduced and unreduced policy evaluation agree") {
    PiConfig unreduced = cfg;
    unreduced.use_reduced = false;
    SolveReport other =
        policy_iteration(bench.pipe.proj, bench.pipe.data.U0, bench.pipe.data.Y0,
                         bench.cost, unreduced);
    REQUIRE(other.iterations_run == report.iterations_run);
    CHECK(spectral_norm(other.final_gain - report.final_gain) < 1e-7);
  }
}

TEST_CASE("policy iteration matches model-based iteration on the transformed problem") {
  // Well-conditioned random cases: the data equation and the model-based
  // Lyapunov recursion must produce the same iterates.
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    fx::RandomCase rc = fx::well_conditioned_case(rng);
    PiConfig cfg;
    cfg.record_iterates = true;
    cfg.epsilon = 1e-10;
    SolveReport data_run =
        policy_iteration(rc.pipe.proj, rc.pipe.data.U0, rc.pipe.data.Y0, rc.cost, cfg);

    Matrix L = place_observer(rc.plant, rc.observer_eigs, &rng);
    StateParameterization param =
        build_state_parameterization(rc.plant, rc.pipe.bank, L, rc.x0);
    TransformedSystem sys =
        transformed_system(param, rc.pipe.bank, rc.pipe.proj.F1, rc.plant, rc.cost);
    KleinmanResult model_run = kleinman_iterate(
        sys.A_F, sys.B_F, sys.Q_phi, rc.cost.R,
        Matrix::Zero(1, rc.pipe.proj.rank_r), 1e-10, 200, true);

    const std::size_t count =
        std::min(data_run.sigma_iterates.size(), model_run.P_iterates.size());
    REQUIRE(count >= 3);
    for (std::size_t i = 0; i < count; ++i) {
      CHECK((data_run.sigma_iterates[i] - model_run.P_iterates[i]).norm() <= 1e-8);
      CHECK((data_run.gain_iterates[i + 1] - model_run.K_iterates[i + 1]).norm() <= 1e-8);
    }
  }
}

TEST_CASE("benchmark iterates track the model-based recursion within conditioning") {
  // cond(Phi0) is about 1e6 on the multi-output benchmark, which bounds the
  // achievable per-iterate agreement through the pseudo-inverse roundoff.
  Bench bench(fx::multi_output_plant(), bench_x0());
  PiConfig cfg;
  cfg.record_iterates = true;
  cfg.epsilon = 1e-10;
  SolveReport data_run =
      policy_iteration(bench.pipe.proj, bench.pipe.data.U0, bench.pipe.data.Y0,
                       bench.cost, cfg);

  TransformedSystem sys = transformed_system(bench.param, bench.pipe.bank,
                                             bench.pipe.proj.F1, bench.plant, bench.cost);
  KleinmanResult model_run = kleinman_iterate(
      sys.A_F, sys.B_F, sys.Q_phi, bench.cost.R,
      Matrix::Zero(2, bench.pipe.proj.rank_r), 1e-10, 200, true);

  const std::size_t count =
      std::min(data_run.sigma_iterates.size(), model_run.P_iterates.size());
  REQUIRE(count >= 4);
  for (std::size_t i = 0; i < count; ++i)
    CHECK((data_run.sigma_iterates[i] - model_run.P_iterates[i]).norm() <= 1e-5);
}

TEST_CASE("policy iteration reports a destabilizing start") {
  Bench bench(fx::multi_output_plant_unstable(), bench_x0());
  PiConfig cfg;  // zero initial gain cannot stabilize this plant
  SolveReport report =
      policy_iteration(bench.pipe.proj, bench.pipe.data.U0, bench.pipe.data.Y0,
                       bench.cost, cfg);
  CHECK(report.termination == Termination::DestabilizedGain);
}

TEST_CASE("value iteration solves the unstable benchmark without a stabilizing start") {
  Bench bench(fx::multi_output_plant_unstable(), bench_x0());
  ViConfig cfg;
  cfg.step_numerator = 100.0;
  cfg.Sigma0 = 0.01 * Matrix::Identity(bench.pipe.proj.rank_r, bench.pipe.proj.rank_r);
  SolveReport report =
      value_iteration(bench.pipe.proj, bench.pipe.data.U0, bench.pipe.data.Y0,
                      bench.cost, cfg);

  CHECK(report.termination == Termination::Converged);
  CHECK(report.iterations_run <= 3000);
  double rel_error = spectral_norm(report.final_gain - bench.K_oracle) /
                     spectral_norm(bench.K_oracle);
  CHECK(rel_error <= 1e-4);

  SUBCASE("reduced and unreduced update routes converge to the same controller") {
    ViConfig unreduced = cfg;
    unreduced.use_reduced = false;
    SolveReport other = value_iteration(bench.pipe.proj, bench.pipe.data.U0,
                                        bench.pipe.data.Y0, bench.cost, unreduced);
    REQUIRE(other.termination == Termination::Converged);
    CHECK(spectral_norm(other.final_gain - report.final_gain) <=
          1e-6 * spectral_norm(report.final_gain));
  }
}

TEST_CASE("value iteration is stationary at the transformed optimum") {
  Bench bench(fx::multi_output_plant(), bench_x0());
  TransformedOptimum opt = transformed_optimum(bench.param, bench.pipe.bank,
                                               bench.pipe.proj.F1, bench.plant,
                                               bench.cost);
  ViConfig cfg;
  cfg.Sigma0 = opt.Sigma_star;
  cfg.record_iterates = true;
  SolveReport report =
      value_iteration(bench.pipe.proj, bench.pipe.data.U0, bench.pipe.data.Y0,
                      bench.cost, cfg);
  CHECK(report.termination == Termination::Converged);
  CHECK(report.iterations_run == 1);
  CHECK(report.per_iteration.front().sigma_delta <= 1e-6);
}

TEST_CASE("value iteration resets when the iterate leaves the constraint set") {
  Bench bench(fx::multi_output_plant(), bench_x0());
  ViConfig cfg;
  cfg.set_growth = 1e-3;  // absurdly tight: every step escapes
  cfg.max_iterations = 200;
  SolveReport report =
      value_iteration(bench.pipe.proj, bench.pipe.data.U0, bench.pipe.data.Y0,
                      bench.cost, cfg);
  CHECK(report.termination == Termination::Diverged);
  CHECK(report.resets > 50);
}

TEST_CASE("both solvers find the same controller on the stable benchmark") {
  Bench bench(fx::multi_output_plant(), bench_x0());
  PiConfig pi_cfg;
  SolveReport pi_report =
      policy_iteration(bench.pipe.proj, bench.pipe.data.U0, bench.pipe.data.Y0,
                       bench.cost, pi_cfg);
  ViConfig vi_cfg;
  vi_cfg.step_numerator = 100.0;
  vi_cfg.Sigma0 = 0.01 * Matrix::Identity(bench.pipe.proj.rank_r, bench.pipe.proj.rank_r);
  SolveReport vi_report =
      value_iteration(bench.pipe.proj, bench.pipe.data.U0, bench.pipe.data.Y0,
                      bench.cost, vi_cfg);
  REQUIRE(pi_report.termination == Termination::Converged);
  REQUIRE(vi_report.termination == Termination::Converged);
  CHECK(spectral_norm(pi_report.final_gain - vi_report.final_gain) /
            spectral_norm(pi_report.final_gain) <
        1e-4);
}

TEST_CASE("scalar pipeline converges to the transformed Riccati solution") {
  Matrix A(1, 1), B(1, 1), C(1, 1);
  A << -0.8;
  B << 1.1;
  C << 1.0;
  LtiPlant plant(A, B, C);
  CostSpec cost(Matrix::Identity(1, 1), Matrix::Identity(1, 1));
  SinusoidInput input;
  SinusoidChannel ch;
  ch.offset = 0.25;
  ch.terms = {{0.8, 2.0, 0.0}, {0.5, 5.0, 0.7}, {0.35, 11.0, 1.9}};
  input.channels = {ch};
  Vector x0(1);
  x0 << 1.4;
  Vector eta0(1);
  eta0 << -0.6;
  auto pipe = fx::run_pipeline(plant, {{-3, 0}}, input, x0, eta0, 0.2, 8, 1e-4);

  Matrix L = place_observer(plant, {{-3, 0}});
  StateParameterization param = build_state_parameterization(plant, pipe.bank, L, x0);
  TransformedOptimum opt =
      transformed_optimum(param, pipe.bank, pipe.proj.F1, plant, cost);

  PiConfig cfg;
  cfg.epsilon = 1e-11;
  SolveReport report =
      policy_iteration(pipe.proj, pipe.data.U0, pipe.data.Y0, cost, cfg);
  REQUIRE(report.termination == Termination::Converged);
  CHECK(spectral_norm(report.final_gain - opt.K_star_phi) <= 1e-8);
}

TEST_CASE("VI update routes agree step by step on well-conditioned data") {
  Rng rng(43);
  fx::RandomCase rc = fx::well_conditioned_case(rng);
  ViConfig cfg;
  cfg.max_iterations = 40;
  ViConfig unreduced = cfg;
  unreduced.use_reduced = false;
  SolveReport a = value_iteration(rc.pipe.proj, rc.pipe.data.U0, rc.pipe.data.Y0,
                                  rc.cost, cfg);
  SolveReport b = value_iteration(rc.pipe.proj, rc.pipe.data.U0, rc.pipe.data.Y0,
                                  rc.cost, unreduced);
  CHECK(spectral_norm(a.final_sigma - b.final_sigma) < 1e-9);
}

TEST_CASE("closed-loop evaluation reproduces the optimal cost") {
  Bench bench(fx::multi_output_plant(), bench_x0());
  PiConfig cfg;
  SolveReport report =
      policy_iteration(bench.pipe.proj, bench.pipe.data.U0, bench.pipe.data.Y0,
                       bench.cost, cfg);
  REQUIRE(report.termination == Termination::Converged);

  AreSolution are = solve_lqr(bench.plant, bench.cost);
  double optimal = bench.x0.dot(are.P_star * bench.x0);

  double realized = evaluate_controller(bench.plant, bench.pipe.bank,
                                        bench.pipe.proj.F1, report.final_gain,
                                        bench.cost, bench.x0, 40.0, 1e-3);
  CHECK(std::abs(realized - optimal) <= 1e-3 * optimal);

  SUBCASE("the pulled-back oracle gain realizes the same cost") {
    double oracle_cost = evaluate_controller(bench.plant, bench.pipe.bank,
                                             bench.pipe.proj.F1, bench.K_oracle,
                                             bench.cost, bench.x0, 40.0, 1e-3);
    CHECK(std::abs(oracle_cost - realized) <= 1e-6 * std::max(1.0, realized));
  }

  SUBCASE("the predicted cost matches the quadratic form in phi0") {
    Vector phi0 = bench.pipe.proj.F1 * bench.pipe.bank.eta0();
    double predicted = phi0.dot(report.final_sigma * phi0);
    CHECK(std::abs(predicted - optimal) <= 1e-6 * optimal);
  }
}

TEST_CASE("closed-loop evaluation rejects destabilizing gains") {
  LtiPlant plant(3.0 * Matrix::Identity(1, 1), Matrix::Identity(1, 1),
                 Matrix::Identity(1, 1));
  CostSpec cost(Matrix::Identity(1, 1), Matrix::Identity(1, 1));
  Vector eta0(1);
  eta0 << 0.5;
  FilterBank bank = build_filter_bank({{-3, 0}}, 1, 1, eta0);
  Matrix F1 = Matrix::Identity(3, 3);
  Vector x0(1);
  x0 << 1.0;
  CHECK_THROWS_AS(evaluate_controller(plant, bank, F1, Matrix::Zero(1, 3), cost, x0,
                                      10.0, 1e-3),
                  UnstableClosedLoopError);
}

TEST_CASE("zero plant state still produces a finite transient cost") {
  Bench bench(fx::multi_output_plant(), Vector::Zero(4).eval());
  PiConfig cfg;
  SolveReport report =
      policy_iteration(bench.pipe.proj, bench.pipe.data.U0, bench.pipe.data.Y0,
                       bench.cost, cfg);
  REQUIRE(report.termination == Termination::Converged);
  double realized = evaluate_controller(bench.plant, bench.pipe.bank,
                                        bench.pipe.proj.F1, report.final_gain,
                                        bench.cost, Vector::Zero(4), 40.0, 1e-3);
  CHECK(std::isfinite(realized));
  CHECK(realized >= 0.0);
}

TEST_CASE("off-policy: a different exploration input yields the same controller cost") {
  Vector x0 = bench_x0();
  Bench bench(fx::multi_output_plant(), x0);
  SinusoidInput other = fx::multi_output_input();
  for (auto& chan : other.channels)
    for (auto& term : chan.terms) {
      term.amplitude *= 1.7;
      term.phase += 0.9;
      term.angular_frequency *= 0.75;
    }
  auto pipe2 = fx::run_pipeline(fx::multi_output_plant(),
                                fx::multi_output_observer_eigenvalues(), other, x0,
                                fixed_eta0(4), 0.2, 32, 1e-3);

  PiConfig cfg;
  SolveReport rep1 = policy_iteration(bench.pipe.proj, bench.pipe.data.U0,
                                      bench.pipe.data.Y0, bench.cost, cfg);
  SolveReport rep2 =
      policy_iteration(pipe2.proj, pipe2.data.U0, pipe2.data.Y0, bench.cost, cfg);
  REQUIRE(rep1.termination == Termination::Converged);
  REQUIRE(rep2.termination == Termination::Converged);

  double cost1 = evaluate_controller(bench.plant, bench.pipe.bank, bench.pipe.proj.F1,
                                     rep1.final_gain, bench.cost, x0, 40.0, 1e-3);
  double cost2 = evaluate_controller(bench.plant, pipe2.bank, pipe2.proj.F1,
                                     rep2.final_gain, bench.cost, x0, 40.0, 1e-3);
  CHECK(std::abs(cost1 - cost2) <= 1e-5 * std::max(cost1, cost2));
}

TEST_CASE("uncontrollable but stabilizable variant converges for both solvers") {
  Bench bench(fx::uncontrollable_plant(), bench_x0());
  PiConfig pi_cfg;
  SolveReport pi_report =
      policy_iteration(bench.pipe.proj, bench.pipe.data.U0, bench.pipe.data.Y0,
                       bench.cost, pi_cfg);
  REQUIRE(pi_report.termination == Termination::Converged);
  CHECK(spectral_norm(pi_report.final_gain - bench.K_oracle) /
            spectral_norm(bench.K_oracle) <=
        1e-6);

  ViConfig vi_cfg;
  vi_cfg.step_numerator = 100.0;
  vi_cfg.Sigma0 = 0.01 * Matrix::Identity(bench.pipe.proj.rank_r, bench.pipe.proj.rank_r);
  SolveReport vi_report =
      value_iteration(bench.pipe.proj, bench.pipe.data.U0, bench.pipe.data.Y0,
                      bench.cost, vi_cfg);
  REQUIRE(vi_report.termination == Termination::Converged);
  CHECK(spectral_norm(vi_report.final_gain - bench.K_oracle) /
            spectral_norm(bench.K_oracle) <=
        1e-4);
}
