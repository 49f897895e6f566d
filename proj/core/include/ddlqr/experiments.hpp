#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ddlqr/filter_pipeline.hpp"
#include "ddlqr/lti.hpp"
#include "ddlqr/oracle.hpp"
#include "ddlqr/rng.hpp"
#include "ddlqr/solvers.hpp"

namespace ddlqr {

struct SamplingSpec {
  double t0 = 0.0;
  double dt = 0.2;             // sampling interval
  Eigen::Index T = 0;          // 0 picks the default 2 (m+2) n
  double dt_integration = 1e-3;
  double record_tail = 0.0;    // extra recorded seconds for trajectory generation
};

struct EnsembleSpec {
  int count = 0;
  int n = 2, m = 1, p = 1;
  double eig_lo = -2.0;
  double eig_hi = 0.0;
};

struct PiSettings {
  double epsilon = 0.01;
  int max_iterations = 100;
};

struct ViSettings {
  double epsilon = 0.01;
  int max_iterations = 3000;
  double step_numerator = 10.0;
  double step_offset = 1000.0;
  double set_growth = 1e5;
  double sigma0_scale = 1.0;  // Sigma0 = scale * identity
};

struct TrajGenSettings {
  std::string mode = "a";          // "a": free weighting, "b": prescribed input
  double anchor_time = 0.0;
  double t_end = 2.0;
  double coeff_amplitude = 0.05;   // mode a: c(t) = amplitude * sin(freq t) * ones
  double coeff_frequency = 1.0;
  std::optional<SinusoidInput> fresh_input;  // mode b
};

struct ExperimentConfig {
  int schema = 1;
  std::uint64_t seed = 0;
  std::optional<LtiPlant> plant;         // explicit plant ...
  std::optional<EnsembleSpec> ensemble;  // ... or a random ensemble
  std::vector<std::complex<double>> observer_eigenvalues;
  Matrix Q, R;
  SinusoidInput input;
  SamplingSpec sampling;
  std::optional<Vector> x0;        // explicit-plant fixtures
  std::optional<Vector> eta0_eps;
  bool run_pi = true;
  bool run_vi = false;
  PiSettings pi;
  ViSettings vi;
  TrajGenSettings trajgen;
  double evaluate_horizon = 0.0;   // 0 skips closed-loop cost evaluation
  std::string output_dir = "out";
  int workers = 0;                 // 0 uses the hardware thread count
  double projection_rel_tol = 1e-9;
};

ExperimentConfig load_config(const std::string& path);

struct InstanceResult {
  int index = 0;
  bool ok = false;
  std::string error;

  bool phi0_full_row_rank = false;
  Eigen::Index rank_r = 0;
  int order_estimate = 0;
  double min_singular_phi0 = 0.0;

  bool pi_run = false;
  int pi_iterations = 0;
  std::string pi_termination;
  double pi_rel_error = 0.0;
  double pi_cost = 0.0;
  std::vector<double> pi_error_curve;

  bool vi_run = false;
  int vi_iterations = 0;
  std::string vi_termination;
  double vi_rel_error = 0.0;
  double vi_cost = 0.0;
  int vi_resets = 0;
  std::vector<double> vi_error_curve;

  double identity_residual_input = 0.0;
  double identity_residual_dynamics = 0.0;
  bool stabilizable = false;
  bool detectable = false;
  double oracle_cost = 0.0;  // x0' P* x0
  double wall_time_s = 0.0;
};

struct StudyAggregates {
  int instances = 0;
  int failures = 0;
  int full_rank_count = 0;
  double pi_mean_iterations = 0.0;
  double pi_mean_rel_error = 0.0;
  double vi_mean_iterations = 0.0;
  double vi_mean_rel_error = 0.0;
};

struct StudyReport {
  std::uint64_t seed = 0;
  std::vector<InstanceResult> instances;
  StudyAggregates aggregates;
};

// Runs every configured instance (one for an explicit plant, `count` for an
// ensemble) on a bounded worker pool; per-instance randomness depends only on
// (seed, index), so reports are reproducible regardless of scheduling.
StudyReport run_study(const ExperimentConfig& config);

// Writes report.json (deterministic), instances.csv, singular_values.csv, the
// per-iteration error-curve CSVs, and timings.csv (wall times only, excluded
// from the determinism guarantee).
void save_study(const StudyReport& report, const std::string& dir);

// Random plant of the single-output study recipe: symmetric A with eigenvalues
// uniform in (eig_lo, eig_hi) through a random orthogonal similarity, strictly
// positive B and C, regenerated until controllability and both observability
// conditions hold.
LtiPlant random_assumption1_plant(Rng& rng, const EnsembleSpec& spec, const CostSpec& cost);

}  // namespace ddlqr
