#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ddlqr/filter_pipeline.hpp"
#include "ddlqr/lti.hpp"

namespace ddlqr {

// Both solvers consume one fixed exploration dataset (off-policy): the
// projected data matrices Phi0/Phi1/B_F plus the sampled inputs and outputs.
// Internally they precompute the reduced matrices (Phi1 - B_F U0) Phi0^+ and
// Y0 Phi0^+ once, which is algebraically identical to the unreduced
// data-matrix iterations under full row rank Phi0; the unreduced forms are
// kept behind `use_reduced = false` so tests can assert the equivalence.

struct PiConfig {
  Matrix K0;                 // m x r; empty means zero (open-loop-stable plants)
  double epsilon = 0.01;
  int max_iterations = 100;
  bool use_reduced = true;
  bool record_iterates = false;
};

struct ViConfig {
  Matrix Sigma0;             // r x r PSD; empty means identity
  double epsilon = 0.01;
  int max_iterations = 3000;
  double step_numerator = 10.0;   // delta_i = step_numerator / (i + step_offset)
  double step_offset = 1000.0;
  double set_growth = 1e5;        // spectral-norm bound of the j-th constraint set
  bool use_reduced = true;
  bool record_iterates = false;
};

enum class Termination { Converged, MaxIterations, Diverged, DestabilizedGain };

std::string to_string(Termination t);

struct IterationRecord {
  double gain_delta = 0.0;
  double sigma_delta = 0.0;
  std::optional<double> closed_loop_abscissa;  // PI only
};

struct SolveReport {
  std::string method;  // "PI" or "VI"
  int iterations_run = 0;
  Matrix final_gain;   // m x r
  Matrix final_sigma;  // r x r
  std::vector<IterationRecord> per_iteration;
  Termination termination = Termination::MaxIterations;
  int resets = 0;  // VI constraint-set resets

  std::vector<Matrix> sigma_iterates;  // populated when record_iterates is set
  std::vector<Matrix> gain_iterates;
};

// Off-policy policy iteration: policy evaluation via the generalized
// Sylvester data equation, policy improvement K = R^{-1} B_F' Sigma.
SolveReport policy_iteration(const ProjectedData& data, const Matrix& U0,
                             const Matrix& Y0, const CostSpec& cost,
                             const PiConfig& cfg);

// Off-policy value iteration with harmonic step sizes and growing
// spectral-norm constraint sets.
SolveReport value_iteration(const ProjectedData& data, const Matrix& U0,
                            const Matrix& Y0, const CostSpec& cost,
                            const ViConfig& cfg);

// Deploys u = -K F1 eta in closed loop (plant co-simulated with the filter
// bank) and integrates the realized quadratic cost with the trapezoid rule.
double evaluate_controller(const LtiPlant& plant, const FilterBank& bank,
                           const Matrix& F1, const Matrix& K, const CostSpec& cost,
                           const Vector& x0, double horizon,
                           double dt_integration = 1e-3);

}  // namespace ddlqr
