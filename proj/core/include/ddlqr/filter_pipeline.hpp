#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "ddlqr/lti.hpp"
#include "ddlqr/matrix_ops.hpp"
#include "ddlqr/rng.hpp"

namespace ddlqr {

// Model-free substitute-state generator. Each input and output channel is
// passed through an n-th order filter in companion form whose spectrum is the
// user-assigned observer spectrum; one autonomous copy replicates the
// observation-error dynamics. Stacking all filter states gives the substitute
// state eta of dimension (m+p+1)n, generated without any plant knowledge.
struct FilterBank {
  std::vector<std::complex<double>> observer_eigenvalues;
  Vector char_coeffs;  // a_0 .. a_{n-1} of the assigned characteristic polynomial
  Matrix A_s;          // n x n companion block
  Matrix b_s;          // n x 1
  Matrix A_eps;        // autonomous error-filter block, same spectrum as A_s
  Matrix script_A;     // diag(I_{m+p} (x) A_s, A_eps)
  Matrix script_B;     // diag(I_{m+p} (x) b_s, 0_{n x n})
  Vector eta0_eps;     // nonzero initial state of the error filter
  int n = 0, m = 0, p = 0;

  Eigen::Index eta_dim() const { return static_cast<Eigen::Index>((m + p + 1) * n); }

  // First m columns of script_B: the known input matrix of the isosystem.
  Matrix input_columns() const { return script_B.leftCols(m); }
  // Columns m+1 .. m+p of script_B: the output injection channels.
  Matrix output_columns() const { return script_B.middleCols(m, p); }

  // eta starts relaxed except for the error-filter block.
  Vector eta0() const;

  // Right-hand side of the filter system at one instant.
  Vector derivative(const Vector& eta, const Vector& u, const Vector& y) const;
};

FilterBank build_filter_bank(const std::vector<std::complex<double>>& observer_eigenvalues,
                             int m, int p,
                             const std::optional<Vector>& eta0_eps = std::nullopt,
                             Rng* rng = nullptr);

// Fine-grid recording of one co-simulation; consumed by trajectory generation.
// x holds the hidden plant state and is read only by the verification oracle.
struct Recording {
  double t0 = 0.0;
  double dt = 0.0;
  Matrix u, y, eta, x;

  bool empty() const { return eta.size() == 0; }
  Eigen::Index samples() const { return eta.cols(); }
};

// Uniformly sampled data matrices from one co-simulation of the plant and the
// filter bank. E1 columns are evaluated from the filter right-hand side at the
// sample instants, never finite-differenced.
struct RawDataset {
  Matrix U0;  // m x T
  Matrix Y0;  // p x T
  Matrix E0;  // (m+p+1)n x T, sampled eta
  Matrix E1;  // (m+p+1)n x T, sampled eta'
  double t0 = 0.0;
  double sample_dt = 0.0;
  Eigen::Index T = 0;
  int n = 0, m = 0, p = 0;
  Recording fine;
};

// Co-simulates plant and filter bank on a single RK4 grid and samples at
// t0 + k * sample_dt. sample_dt must be an integer multiple of dt_integration
// so samples are exact grid values. record_tail extends the fine recording
// beyond the last sample for later trajectory generation.
RawDataset collect_data(const LtiPlant& plant, const FilterBank& bank,
                        const SinusoidInput& input, const Vector& x0, double t0,
                        double sample_dt, Eigen::Index T, double dt_integration,
                        double record_tail = 0.0);

// Rank-revealing projection of the raw data. F1 is computed once from E0 and
// frozen; all downstream quantities live in the projected coordinates.
struct ProjectedData {
  Matrix F1;    // r x (m+p+1)n, orthonormal rows
  Matrix Phi0;  // r x T
  Matrix Phi1;  // r x T
  Matrix B_F;   // r x m, known input matrix after projection
  Eigen::Index rank_r = 0;
  int order_estimate = 0;
  double min_singular_Phi0 = 0.0;
  double tolerance_used = 0.0;
  Vector e0_singular_values;
};

ProjectedData project(const RawDataset& data, const FilterBank& bank,
                      double rel_tol = 1e-9);

// Data-level estimates of the projected isosystem, exact when Phi0 is full
// row rank: dynamics (Phi1 - B_F U0) Phi0^+ and output map Y0 Phi0^+.
Matrix reduced_dynamics(const ProjectedData& proj, const Matrix& U0);
Matrix reduced_output(const ProjectedData& proj, const Matrix& Y0);

// Rank of the vectorized outer-product regressor [vec(eta eta'), ...] next to
// its structural bound ((m+2)n)^2; demonstrates why least-squares regression
// matrices built from eta cannot reach full row rank when p > 1.
struct RegressionRankReport {
  Eigen::Index rank = 0;
  Eigen::Index bound = 0;
  Eigen::Index rows = 0;
};

RegressionRankReport regression_matrix_rank(const RawDataset& data);

}  // namespace ddlqr
