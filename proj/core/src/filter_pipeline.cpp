#include "ddlqr/filter_pipeline.hpp"

#include <cmath>

namespace ddlqr {

namespace {

bool krylov_invertible(const Matrix& A_eps, const Vector& eta0) {
  const Eigen::Index n = A_eps.rows();
  Matrix K(n, n);
  Vector v = eta0;
  for (Eigen::Index k = 0; k < n; ++k) {
    K.col(n - 1 - k) = v;
    v = A_eps * v;
  }
  Eigen::JacobiSVD<Matrix> svd(K);
  const Vector& sv = svd.singularValues();
  return sv(n - 1) > 1e-10 * sv(0);
}

}  // namespace

Vector FilterBank::eta0() const {
  Vector eta = Vector::Zero(eta_dim());
  eta.tail(n) = eta0_eps;
  return eta;
}

Vector FilterBank::derivative(const Vector& eta, const Vector& u, const Vector& y) const {
  Vector drive(m + p + n);
  drive.head(m) = u;
  drive.segment(m, p) = y;
  drive.tail(n).setZero();
  return script_A * eta + script_B * drive;
}

FilterBank build_filter_bank(const std::vector<std::complex<double>>& observer_eigenvalues,
                             int m, int p, const std::optional<Vector>& eta0_eps,
                             Rng* rng) {
  const int n = static_cast<int>(observer_eigenvalues.size());
  if (n < 1) throw ValidationError("build_filter_bank: need at least one eigenvalue");
  if (m < 1 || p < 1) throw ValidationError("build_filter_bank: m, p >= 1");
  for (const auto& lambda : observer_eigenvalues)
    if (lambda.real() >= 0.0)
      throw UnstableSpectrumError("build_filter_bank: eigenvalues must be stable");

  FilterBank bank;
  bank.observer_eigenvalues = observer_eigenvalues;
  bank.n = n;
  bank.m = m;
  bank.p = p;
  bank.char_coeffs = characteristic_coefficients(observer_eigenvalues);
  bank.A_s = companion_matrix(bank.char_coeffs);
  bank.b_s = Matrix::Zero(n, 1);
  bank.b_s(n - 1, 0) = 1.0;
  // The error filter only needs the assigned spectrum; the companion form
  // itself is the simplest valid choice.
  bank.A_eps = bank.A_s;

  const Eigen::Index dim = bank.eta_dim();
  bank.script_A = Matrix::Zero(dim, dim);
  bank.script_B = Matrix::Zero(dim, m + p + n);
  for (int c = 0; c < m + p; ++c) {
    bank.script_A.block(c * n, c * n, n, n) = bank.A_s;
    bank.script_B.block(c * n, c, n, 1) = bank.b_s;
  }
  bank.script_A.bottomRightCorner(n, n) = bank.A_eps;

  if (eta0_eps.has_value()) {
    if (eta0_eps->size() != n)
      throw ValidationError("build_filter_bank: eta0_eps dimension");
    if (eta0_eps->norm() == 0.0)
      throw DegenerateEta0Error("build_filter_bank: eta0_eps must be nonzero");
    if (!krylov_invertible(bank.A_eps, *eta0_eps))
      throw DegenerateEta0Error("build_filter_bank: eta0_eps gives a singular Krylov matrix");
    bank.eta0_eps = *eta0_eps;
  } else {
    if (rng == nullptr)
      throw ValidationError("build_filter_bank: rng required to sample eta0_eps");
    bool found = false;
    for (int attempt = 0; attempt < 10 && !found; ++attempt) {
      Vector candidate = rng->uniform_vector(n, -1.0, 1.0);
      if (candidate.norm() > 0.0 && krylov_invertible(bank.A_eps, candidate)) {
        bank.eta0_eps = candidate;
        found = true;
      }
    }
    if (!found)
      throw DegenerateEta0Error("build_filter_bank: could not sample a nondegenerate eta0_eps");
  }
  return bank;
}

RawDataset collect_data(const LtiPlant& plant, const FilterBank& bank,
                        const SinusoidInput& input, const Vector& x0, double t0,
                        double sample_dt, Eigen::Index T, double dt_integration,
                        double record_tail) {
  if (T < 1) throw ValidationError("collect_data: T >= 1");
  if (dt_integration <= 0.0 || sample_dt <= 0.0)
    throw ValidationError("collect_data: positive step sizes required");
  if (plant.m() != bank.m || plant.p() != bank.p || plant.n() != bank.n)
    throw ValidationError("collect_data: plant and filter bank dimensions disagree");
  if (x0.size() != plant.n()) throw ValidationError("collect_data: x0 dimension");

  const double stride_real = sample_dt / dt_integration;
  const auto stride = static_cast<Eigen::Index>(std::llround(stride_real));
  if (std::abs(stride_real - static_cast<double>(stride)) > 1e-9 || stride < 1)
    throw ValidationError("collect_data: sample_dt must be an integer multiple of dt_integration");
  const double t0_steps_real = t0 / dt_integration;
  const auto t0_steps = static_cast<Eigen::Index>(std::llround(t0_steps_real));
  if (std::abs(t0_steps_real - static_cast<double>(t0_steps)) > 1e-9 || t0_steps < 0)
    throw ValidationError("collect_data: t0 must be a nonnegative multiple of dt_integration");

  const auto tail_steps =
      static_cast<Eigen::Index>(std::ceil(record_tail / dt_integration - 1e-9));
  const Eigen::Index last_sample_step = t0_steps + (T - 1) * stride;
  const Eigen::Index total_steps = last_sample_step + std::max<Eigen::Index>(tail_steps, 0);

  const Eigen::Index nx = plant.n();
  const Eigen::Index ne = bank.eta_dim();

  RawDataset data;
  data.U0.resize(plant.m(), T);
  data.Y0.resize(plant.p(), T);
  data.E0.resize(ne, T);
  data.E1.resize(ne, T);
  data.t0 = t0;
  data.sample_dt = sample_dt;
  data.T = T;
  data.n = bank.n;
  data.m = bank.m;
  data.p = bank.p;

  const Eigen::Index rec_count = total_steps - t0_steps + 1;
  data.fine.t0 = t0;
  data.fine.dt = dt_integration;
  data.fine.u.resize(plant.m(), rec_count);
  data.fine.y.resize(plant.p(), rec_count);
  data.fine.eta.resize(ne, rec_count);
  data.fine.x.resize(nx, rec_count);

  // Joint plant + filter state, integrated on one grid so that the algebraic
  // relations between x, y, and eta hold to rounding accuracy.
  auto f = [&](double t, const Vector& z) -> Vector {
    Vector u = input.value(t);
    Vector dz(nx + ne);
    dz.head(nx) = plant.A * z.head(nx) + plant.B * u;
    dz.tail(ne) = bank.derivative(z.tail(ne), u, plant.C * z.head(nx));
    return dz;
  };

  Vector z(nx + ne);
  z.head(nx) = x0;
  z.tail(ne) = bank.eta0();

  Eigen::Index sample_idx = 0;
  for (Eigen::Index k = 0; k <= total_steps; ++k) {
    double t = dt_integration * static_cast<double>(k);
    if (k >= t0_steps) {
      Vector u = input.value(t);
      Vector y = plant.C * z.head(nx);
      const Eigen::Index rec = k - t0_steps;
      data.fine.u.col(rec) = u;
      data.fine.y.col(rec) = y;
      data.fine.eta.col(rec) = z.tail(ne);
      data.fine.x.col(rec) = z.head(nx);
      if (k <= last_sample_step && (k - t0_steps) % stride == 0) {
        data.U0.col(sample_idx) = u;
        data.Y0.col(sample_idx) = y;
        data.E0.col(sample_idx) = z.tail(ne);
        data.E1.col(sample_idx) = bank.derivative(z.tail(ne), u, y);
        ++sample_idx;
      }
    }
    if (k < total_steps) {
      z = rk4_step(f, t, z, dt_integration);
      if (!z.allFinite() || z.norm() > 1e12)
        throw NonFiniteError("collect_data: joint state diverged");
    }
  }
  return data;
}

ProjectedData project(const RawDataset& data, const FilterBank& bank, double rel_tol) {
  if (data.T < 1 || data.E0.size() == 0)
    throw ValidationError("project: empty dataset");

  RankRevealing rr = rank_reveal(data.E0, rel_tol);

  ProjectedData proj;
  proj.F1 = rr.orthonormal_rows;
  proj.Phi0 = proj.F1 * data.E0;
  proj.Phi1 = proj.F1 * data.E1;
  proj.B_F = proj.F1 * bank.input_columns();
  proj.rank_r = rr.rank;
  proj.tolerance_used = rr.tolerance_used;
  proj.min_singular_Phi0 = rr.singular_values(rr.rank - 1);
  proj.e0_singular_values = rr.singular_values;

  if (proj.rank_r % (bank.m + 2) != 0)
    throw InsufficientExcitationError(
        "project: rank " + std::to_string(proj.rank_r) + " is not divisible by m+2 = " +
        std::to_string(bank.m + 2) + "; input PE order too low or T too small");
  proj.order_estimate = static_cast<int>(proj.rank_r) / (bank.m + 2);
  if (proj.min_singular_Phi0 <= proj.tolerance_used)
    throw InsufficientExcitationError("project: Phi0 is not numerically full row rank");
  return proj;
}

Matrix reduced_dynamics(const ProjectedData& proj, const Matrix& U0) {
  return (proj.Phi1 - proj.B_F * U0) * pinv_right(proj.Phi0);
}

Matrix reduced_output(const ProjectedData& proj, const Matrix& Y0) {
  return Y0 * pinv_right(proj.Phi0);
}

RegressionRankReport regression_matrix_rank(const RawDataset& data) {
  const Eigen::Index q = data.E0.rows();
  RegressionRankReport report;
  report.rows = q * q;
  report.bound = static_cast<Eigen::Index>((data.m + 2) * data.n) *
                 static_cast<Eigen::Index>((data.m + 2) * data.n);
  if (data.T < report.bound)
    throw ValidationError("regression_matrix_rank: need T >= ((m+2)n)^2 columns");

  Matrix gamma(q * q, data.T);
  for (Eigen::Index k = 0; k < data.T; ++k) {
    Matrix outer = data.E0.col(k) * data.E0.col(k).transpose();
    gamma.col(k) = Eigen::Map<Vector>(outer.data(), outer.size());
  }
  Eigen::JacobiSVD<Matrix> svd(gamma);
  const Vector& sv = svd.singularValues();
  double tol = 1e-9 * sv(0);
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > tol) ++r;
  report.rank = r;
  return report;
}

}  // namespace ddlqr
