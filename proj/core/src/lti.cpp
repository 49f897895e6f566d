#include "ddlqr/lti.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace ddlqr {

LtiPlant::LtiPlant(Matrix A_, Matrix B_, Matrix C_)
    : A(std::move(A_)), B(std::move(B_)), C(std::move(C_)) {
  if (A.rows() != A.cols()) throw ValidationError("LtiPlant: A must be square");
  if (B.rows() != A.rows()) throw ValidationError("LtiPlant: B row mismatch");
  if (C.cols() != A.rows()) throw ValidationError("LtiPlant: C column mismatch");
  if (C.rows() > C.cols()) throw ValidationError("LtiPlant: p must not exceed n");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite())
    throw NonFiniteError("LtiPlant: non-finite entries");
  Eigen::JacobiSVD<Matrix> svd(C);
  if (svd.singularValues()(C.rows() - 1) <= 1e-12 * svd.singularValues()(0))
    throw RankDeficientError("LtiPlant: C must have full row rank");
}

CostSpec::CostSpec(Matrix Q_, Matrix R_) : Q(std::move(Q_)), R(std::move(R_)) {
  if (Q.rows() != Q.cols() || R.rows() != R.cols())
    throw ValidationError("CostSpec: Q and R must be square");
  double q_scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * q_scale)
    throw ValidationError("CostSpec: Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> qes(Q);
  if (qes.eigenvalues().minCoeff() < -1e-10)
    throw ValidationError("CostSpec: Q must be positive semidefinite");
  Eigen::SelfAdjointEigenSolver<Matrix> res(0.5 * (R + R.transpose()));
  if (res.eigenvalues().minCoeff() <= 1e-10)
    throw ValidationError("CostSpec: R must be positive definite");
}

Vector SinusoidInput::value(double t) const { return derivative(t, 0); }

Vector SinusoidInput::derivative(double t, int order) const {
  Vector u = Vector::Zero(m());
  for (Eigen::Index i = 0; i < m(); ++i) {
    const SinusoidChannel& ch = channels[static_cast<std::size_t>(i)];
    double v = (order == 0) ? ch.offset : 0.0;
    for (const SinusoidTerm& term : ch.terms) {
      // d^k/dt^k A sin(w t + p) = A w^k sin(w t + p + k pi/2)
      double gain = std::pow(term.angular_frequency, order);
      v += term.amplitude * gain *
           std::sin(term.angular_frequency * t + term.phase +
                    0.5 * M_PI * static_cast<double>(order));
    }
    u(i) = v;
  }
  return u;
}

Vector evaluate_input_derivatives(const SinusoidInput& input, double t, int order) {
  if (order < 1) throw ValidationError("evaluate_input_derivatives: order >= 1");
  const Eigen::Index m = input.m();
  Vector stacked(m * order);
  for (int k = 0; k < order; ++k) stacked.segment(k * m, m) = input.derivative(t, k);
  return stacked;
}

Trajectory simulate(const LtiPlant& plant, const SinusoidInput& input,
                    const Vector& x0, double t_end, double dt_integration) {
  if (dt_integration <= 0.0) throw ValidationError("simulate: dt_integration > 0");
  if (t_end < dt_integration) throw ValidationError("simulate: t_end >= dt_integration");
  if (x0.size() != plant.n()) throw ValidationError("simulate: x0 dimension");
  if (input.m() != plant.m()) throw ValidationError("simulate: input channel count");

  const auto steps = static_cast<Eigen::Index>(std::llround(t_end / dt_integration));
  Trajectory traj;
  traj.t0 = 0.0;
  traj.dt = dt_integration;
  traj.states.resize(plant.n(), steps + 1);
  traj.inputs.resize(plant.m(), steps + 1);
  traj.outputs.resize(plant.p(), steps + 1);

  auto f = [&](double t, const Vector& x) -> Vector {
    return plant.A * x + plant.B * input.value(t);
  };

  Vector x = x0;
  for (Eigen::Index k = 0; k <= steps; ++k) {
    double t = dt_integration * static_cast<double>(k);
    traj.states.col(k) = x;
    traj.inputs.col(k) = input.value(t);
    traj.outputs.col(k) = plant.C * x;
    if (k < steps) {
      x = rk4_step(f, t, x, dt_integration);
      if (!x.allFinite() || x.norm() > 1e12)
        throw NonFiniteError("simulate: state diverged");
    }
  }
  return traj;
}

PeCheck check_pe_order(const SinusoidInput& input, int order,
                       const std::vector<double>& sample_times) {
  if (order < 1) throw ValidationError("check_pe_order: order >= 1");
  const Eigen::Index m = input.m();
  const auto count = static_cast<Eigen::Index>(sample_times.size());
  if (count < m * order)
    throw ValidationError("check_pe_order: need at least m * order sample times");

  Matrix H(m * order, count);
  for (Eigen::Index j = 0; j < count; ++j)
    H.col(j) = evaluate_input_derivatives(input, sample_times[static_cast<std::size_t>(j)], order);

  // Derivative rows grow like omega^k; equilibrate them so the rank decision
  // measures independence rather than magnitude spread.
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    double scale = H.row(i).norm();
    if (scale > 0.0) H.row(i) /= scale;
  }
  Eigen::JacobiSVD<Matrix> svd(H);
  const Vector& sv = svd.singularValues();
  double sigma_min = sv(m * order - 1);
  return {sigma_min > 1e-9 * sv(0), sigma_min};
}

namespace {

Eigen::Index numerical_rank(const Matrix& M, double rel_tol = 1e-9) {
  Eigen::JacobiSVD<Matrix> svd(M);
  const Vector& sv = svd.singularValues();
  double tol = rel_tol * sv(0);
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > tol) ++r;
  return r;
}

}  // namespace

Eigen::Index controllability_rank(const Matrix& A, const Matrix& B) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  Matrix R(n, n * m);
  Matrix block = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    R.middleCols(k * m, m) = block;
    block = A * block;
  }
  return numerical_rank(R);
}

Eigen::Index observability_rank(const Matrix& A, const Matrix& C) {
  const Eigen::Index n = A.rows();
  const Eigen::Index p = C.rows();
  Matrix O(n * p, n);
  Matrix block = C;
  for (Eigen::Index k = 0; k < n; ++k) {
    O.middleRows(k * p, p) = block;
    block = block * A;
  }
  return numerical_rank(O);
}

Eigen::Index controllability_rank(const LtiPlant& plant) {
  return controllability_rank(plant.A, plant.B);
}

Eigen::Index observability_rank(const LtiPlant& plant) {
  return observability_rank(plant.A, plant.C);
}

namespace {

bool hautus_full_rank(const Eigen::MatrixXcd& M, Eigen::Index need) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
  const Vector& sv = svd.singularValues();
  return sv(need - 1) > 1e-8 * sv(0);
}

}  // namespace

bool hautus_stabilizable(const Matrix& A, const Matrix& B) {
  const Eigen::Index n = A.rows();
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::complex<double> lambda = es.eigenvalues()(i);
    if (lambda.real() < -1e-9) continue;
    Eigen::MatrixXcd M(n, n + B.cols());
    M.leftCols(n) = lambda * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
    M.rightCols(B.cols()) = B.cast<std::complex<double>>();
    if (!hautus_full_rank(M, n)) return false;
  }
  return true;
}

bool hautus_detectable(const Matrix& A, const Matrix& C) {
  const Eigen::Index n = A.rows();
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::complex<double> lambda = es.eigenvalues()(i);
    if (lambda.real() < -1e-9) continue;
    Eigen::MatrixXcd M(n + C.rows(), n);
    M.topRows(n) = lambda * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
    M.bottomRows(C.rows()) = C.cast<std::complex<double>>();
    if (!hautus_full_rank(M, n)) return false;
  }
  return true;
}

}  // namespace ddlqr
