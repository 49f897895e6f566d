#include "ddlqr/oracle.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace ddlqr {

namespace {

std::vector<std::complex<double>> sorted_spectrum(const Matrix& M) {
  Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
  std::vector<std::complex<double>> out(static_cast<std::size_t>(M.rows()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) out[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return out;
}

double spectrum_distance(const Matrix& M, std::vector<std::complex<double>> targets) {
  auto actual = sorted_spectrum(M);
  std::sort(targets.begin(), targets.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  double worst = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i)
    worst = std::max(worst, std::abs(actual[i] - targets[i]));
  return worst;
}

bool spectra_overlap(const Matrix& A, const std::vector<std::complex<double>>& targets) {
  auto spec = sorted_spectrum(A);
  for (const auto& lambda : spec)
    for (const auto& mu : targets)
      if (std::abs(lambda - mu) < 1e-6 * (1.0 + std::abs(mu))) return true;
  return false;
}

// Real block-diagonal form of a conjugation-closed eigenvalue list.
Matrix real_block_diagonal(std::vector<std::complex<double>> eigenvalues) {
  const auto n = static_cast<Eigen::Index>(eigenvalues.size());
  std::sort(eigenvalues.begin(), eigenvalues.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  Matrix L = Matrix::Zero(n, n);
  Eigen::Index k = 0;
  while (k < n) {
    const auto& lambda = eigenvalues[static_cast<std::size_t>(k)];
    if (std::abs(lambda.imag()) < 1e-12) {
      L(k, k) = lambda.real();
      ++k;
    } else {
      if (k + 1 >= n)
        throw ValidationError("place_observer: complex eigenvalues must come in conjugate pairs");
      double sigma = lambda.real(), omega = std::abs(lambda.imag());
      L.block(k, k, 2, 2) << sigma, omega, -omega, sigma;
      k += 2;
    }
  }
  return L;
}

Matrix ackermann_observer(const Matrix& A, const Matrix& C,
                          const std::vector<std::complex<double>>& targets) {
  const Eigen::Index n = A.rows();
  Matrix O(n, n);
  Matrix block = C;
  for (Eigen::Index k = 0; k < n; ++k) {
    O.row(k) = block;
    block = block * A;
  }
  Eigen::FullPivLU<Matrix> lu(O);
  if (!lu.isInvertible())
    throw NotObservableError("place_observer: (A, C) is not observable");

  Vector a = characteristic_coefficients(targets);
  Matrix qA = Matrix::Identity(n, n) * a(0);
  Matrix power = Matrix::Identity(n, n);
  for (Eigen::Index k = 1; k < n; ++k) {
    power = power * A;
    qA += a(k) * power;
  }
  qA += power * A;  // leading A^n term

  Vector e_n = Vector::Zero(n);
  e_n(n - 1) = 1.0;
  return qA * lu.solve(e_n);
}

// Sylvester-based assignment on the dual pair; requires the requested
// spectrum to be disjoint from spec(A).
Matrix sylvester_observer(const Matrix& A, const Matrix& C,
                          const std::vector<std::complex<double>>& targets, Rng& rng) {
  const Eigen::Index n = A.rows();
  const Eigen::Index p = C.rows();
  Matrix Lambda = real_block_diagonal(targets);
  Matrix I = Matrix::Identity(n, n);
  // A' X - X Lambda = C' G, unique for disjoint spectra.
  Matrix lhs = kron(I, A.transpose()) - kron(Lambda.transpose(), I);
  Eigen::PartialPivLU<Matrix> lu(lhs);

  for (int attempt = 0; attempt < 10; ++attempt) {
    Matrix G = rng.gaussian_matrix(static_cast<int>(p), static_cast<int>(n));
    Matrix rhs = C.transpose() * G;
    Vector x = lu.solve(Eigen::Map<Vector>(rhs.data(), rhs.size()));
    if (!x.allFinite()) continue;
    Matrix X = Eigen::Map<Matrix>(x.data(), n, n);
    Eigen::FullPivLU<Matrix> xlu(X);
    if (!xlu.isInvertible()) continue;
    Matrix L = xlu.transpose().solve(G.transpose());
    if (spectrum_distance(A - L * C, targets) < 1e-6) return L;
  }
  throw PlacementFailedError("place_observer: Sylvester assignment failed after 10 attempts");
}

Matrix place_gain(const Matrix& A, const Matrix& C,
                  const std::vector<std::complex<double>>& targets, Rng& rng) {
  if (C.rows() == 1) return ackermann_observer(A, C, targets);

  {
    // Observability gate, shared by both placement routes.
    const Eigen::Index n = A.rows();
    Matrix O(n * C.rows(), n);
    Matrix block = C;
    for (Eigen::Index k = 0; k < n; ++k) {
      O.middleRows(k * C.rows(), C.rows()) = block;
      block = block * A;
    }
    Eigen::JacobiSVD<Matrix> svd(O);
    if (svd.singularValues()(n - 1) <= 1e-10 * svd.singularValues()(0))
      throw NotObservableError("place_observer: (A, C) is not observable");
  }

  if (!spectra_overlap(A, targets)) return sylvester_observer(A, C, targets, rng);

  // Requested spectrum touches spec(A): detour through an intermediate
  // spectrum disjoint from both, then move to the targets.
  double reach = 0.0;
  for (const auto& mu : targets) reach = std::max(reach, std::abs(mu));
  for (double re : eig_real_parts(A)) reach = std::max(reach, std::abs(re));
  std::vector<std::complex<double>> mid;
  for (Eigen::Index k = 0; k < A.rows(); ++k)
    mid.emplace_back(-(reach + 2.0 + 0.5 * static_cast<double>(k)), 0.0);

  Matrix L1 = sylvester_observer(A, C, mid, rng);
  Matrix L2 = sylvester_observer(A - L1 * C, C, targets, rng);
  return L1 + L2;
}

}  // namespace

Matrix place_observer(const LtiPlant& plant,
                      const std::vector<std::complex<double>>& eigenvalues, Rng* rng) {
  if (static_cast<Eigen::Index>(eigenvalues.size()) != plant.n())
    throw ValidationError("place_observer: need n eigenvalues");
  for (const auto& lambda : eigenvalues)
    if (lambda.real() >= 0.0)
      throw UnstableSpectrumError("place_observer: requested spectrum must be stable");
  Rng local(0x5EEDu);
  Matrix L = place_gain(plant.A, plant.C, eigenvalues, rng ? *rng : local);
  if (spectrum_distance(plant.A - L * plant.C, eigenvalues) > 1e-6)
    throw PlacementFailedError("place_observer: spectrum mismatch after placement");
  return L;
}

Matrix stabilizing_state_feedback(const Matrix& A, const Matrix& B, Rng* rng) {
  double rho = std::max(0.0, spectral_abscissa(A));
  std::vector<std::complex<double>> targets;
  for (Eigen::Index k = 0; k < A.rows(); ++k)
    targets.emplace_back(-(rho + 1.0 + 0.5 * static_cast<double>(k)), 0.0);
  Rng local(0xFEEDu);
  return place_gain(A.transpose(), B.transpose(), targets, rng ? *rng : local).transpose();
}

namespace {

// [D_0 v, D_1 v, ..., D_{n-1} v]
Matrix apply_adjugate_blocks(const std::vector<Matrix>& D, const Vector& v) {
  const auto n = static_cast<Eigen::Index>(D.size());
  Matrix out(v.size(), n);
  for (Eigen::Index j = 0; j < n; ++j) out.col(j) = D[static_cast<std::size_t>(j)] * v;
  return out;
}

std::vector<Matrix> adjugate_blocks(const Matrix& M, const Vector& coeffs) {
  const Eigen::Index n = M.rows();
  std::vector<Matrix> D(static_cast<std::size_t>(n));
  D[static_cast<std::size_t>(n - 1)] = Matrix::Identity(n, n);
  for (Eigen::Index i = n - 2; i >= 0; --i)
    D[static_cast<std::size_t>(i)] =
        M * D[static_cast<std::size_t>(i + 1)] + coeffs(i + 1) * Matrix::Identity(n, n);
  // Closing relation of the adjugate recursion.
  double scale = std::max(1.0, coeffs.cwiseAbs().maxCoeff());
  if ((M * D[0] + coeffs(0) * Matrix::Identity(n, n)).norm() > 1e-6 * scale)
    throw NumericalError("adjugate_blocks: recursion failed to close");
  return D;
}

}  // namespace

StateParameterization build_state_parameterization(const LtiPlant& plant,
                                                   const FilterBank& bank,
                                                   const Matrix& L,
                                                   const Vector& epsilon0) {
  if (epsilon0.size() != plant.n())
    throw ValidationError("build_state_parameterization: epsilon0 dimension");
  Matrix M = plant.A - L * plant.C;
  if (spectrum_distance(M, bank.observer_eigenvalues) > 1e-6)
    throw ValidationError(
        "build_state_parameterization: spectrum of A - L C does not match the filter bank");

  const Eigen::Index n = plant.n();
  StateParameterization param;
  param.L = L;
  param.D_blocks = adjugate_blocks(M, bank.char_coeffs);

  param.S_u.resize(n, n * plant.m());
  for (Eigen::Index i = 0; i < plant.m(); ++i)
    param.S_u.middleCols(i * n, n) = apply_adjugate_blocks(param.D_blocks, plant.B.col(i));
  param.S_y.resize(n, n * plant.p());
  for (Eigen::Index j = 0; j < plant.p(); ++j)
    param.S_y.middleCols(j * n, n) = apply_adjugate_blocks(param.D_blocks, L.col(j));

  std::vector<Matrix> D_eps = adjugate_blocks(bank.A_eps, bank.char_coeffs);
  Matrix S_eps_x = apply_adjugate_blocks(param.D_blocks, epsilon0);
  Matrix S_eps_eta = apply_adjugate_blocks(D_eps, bank.eta0_eps);
  Eigen::FullPivLU<Matrix> lu(S_eps_eta);
  if (!lu.isInvertible())
    throw DegenerateEta0Error(
        "build_state_parameterization: error-filter Krylov matrix is singular; resample eta0_eps");
  param.S_eps = S_eps_x * lu.inverse();

  param.S.resize(n, bank.eta_dim());
  param.S << param.S_u, param.S_y, param.S_eps;
  return param;
}

KleinmanResult kleinman_iterate(const Matrix& A, const Matrix& B, const Matrix& Qx,
                                const Matrix& R, const Matrix& K0, double tol,
                                int max_iterations, bool record_iterates) {
  if (!is_hurwitz(A - B * K0))
    throw NotStabilizingError("kleinman_iterate: initial gain is not stabilizing");

  Eigen::LLT<Matrix> R_llt(R);
  if (R_llt.info() != Eigen::Success)
    throw ValidationError("kleinman_iterate: R must be positive definite");

  KleinmanResult result;
  result.K = K0;
  if (record_iterates) result.K_iterates.push_back(K0);

  for (int i = 0; i < max_iterations; ++i) {
    Matrix W = Qx + result.K.transpose() * R * result.K;
    result.P = solve_lyapunov(A - B * result.K, 0.5 * (W + W.transpose()));
    Matrix K_next = R_llt.solve(B.transpose() * result.P);
    double delta = spectral_norm(K_next - result.K);
    result.K = K_next;
    result.iterations = i + 1;
    if (record_iterates) {
      result.P_iterates.push_back(result.P);
      result.K_iterates.push_back(result.K);
    }
    if (delta <= tol) {
      Matrix res = A.transpose() * result.P + result.P * A + Qx -
                   result.P * B * R_llt.solve(B.transpose() * result.P);
      result.residual = res.norm();
      return result;
    }
  }
  throw NoConvergenceError("kleinman_iterate: no convergence within iteration limit");
}

AreSolution kleinman_solve(const LtiPlant& plant, const CostSpec& cost, const Matrix& K0) {
  KleinmanResult r = kleinman_iterate(plant.A, plant.B, cost.Qx(plant), cost.R, K0);
  return {r.P, r.K, r.iterations, r.residual};
}

AreSolution solve_lqr(const LtiPlant& plant, const CostSpec& cost) {
  Matrix K0 = is_hurwitz(plant.A) ? Matrix::Zero(plant.m(), plant.n())
                                  : stabilizing_state_feedback(plant.A, plant.B);
  return kleinman_solve(plant, cost, K0);
}

TransformedSystem transformed_system(const StateParameterization& param,
                                     const FilterBank& bank, const Matrix& F1,
                                     const LtiPlant& plant, const CostSpec& cost) {
  TransformedSystem sys;
  Matrix iso = bank.script_A + bank.output_columns() * (plant.C * param.S);
  sys.A_F = F1 * iso * F1.transpose();
  sys.B_F = F1 * bank.input_columns();
  sys.C_F = plant.C * param.S * F1.transpose();
  Matrix Q_phi = sys.C_F.transpose() * cost.Q * sys.C_F;
  sys.Q_phi = 0.5 * (Q_phi + Q_phi.transpose());
  return sys;
}

IdentityResiduals verify_parameterization_identities(const StateParameterization& param,
                                                     const FilterBank& bank,
                                                     const Matrix& F1,
                                                     const LtiPlant& plant) {
  IdentityResiduals out;
  Matrix iso = bank.script_A + bank.output_columns() * (plant.C * param.S);
  Matrix SF = param.S * F1.transpose();
  out.input_map = (SF * F1 * bank.input_columns() - plant.B).norm();
  out.dynamics_map = (SF * F1 * iso * F1.transpose() - plant.A * SF).norm();
  out.unprojected_input = (param.S * bank.input_columns() - plant.B).norm();
  out.unprojected_dynamics = (param.S * iso - plant.A * param.S).norm();
  return out;
}

RegularityReport verify_regularity(const FilterBank& bank,
                                   const StateParameterization& param,
                                   const Matrix& F1, const LtiPlant& plant,
                                   const CostSpec& cost) {
  TransformedSystem sys = transformed_system(param, bank, F1, plant, cost);
  RegularityReport report;
  report.stabilizable = hautus_stabilizable(sys.A_F, sys.B_F);
  report.detectable = hautus_detectable(sys.A_F, symmetric_sqrt(cost.Q) * sys.C_F);
  return report;
}

TransformedOptimum transformed_optimum(const StateParameterization& param,
                                       const FilterBank& bank, const Matrix& F1,
                                       const LtiPlant& plant, const CostSpec& cost) {
  TransformedSystem sys = transformed_system(param, bank, F1, plant, cost);
  Matrix K0;
  if (is_hurwitz(sys.A_F)) {
    K0 = Matrix::Zero(plant.m(), sys.A_F.rows());
  } else {
    // Pull the optimal state-feedback gain back to projected coordinates.
    AreSolution are = solve_lqr(plant, cost);
    K0 = are.K_star * param.S * F1.transpose();
  }
  KleinmanResult r = kleinman_iterate(sys.A_F, sys.B_F, sys.Q_phi, cost.R, K0);
  return {r.P, r.K, r.iterations};
}

double state_reconstruction_residual(const StateParameterization& param,
                                     const Recording& fine) {
  if (fine.empty() || fine.x.size() == 0)
    throw ValidationError("state_reconstruction_residual: recording has no state data");
  double worst = 0.0;
  for (Eigen::Index k = 0; k < fine.samples(); ++k)
    worst = std::max(worst, (fine.x.col(k) - param.S * fine.eta.col(k)).norm());
  return worst;
}

}  // namespace ddlqr
