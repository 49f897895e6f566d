#include "ddlqr/matrix_ops.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace ddlqr {

namespace {

void require_finite(const Matrix& M, const char* who) {
  if (!M.allFinite()) throw NonFiniteError(std::string(who) + ": non-finite entries");
}

void require_square(const Matrix& M, const char* who) {
  if (M.rows() != M.cols())
    throw ValidationError(std::string(who) + ": matrix must be square");
}

void require_symmetric(const Matrix& M, const char* who, double tol = 1e-8) {
  double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > tol * scale)
    throw ValidationError(std::string(who) + ": matrix must be symmetric");
}

}  // namespace

RankRevealing rank_reveal(const Matrix& M, double rel_tol) {
  require_finite(M, "rank_reveal");
  if (M.size() == 0) throw ValidationError("rank_reveal: empty matrix");
  if (rel_tol <= 0.0 || rel_tol >= 1.0)
    throw ValidationError("rank_reveal: rel_tol must be in (0,1)");

  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU);
  const Vector& sv = svd.singularValues();
  double tol = rel_tol * sv(0);

  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > tol) ++r;

  RankRevealing out;
  out.orthonormal_rows = svd.matrixU().leftCols(r).transpose();
  out.rank = r;
  out.singular_values = sv;
  out.tolerance_used = tol;
  return out;
}

Matrix pinv_right(const Matrix& M, double rel_tol) {
  require_finite(M, "pinv_right");
  if (M.rows() > M.cols())
    throw ValidationError("pinv_right: expects a wide (r <= T) matrix");

  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= rel_tol * sv(0))
    throw RankDeficientError("pinv_right: matrix is not full row rank");
  return svd.matrixV() * sv.cwiseInverse().asDiagonal() *
         svd.matrixU().transpose();
}

Matrix solve_lyapunov(const Matrix& M, const Matrix& W) {
  require_finite(M, "solve_lyapunov");
  require_finite(W, "solve_lyapunov");
  require_square(M, "solve_lyapunov");
  require_symmetric(W, "solve_lyapunov");
  if (W.rows() != M.rows())
    throw ValidationError("solve_lyapunov: dimension mismatch");

  if (spectral_abscissa(M) >= -1e-12)
    throw NotHurwitzError("solve_lyapunov: M is not Hurwitz");

  const Eigen::Index n = M.rows();
  Matrix I = Matrix::Identity(n, n);
  // vec(M' S) = (I (x) M') vec(S), vec(S M) = (M' (x) I) vec(S).
  Matrix K = kron(I, M.transpose()) + kron(M.transpose(), I);
  Eigen::PartialPivLU<Matrix> lu(K);
  Vector w = Eigen::Map<const Vector>(W.data(), W.size());
  Vector s = lu.solve(-w);
  if (!s.allFinite() || (K * s + w).norm() > 1e-6 * std::max(1.0, w.norm()))
    throw SingularSystemError("solve_lyapunov: vectorized system is singular");

  Matrix S = Eigen::Map<Matrix>(s.data(), n, n);
  return 0.5 * (S + S.transpose());
}

Matrix solve_generalized_sylvester(const Matrix& Z, const Matrix& P0,
                                   const Matrix& W) {
  require_finite(Z, "solve_generalized_sylvester");
  require_finite(P0, "solve_generalized_sylvester");
  require_symmetric(W, "solve_generalized_sylvester");
  if (Z.rows() != P0.rows() || Z.cols() != P0.cols() ||
      W.rows() != P0.cols() || W.cols() != P0.cols())
    throw ValidationError("solve_generalized_sylvester: dimension mismatch");

  Matrix P0_pinv = pinv_right(P0);  // throws RankDeficientError if needed
  Matrix M = Z * P0_pinv;
  Matrix W_red = P0_pinv.transpose() * W * P0_pinv;
  return solve_lyapunov(M, 0.5 * (W_red + W_red.transpose()));
}

std::vector<double> eig_real_parts(const Matrix& M) {
  require_finite(M, "eig_real_parts");
  require_square(M, "eig_real_parts");
  Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
  std::vector<double> out(static_cast<std::size_t>(M.rows()));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    out[static_cast<std::size_t>(i)] = es.eigenvalues()(i).real();
  return out;
}

double spectral_abscissa(const Matrix& M) {
  auto parts = eig_real_parts(M);
  return *std::max_element(parts.begin(), parts.end());
}

bool is_hurwitz(const Matrix& M) { return spectral_abscissa(M) < -1e-9; }

Matrix matrix_exponential(const Matrix& M, double t) {
  require_finite(M, "matrix_exponential");
  require_square(M, "matrix_exponential");
  if (!std::isfinite(t)) throw NonFiniteError("matrix_exponential: t not finite");
  return (M * t).exp();
}

Matrix psd_project(const Matrix& M) {
  require_finite(M, "psd_project");
  require_square(M, "psd_project");
  require_symmetric(M, "psd_project");
  Matrix S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  if (es.eigenvalues().minCoeff() >= 0.0) return S;
  Vector clipped = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

Matrix symmetric_sqrt(const Matrix& M) {
  require_square(M, "symmetric_sqrt");
  require_symmetric(M, "symmetric_sqrt");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()));
  Vector clipped = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * clipped.cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

double spectral_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  return M.jacobiSvd().singularValues()(0);
}

Matrix companion_matrix(const Vector& coeffs) {
  const Eigen::Index n = coeffs.size();
  if (n < 1) throw ValidationError("companion_matrix: need at least one coefficient");
  Matrix A = Matrix::Zero(n, n);
  A.topRightCorner(n - 1, n - 1).setIdentity();
  A.row(n - 1) = -coeffs.transpose();
  return A;
}

Vector characteristic_coefficients(const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> coeffs{1.0};
  for (const auto& root : roots) {
    std::vector<std::complex<double>> next(coeffs.size() + 1, 0.0);
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      next[k + 1] += coeffs[k];
      next[k] -= root * coeffs[k];
    }
    coeffs = std::move(next);
  }
  const std::size_t n = roots.size();
  Vector real_coeffs(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(coeffs[k].imag()) > 1e-9)
      throw ValidationError(
          "characteristic_coefficients: complex roots must come in conjugate pairs");
    real_coeffs(static_cast<Eigen::Index>(k)) = coeffs[k].real();
  }
  return real_coeffs;
}

}  // namespace ddlqr
