#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "ddlqr/errors.hpp"

namespace ddlqr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Result of an SVD-based rank decision. `orthonormal_rows` is r x rows(M) with
// orthonormal rows spanning the column space of M, so orthonormal_rows * M
// keeps exactly the informative part of M and is full row rank.
struct RankRevealing {
  Matrix orthonormal_rows;
  Eigen::Index rank = 0;
  Vector singular_values;
  double tolerance_used = 0.0;
};

RankRevealing rank_reveal(const Matrix& M, double rel_tol = 1e-9);

// Right pseudo-inverse of a full-row-rank M (M * pinv_right(M) = I).
Matrix pinv_right(const Matrix& M, double rel_tol = 1e-9);

// Unique symmetric solution of M' S + S M + W = 0 for Hurwitz M, by dense
// solve of the Kronecker-vectorized system. Desk scale only (n <= ~32).
Matrix solve_lyapunov(const Matrix& M, const Matrix& W);

// Symmetric Sigma with Z' Sigma P0 + P0' Sigma Z + W = 0, P0 full row rank.
// Reduced to a standard Lyapunov equation through the right pseudo-inverse of
// P0, which is equivalent to the original equation whenever it is consistent.
Matrix solve_generalized_sylvester(const Matrix& Z, const Matrix& P0,
                                   const Matrix& W);

std::vector<double> eig_real_parts(const Matrix& M);
double spectral_abscissa(const Matrix& M);

// Strict stability test with margin: max real part < -1e-9.
bool is_hurwitz(const Matrix& M);

// exp(M t) by scaling-and-squaring with Pade approximation.
Matrix matrix_exponential(const Matrix& M, double t = 1.0);

// Symmetrize, then clip negative eigenvalues at zero.
Matrix psd_project(const Matrix& M);

// Symmetric PSD square root.
Matrix symmetric_sqrt(const Matrix& M);

Matrix kron(const Matrix& A, const Matrix& B);

double spectral_norm(const Matrix& M);

// Bottom-row companion matrix of s^n + a_{n-1} s^{n-1} + ... + a_0, with
// coeffs = [a_0, ..., a_{n-1}].
Matrix companion_matrix(const Vector& coeffs);

// Coefficients [a_0 .. a_{n-1}] of the monic polynomial with the given roots.
// Complex roots must come in conjugate pairs so the coefficients are real.
Vector characteristic_coefficients(const std::vector<std::complex<double>>& roots);

}  // namespace ddlqr
