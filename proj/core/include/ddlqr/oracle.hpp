#pragma once

#include <complex>
#include <vector>

#include "ddlqr/filter_pipeline.hpp"
#include "ddlqr/lti.hpp"
#include "ddlqr/rng.hpp"

namespace ddlqr {

// Model-based ground truth. Everything in this header reads the hidden plant
// matrices and is used only by tests, verification reports, and fixtures;
// the model-free pipeline never calls into it.

// Observer gain L with spectrum(A - L C) equal to the requested eigenvalues.
// Single-output pairs use Ackermann's formula on the dual pair; multi-output
// pairs use Sylvester-based assignment with a randomized right factor, placed
// in two stages when the requested spectrum intersects the spectrum of A.
Matrix place_observer(const LtiPlant& plant,
                      const std::vector<std::complex<double>>& eigenvalues,
                      Rng* rng = nullptr);

// State-feedback gain K with A - B K Hurwitz, via placement on the dual pair.
Matrix stabilizing_state_feedback(const Matrix& A, const Matrix& B, Rng* rng = nullptr);

// The linear map S with x_t = S eta_t along any co-simulated trajectory,
// assembled from the adjugate coefficients of the assigned observer
// characteristic polynomial.
struct StateParameterization {
  Matrix L;
  std::vector<Matrix> D_blocks;  // D_0 .. D_{n-1}, D_{n-1} = I
  Matrix S_u;                    // n x mn
  Matrix S_y;                    // n x pn
  Matrix S_eps;                  // n x n
  Matrix S;                      // n x (m+p+1)n
};

StateParameterization build_state_parameterization(const LtiPlant& plant,
                                                   const FilterBank& bank,
                                                   const Matrix& L,
                                                   const Vector& epsilon0);

struct AreSolution {
  Matrix P_star;
  Matrix K_star;
  int iterations = 0;
  double residual = 0.0;
};

struct KleinmanResult {
  Matrix P;
  Matrix K;
  int iterations = 0;
  double residual = 0.0;
  std::vector<Matrix> P_iterates;
  std::vector<Matrix> K_iterates;  // K_iterates[0] is the initial gain
};

// Policy iteration on Lyapunov equations for the ARE of (A, B, Qx, R),
// starting from a stabilizing gain K0. Quadratically convergent with a
// monotone nonincreasing P sequence.
KleinmanResult kleinman_iterate(const Matrix& A, const Matrix& B, const Matrix& Qx,
                                const Matrix& R, const Matrix& K0,
                                double tol = 1e-12, int max_iterations = 200,
                                bool record_iterates = false);

AreSolution kleinman_solve(const LtiPlant& plant, const CostSpec& cost, const Matrix& K0);

// ARE solution with the initial stabilizing gain chosen internally (zero when
// A is Hurwitz, pole placement otherwise).
AreSolution solve_lqr(const LtiPlant& plant, const CostSpec& cost);

// The projected isosystem the model-free solvers implicitly work on.
struct TransformedSystem {
  Matrix A_F;    // F1 (script_A + B_s^y C S) F1'
  Matrix B_F;    // F1 B_s^u
  Matrix C_F;    // C S F1'
  Matrix Q_phi;  // C_F' Q C_F
};

TransformedSystem transformed_system(const StateParameterization& param,
                                     const FilterBank& bank, const Matrix& F1,
                                     const LtiPlant& plant, const CostSpec& cost);

// Residuals of the exact relations tying the isosystem back to the plant:
// S B_s^u = B, S (script_A + B_s^y C S) = A S, and their projected forms.
struct IdentityResiduals {
  double input_map = 0.0;       // || S F1'F1 B_s^u - B ||_F
  double dynamics_map = 0.0;    // || S F1'F1 (script_A + B_s^y C S) F1' - A S F1' ||_F
  double unprojected_input = 0.0;    // || S B_s^u - B ||_F
  double unprojected_dynamics = 0.0; // || S (script_A + B_s^y C S) - A S ||_F
};

IdentityResiduals verify_parameterization_identities(const StateParameterization& param,
                                                     const FilterBank& bank,
                                                     const Matrix& F1,
                                                     const LtiPlant& plant);

struct RegularityReport {
  bool stabilizable = false;
  bool detectable = false;
};

RegularityReport verify_regularity(const FilterBank& bank,
                                   const StateParameterization& param,
                                   const Matrix& F1, const LtiPlant& plant,
                                   const CostSpec& cost);

struct TransformedOptimum {
  Matrix Sigma_star;   // ARE solution of the projected problem
  Matrix K_star_phi;   // R^{-1} B_F' Sigma_star, equals K*_x S F1'
  int iterations = 0;
};

TransformedOptimum transformed_optimum(const StateParameterization& param,
                                       const FilterBank& bank, const Matrix& F1,
                                       const LtiPlant& plant, const CostSpec& cost);

// Worst-case || x_t - S eta_t || over a recorded co-simulation.
double state_reconstruction_residual(const StateParameterization& param,
                                     const Recording& fine);

}  // namespace ddlqr
