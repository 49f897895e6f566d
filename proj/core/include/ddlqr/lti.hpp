#pragma once

#include <utility>
#include <vector>

#include "ddlqr/matrix_ops.hpp"

namespace ddlqr {

// Continuous-time plant x' = A x + B u, y = C x. The state is treated as
// hidden everywhere except in the verification oracle.
struct LtiPlant {
  Matrix A, B, C;

  LtiPlant(Matrix A_, Matrix B_, Matrix C_);

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return C.rows(); }
};

// Quadratic cost weights: y' Q y + u' R u with Q PSD and R PD.
struct CostSpec {
  Matrix Q, R;

  CostSpec(Matrix Q_, Matrix R_);

  // State weight C' Q C of the equivalent state-cost formulation.
  Matrix Qx(const LtiPlant& plant) const {
    return plant.C.transpose() * Q * plant.C;
  }
};

struct SinusoidTerm {
  double amplitude = 0.0;
  double angular_frequency = 0.0;  // rad/s
  double phase = 0.0;              // rad; term is amplitude * sin(w t + phase)
};

struct SinusoidChannel {
  double offset = 0.0;
  std::vector<SinusoidTerm> terms;
};

// Offset-plus-sinusoids input. Admits exact derivatives of every order, so no
// signal is ever differentiated numerically.
struct SinusoidInput {
  std::vector<SinusoidChannel> channels;

  Eigen::Index m() const { return static_cast<Eigen::Index>(channels.size()); }
  Vector value(double t) const;
  Vector derivative(double t, int order) const;
};

// [u; u^(1); ...; u^(order-1)] evaluated analytically at time t.
Vector evaluate_input_derivatives(const SinusoidInput& input, double t, int order);

// Uniformly sampled state/input/output record. Outputs are computed as C x at
// each stored sample, never integrated separately.
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.0;
  Matrix states;   // n x N
  Matrix inputs;   // m x N
  Matrix outputs;  // p x N

  Eigen::Index samples() const { return states.cols(); }
  double time_at(Eigen::Index k) const { return t0 + dt * static_cast<double>(k); }
};

// Fixed-step classical RK4 with the input evaluated analytically at stage
// times. Throws NonFiniteError if the state norm passes 1e12.
Trajectory simulate(const LtiPlant& plant, const SinusoidInput& input,
                    const Vector& x0, double t_end, double dt_integration);

struct PeCheck {
  bool satisfied = false;
  double min_singular_value = 0.0;
};

// Operational persistent-excitation test: rank of the derivative sampling
// matrix built at the given sample times must be m * order.
PeCheck check_pe_order(const SinusoidInput& input, int order,
                       const std::vector<double>& sample_times);

Eigen::Index controllability_rank(const Matrix& A, const Matrix& B);
Eigen::Index observability_rank(const Matrix& A, const Matrix& C);
Eigen::Index controllability_rank(const LtiPlant& plant);
Eigen::Index observability_rank(const LtiPlant& plant);

// Eigenvalue-wise rank tests over the closed right half plane (margin -1e-9).
bool hautus_stabilizable(const Matrix& A, const Matrix& B);
bool hautus_detectable(const Matrix& A, const Matrix& C);

// One classical fourth-order Runge-Kutta step of x' = f(t, x).
template <class F>
Vector rk4_step(F&& f, double t, const Vector& x, double h) {
  Vector k1 = f(t, x);
  Vector k2 = f(t + 0.5 * h, x + (0.5 * h) * k1);
  Vector k3 = f(t + 0.5 * h, x + (0.5 * h) * k2);
  Vector k4 = f(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace ddlqr
