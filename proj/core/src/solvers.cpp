#include "ddlqr/solvers.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace ddlqr {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "Converged";
    case Termination::MaxIterations: return "MaxIterations";
    case Termination::Diverged: return "Diverged";
    case Termination::DestabilizedGain: return "DestabilizedGain";
  }
  return "Unknown";
}

namespace {

double symmetric_spectral_norm(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

SolveReport policy_iteration(const ProjectedData& data, const Matrix& U0,
                             const Matrix& Y0, const CostSpec& cost,
                             const PiConfig& cfg) {
  const Eigen::Index r = data.rank_r;
  const Eigen::Index m = data.B_F.cols();
  if (U0.cols() != data.Phi0.cols() || Y0.cols() != data.Phi0.cols())
    throw ValidationError("policy_iteration: sample count mismatch");

  Matrix K = cfg.K0.size() == 0 ? Matrix::Zero(m, r) : cfg.K0;
  if (K.rows() != m || K.cols() != r)
    throw ValidationError("policy_iteration: K0 must be m x r");
  if (cfg.epsilon <= 0.0) throw ValidationError("policy_iteration: epsilon > 0");

  Matrix Phi0_pinv = pinv_right(data.Phi0);
  Matrix W_hat = (data.Phi1 - data.B_F * U0) * Phi0_pinv;
  Matrix C_hat = Y0 * Phi0_pinv;
  Matrix Q_hat = C_hat.transpose() * cost.Q * C_hat;
  Q_hat = 0.5 * (Q_hat + Q_hat.transpose());

  Eigen::LLT<Matrix> R_llt(cost.R);
  if (R_llt.info() != Eigen::Success)
    throw ValidationError("policy_iteration: R must be positive definite");

  SolveReport report;
  report.method = "PI";
  report.final_gain = K;
  report.final_sigma = Matrix::Zero(r, r);
  if (cfg.record_iterates) report.gain_iterates.push_back(K);

  Matrix Sigma_prev;
  for (int i = 0; i < cfg.max_iterations; ++i) {
    Matrix closed_loop = W_hat - data.B_F * K;
    double abscissa = spectral_abscissa(closed_loop);
    if (abscissa >= -1e-9) {
      report.termination = Termination::DestabilizedGain;
      return report;
    }

    Matrix Sigma;
    if (cfg.use_reduced) {
      Matrix W = Q_hat + K.transpose() * cost.R * K;
      Sigma = solve_lyapunov(closed_loop, 0.5 * (W + W.transpose()));
    } else {
      Matrix Z = data.Phi1 - data.B_F * (K * data.Phi0 + U0);
      Matrix W = Y0.transpose() * cost.Q * Y0 +
                 data.Phi0.transpose() * K.transpose() * cost.R * K * data.Phi0;
      Sigma = solve_generalized_sylvester(Z, data.Phi0, 0.5 * (W + W.transpose()));
    }

    Matrix K_next = R_llt.solve(data.B_F.transpose() * Sigma);
    double gain_delta = spectral_norm(K_next - K);
    double sigma_delta =
        Sigma_prev.size() == 0 ? 0.0 : symmetric_spectral_norm(Sigma - Sigma_prev);
    report.per_iteration.push_back({gain_delta, sigma_delta, abscissa});
    report.iterations_run = i + 1;

    K = K_next;
    Sigma_prev = Sigma;
    report.final_gain = K;
    report.final_sigma = Sigma;
    if (cfg.record_iterates) {
      report.gain_iterates.push_back(K);
      report.sigma_iterates.push_back(Sigma);
    }

    if (gain_delta <= cfg.epsilon) {
      report.termination = Termination::Converged;
      return report;
    }
  }
  report.termination = Termination::MaxIterations;
  return report;
}

SolveReport value_iteration(const ProjectedData& data, const Matrix& U0,
                            const Matrix& Y0, const CostSpec& cost,
                            const ViConfig& cfg) {
  const Eigen::Index r = data.rank_r;
  if (U0.cols() != data.Phi0.cols() || Y0.cols() != data.Phi0.cols())
    throw ValidationError("value_iteration: sample count mismatch");
  if (cfg.epsilon <= 0.0 || cfg.step_numerator <= 0.0 || cfg.step_offset <= 0.0)
    throw ValidationError("value_iteration: step schedule parameters must be positive");

  Matrix Sigma0 = cfg.Sigma0.size() == 0 ? Matrix::Identity(r, r) : cfg.Sigma0;
  if (Sigma0.rows() != r || Sigma0.cols() != r)
    throw ValidationError("value_iteration: Sigma0 must be r x r");
  Sigma0 = psd_project(Sigma0);

  Matrix Phi0_pinv = pinv_right(data.Phi0);
  Matrix W_hat = (data.Phi1 - data.B_F * U0) * Phi0_pinv;
  Matrix C_hat = Y0 * Phi0_pinv;
  Matrix Q_hat = C_hat.transpose() * cost.Q * C_hat;
  Q_hat = 0.5 * (Q_hat + Q_hat.transpose());

  Eigen::LLT<Matrix> R_llt(cost.R);
  if (R_llt.info() != Eigen::Success)
    throw ValidationError("value_iteration: R must be positive definite");
  Matrix BRB = data.B_F * R_llt.solve(data.B_F.transpose());

  SolveReport report;
  report.method = "VI";

  Matrix Sigma = Sigma0;
  int j = 0;
  if (cfg.record_iterates) report.sigma_iterates.push_back(Sigma);

  for (int i = 0; i < cfg.max_iterations; ++i) {
    double delta_i = cfg.step_numerator / (static_cast<double>(i) + cfg.step_offset);

    Matrix Omega;
    if (cfg.use_reduced) {
      Omega = W_hat.transpose() * Sigma + Sigma * W_hat + Q_hat;
    } else {
      Matrix D = data.Phi1 - data.B_F * U0;
      Matrix rhs = D.transpose() * Sigma * data.Phi0 +
                   data.Phi0.transpose() * Sigma * D + Y0.transpose() * cost.Q * Y0;
      Omega = Phi0_pinv.transpose() * rhs * Phi0_pinv;
    }
    Omega = 0.5 * (Omega + Omega.transpose());

    Matrix Sigma_next = Sigma + delta_i * (Omega - Sigma * BRB * Sigma);
    if (!Sigma_next.allFinite())
      throw NonFiniteError("value_iteration: iterate is not finite");

    bool reset = false;
    if (symmetric_spectral_norm(Sigma_next) >= cfg.set_growth * static_cast<double>(j + 1)) {
      Sigma_next = Sigma0;
      ++j;
      ++report.resets;
      reset = true;
      if (report.resets > 50) {
        report.termination = Termination::Diverged;
        report.iterations_run = i + 1;
        report.final_sigma = Sigma_next;
        report.final_gain = R_llt.solve(data.B_F.transpose() * Sigma_next);
        return report;
      }
    }

    double sigma_delta = symmetric_spectral_norm(Sigma_next - Sigma);
    Matrix K_next = R_llt.solve(data.B_F.transpose() * Sigma_next);
    double gain_delta =
        report.final_gain.size() == 0 ? 0.0 : spectral_norm(K_next - report.final_gain);
    report.per_iteration.push_back({gain_delta, sigma_delta, std::nullopt});
    report.iterations_run = i + 1;

    Sigma = Sigma_next;
    report.final_sigma = Sigma;
    report.final_gain = K_next;
    if (cfg.record_iterates) {
      report.sigma_iterates.push_back(Sigma);
      report.gain_iterates.push_back(K_next);
    }

    if (!reset && sigma_delta / delta_i <= cfg.epsilon) {
      report.termination = Termination::Converged;
      return report;
    }
  }
  report.termination = Termination::MaxIterations;
  return report;
}

double evaluate_controller(const LtiPlant& plant, const FilterBank& bank,
                           const Matrix& F1, const Matrix& K, const CostSpec& cost,
                           const Vector& x0, double horizon, double dt_integration) {
  if (horizon <= 0.0 || dt_integration <= 0.0)
    throw ValidationError("evaluate_controller: positive horizon and step required");
  if (K.rows() != plant.m() || K.cols() != F1.rows())
    throw ValidationError("evaluate_controller: gain shape mismatch");

  const Eigen::Index nx = plant.n();
  const Eigen::Index ne = bank.eta_dim();
  Matrix KF = K * F1;

  auto f = [&](double /*t*/, const Vector& z) -> Vector {
    Vector u = -KF * z.tail(ne);
    Vector dz(nx + ne);
    dz.head(nx) = plant.A * z.head(nx) + plant.B * u;
    dz.tail(ne) = bank.derivative(z.tail(ne), u, plant.C * z.head(nx));
    return dz;
  };

  auto integrand = [&](const Vector& z) -> double {
    Vector u = -KF * z.tail(ne);
    Vector y = plant.C * z.head(nx);
    return y.dot(cost.Q * y) + u.dot(cost.R * u);
  };

  Vector z(nx + ne);
  z.head(nx) = x0;
  z.tail(ne) = bank.eta0();

  const auto steps = static_cast<Eigen::Index>(std::llround(horizon / dt_integration));
  double cost_sum = 0.0;
  double g_prev = integrand(z);
  for (Eigen::Index k = 0; k < steps; ++k) {
    double t = dt_integration * static_cast<double>(k);
    z = rk4_step(f, t, z, dt_integration);
    if (!z.allFinite() || z.norm() > 1e9)
      throw UnstableClosedLoopError("evaluate_controller: closed loop diverged");
    double g = integrand(z);
    cost_sum += 0.5 * dt_integration * (g_prev + g);
    g_prev = g;
  }
  return cost_sum;
}

}  // namespace ddlqr
