#include "ddlqr/trajectory_generation.hpp"

#include <cmath>

namespace ddlqr {

namespace {

Eigen::Index grid_index(const Recording& fine, double tau, const char* who) {
  double rel = (tau - fine.t0) / fine.dt;
  auto idx = static_cast<Eigen::Index>(std::llround(rel));
  if (std::abs(rel - static_cast<double>(idx)) > 1e-6)
    throw ValidationError(std::string(who) + ": time is not on the recording grid");
  if (idx < 0 || idx >= fine.samples())
    throw InsufficientTailError(std::string(who) + ": time outside the recording");
  return idx;
}

// Columns of a signal window [s(tau), s(tau + dt), ..., s(tau + (T-1) dt)].
Matrix gather(const Matrix& grid, Eigen::Index idx, Eigen::Index stride, Eigen::Index T) {
  Matrix out(grid.rows(), T);
  for (Eigen::Index k = 0; k < T; ++k) out.col(k) = grid.col(idx + k * stride);
  return out;
}

// Orthonormal null-space basis of the sliding Phi0 window, aligned to the
// previous basis so the coefficient parameterization stays continuous.
class KernelTracker {
 public:
  KernelTracker(Eigen::Index T, Eigen::Index r) : kernel_dim_(T - r), rank_(r) {}

  const Matrix& at(const Matrix& phi_window, Eigen::Index idx) {
    if (idx == last_idx_ && basis_.size() != 0) return basis_;
    Eigen::JacobiSVD<Matrix> svd(phi_window, Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    if (sv(rank_ - 1) <= 1e-9 * sv(0))
      throw RankDeficientError("trajectory generation: sliding Phi0 window lost row rank");
    Matrix kernel = svd.matrixV().rightCols(kernel_dim_);
    if (basis_.size() == 0) {
      basis_ = kernel;
    } else {
      // Closest orthonormal rotation of the new kernel onto the old basis.
      Eigen::JacobiSVD<Matrix> polar(kernel.transpose() * basis_,
                                     Eigen::ComputeFullU | Eigen::ComputeFullV);
      basis_ = kernel * (polar.matrixU() * polar.matrixV().transpose());
    }
    last_idx_ = idx;
    return basis_;
  }

 private:
  Eigen::Index kernel_dim_;
  Eigen::Index rank_;
  Eigen::Index last_idx_ = -1;
  Matrix basis_;
};

void check_tail(const TrajGenData& data, Eigen::Index last_node_idx, const char* who) {
  if (last_node_idx + (data.T - 1) * data.stride >= data.fine.samples())
    throw InsufficientTailError(std::string(who) +
                                ": recording tail too short for the requested horizon");
}

}  // namespace

TrajGenData make_trajgen_data(const RawDataset& data, const ProjectedData& proj,
                              const SinusoidInput& recorded_input, double anchor_time) {
  if (data.fine.empty())
    throw ValidationError("make_trajgen_data: dataset carries no fine recording");

  TrajGenData out;
  out.anchor_time = anchor_time;
  out.sample_dt = data.sample_dt;
  out.T = data.T;
  out.rank_r = proj.rank_r;
  out.F1 = proj.F1;
  out.fine = data.fine;
  out.recorded_input = recorded_input;
  out.anchor_index = grid_index(data.fine, anchor_time, "make_trajgen_data");

  double stride_real = data.sample_dt / data.fine.dt;
  out.stride = static_cast<Eigen::Index>(std::llround(stride_real));
  if (std::abs(stride_real - static_cast<double>(out.stride)) > 1e-9 || out.stride < 1)
    throw ValidationError("make_trajgen_data: sample_dt must be a multiple of the recording step");
  if (out.anchor_index + (out.T - 1) * out.stride >= data.fine.samples())
    throw InsufficientTailError("make_trajgen_data: recording shorter than one window");

  out.Phi0 = proj.F1 * gather(data.fine.eta, out.anchor_index, out.stride, out.T);
  out.U_hankel = gather(data.fine.u, out.anchor_index, out.stride, out.T);
  out.Y_hankel = gather(data.fine.y, out.anchor_index, out.stride, out.T);

  // Record the strongest PE order established for the exploration input; the
  // free-weighting mode needs 2n, the prescribed-input mode nominally 2n+1.
  const int n = data.n;
  std::vector<double> probe;
  const double span = data.sample_dt * static_cast<double>(data.T);
  const int probe_count = 3 * data.m * (2 * n + 1);
  for (int i = 0; i < probe_count; ++i)
    probe.push_back(anchor_time + span * (static_cast<double>(i) + 0.5) /
                                      static_cast<double>(probe_count));
  out.pe_order_verified = 0;
  for (int order = 1; order <= 2 * n + 1; ++order) {
    if (check_pe_order(recorded_input, order, probe).satisfied)
      out.pe_order_verified = order;
    else
      break;
  }
  return out;
}

GeneratedTrajectory generate_trajectory_a(const TrajGenData& data, const Vector& alpha0,
                                          const std::function<Vector(double)>& nullspace_coeffs,
                                          double t_end) {
  if (data.T <= data.rank_r)
    throw ValidationError("generate_trajectory_a: need T > rank for a nontrivial null space");
  if (alpha0.size() != data.T)
    throw ValidationError("generate_trajectory_a: alpha0 must have T entries");

  const double h = 2.0 * data.fine.dt;
  const auto steps = static_cast<Eigen::Index>(std::llround(t_end / h));
  const Eigen::Index base = data.anchor_index;
  check_tail(data, base + 2 * steps, "generate_trajectory_a");

  const Eigen::Index kernel_dim = data.T - data.rank_r;
  KernelTracker tracker(data.T, data.rank_r);
  auto coeff = [&](double tau) -> Vector {
    Vector c = nullspace_coeffs(tau);
    if (c.size() != kernel_dim)
      throw ValidationError("generate_trajectory_a: coefficient dimension must be T - rank");
    return c;
  };
  auto alpha_rate = [&](Eigen::Index idx, double tau) -> Vector {
    const Matrix& N = tracker.at(data.F1 * gather(data.fine.eta, idx, data.stride, data.T), idx);
    return N * coeff(tau);
  };

  GeneratedTrajectory gen;
  gen.t0 = data.anchor_time;
  gen.dt = h;
  gen.alpha.resize(data.T, steps + 1);
  gen.alpha_dot.resize(data.T, steps + 1);
  gen.u_bar.resize(data.fine.u.rows(), steps + 1);
  gen.u_bar_mid.resize(data.fine.u.rows(), std::max<Eigen::Index>(steps, 0));
  gen.y_bar.resize(data.fine.y.rows(), steps + 1);

  Vector alpha = alpha0;
  for (Eigen::Index k = 0; k <= steps; ++k) {
    const Eigen::Index idx = base + 2 * k;
    const double tau = data.anchor_time + h * static_cast<double>(k);
    Vector rate = alpha_rate(idx, tau);
    gen.alpha.col(k) = alpha;
    gen.alpha_dot.col(k) = rate;
    gen.u_bar.col(k) = gather(data.fine.u, idx, data.stride, data.T) * alpha;
    gen.y_bar.col(k) = gather(data.fine.y, idx, data.stride, data.T) * alpha;
    if (k == steps) break;

    // alpha' does not depend on alpha, so the RK4 combination is Simpson's rule.
    Vector k1 = rate;
    Vector k_mid = alpha_rate(idx + 1, tau + 0.5 * h);
    Vector k4 = alpha_rate(idx + 2, tau + h);
    Vector alpha_mid = alpha + (0.5 * h) * k1;
    gen.u_bar_mid.col(k) = gather(data.fine.u, idx + 1, data.stride, data.T) * alpha_mid;
    alpha += (h / 6.0) * (k1 + 4.0 * k_mid + k4);
  }
  return gen;
}

GeneratedTrajectory generate_output_b(const TrajGenData& data, const SinusoidInput& u_bar,
                                      const Vector& alpha0, double t_end) {
  if (alpha0.size() != data.T)
    throw ValidationError("generate_output_b: alpha0 must have T entries");
  if (u_bar.m() != data.fine.u.rows())
    throw ValidationError("generate_output_b: input channel count mismatch");

  const Eigen::Index m = data.fine.u.rows();
  if ((u_bar.value(data.anchor_time) - data.U_hankel * alpha0).norm() > 1e-8)
    throw InconsistentInitialConditionError(
        "generate_output_b: u_bar(t0) does not match U_window * alpha0");

  const double h = 2.0 * data.fine.dt;
  const auto steps = static_cast<Eigen::Index>(std::llround(t_end / h));
  const Eigen::Index base = data.anchor_index;
  check_tail(data, base + 2 * steps, "generate_output_b");

  auto window_times = [&](Eigen::Index idx) -> std::vector<double> {
    std::vector<double> times(static_cast<std::size_t>(data.T));
    double tau = data.fine.t0 + data.fine.dt * static_cast<double>(idx);
    for (Eigen::Index k = 0; k < data.T; ++k)
      times[static_cast<std::size_t>(k)] = tau + data.sample_dt * static_cast<double>(k);
    return times;
  };

  // Least-squares stage solve of [U_window; Phi0_window] alpha' = rhs. Rows
  // are equilibrated first: for a consistent full-row-rank system this leaves
  // the minimum-norm solution unchanged and keeps the rank decision honest
  // across the large magnitude spread between input and filter-state rows.
  //
  // The constraint only pins alpha' up to the window's null space, and the
  // unconstrained component can grow exponentially while the synthesized
  // outputs stay O(1), destroying them through cancellation. Any null-space
  // vector added to alpha' still solves the same system, so the free
  // component of alpha is damped toward zero.
  constexpr double kKernelDamping = 20.0;
  auto alpha_rate = [&](Eigen::Index idx, double tau, const Vector& alpha) -> Vector {
    Matrix stacked(m + data.rank_r, data.T);
    stacked.topRows(m) = gather(data.fine.u, idx, data.stride, data.T);
    stacked.bottomRows(data.rank_r) =
        data.F1 * gather(data.fine.eta, idx, data.stride, data.T);

    Matrix u_dot_window(m, data.T);
    auto times = window_times(idx);
    for (Eigen::Index k = 0; k < data.T; ++k)
      u_dot_window.col(k) = data.recorded_input.derivative(times[static_cast<std::size_t>(k)], 1);

    Vector rhs(m + data.rank_r);
    rhs.head(m) = u_bar.derivative(tau, 1) - u_dot_window * alpha;
    rhs.tail(data.rank_r).setZero();

    for (Eigen::Index i = 0; i < stacked.rows(); ++i) {
      double scale = stacked.row(i).norm();
      if (scale > 0.0) {
        stacked.row(i) /= scale;
        rhs(i) /= scale;
      }
    }
    Eigen::JacobiSVD<Matrix> svd(stacked);
    const Vector& sv = svd.singularValues();
    if (sv(m + data.rank_r - 1) <= 1e-9 * sv(0))
      throw RankDeficientError(
          "generate_output_b: stacked input/state window is not full row rank");
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(stacked);
    Vector rate = cod.solve(rhs);
    Vector alpha_row_space = cod.solve(stacked * alpha);
    return rate - kKernelDamping * (alpha - alpha_row_space);
  };

  GeneratedTrajectory gen;
  gen.t0 = data.anchor_time;
  gen.dt = h;
  gen.alpha.resize(data.T, steps + 1);
  gen.alpha_dot.resize(data.T, steps + 1);
  gen.u_bar.resize(m, steps + 1);
  gen.y_bar.resize(data.fine.y.rows(), steps + 1);

  Vector alpha = alpha0;
  for (Eigen::Index k = 0; k <= steps; ++k) {
    const Eigen::Index idx = base + 2 * k;
    const double tau = data.anchor_time + h * static_cast<double>(k);
    gen.alpha.col(k) = alpha;
    gen.alpha_dot.col(k) = alpha_rate(idx, tau, alpha);
    gen.u_bar.col(k) = u_bar.value(tau);
    gen.y_bar.col(k) = gather(data.fine.y, idx, data.stride, data.T) * alpha;
    if (k == steps) break;

    Vector k1 = gen.alpha_dot.col(k);
    Vector k2 = alpha_rate(idx + 1, tau + 0.5 * h, alpha + (0.5 * h) * k1);
    Vector k3 = alpha_rate(idx + 1, tau + 0.5 * h, alpha + (0.5 * h) * k2);
    Vector k4 = alpha_rate(idx + 2, tau + h, alpha + h * k3);
    alpha += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return gen;
}

Vector initial_alpha_from_filter_state(const TrajGenData& data, const Vector& eta_bar) {
  return pinv_right(data.Phi0) * (data.F1 * eta_bar);
}

Vector initial_alpha_consistent(const TrajGenData& data, const Vector& phi_bar0,
                                const Vector& u_bar0) {
  Matrix stacked(data.rank_r + u_bar0.size(), data.T);
  stacked.topRows(data.rank_r) = data.Phi0;
  stacked.bottomRows(u_bar0.size()) = data.U_hankel;
  Vector rhs(data.rank_r + u_bar0.size());
  rhs.head(data.rank_r) = phi_bar0;
  rhs.tail(u_bar0.size()) = u_bar0;
  for (Eigen::Index i = 0; i < stacked.rows(); ++i) {
    double scale = stacked.row(i).norm();
    if (scale > 0.0) {
      stacked.row(i) /= scale;
      rhs(i) /= scale;
    }
  }
  Eigen::JacobiSVD<Matrix> svd(stacked);
  const Vector& sv = svd.singularValues();
  if (sv(stacked.rows() - 1) <= 1e-9 * sv(0))
    throw RankDeficientError("initial_alpha_consistent: stacked window is rank deficient");
  return stacked.completeOrthogonalDecomposition().solve(rhs);
}

namespace {

double resimulate_and_compare(const TrajGenData& data, const GeneratedTrajectory& gen,
                              const LtiPlant& plant, const Matrix& S,
                              const std::function<Vector(Eigen::Index, int)>& stage_input) {
  // Implied initial plant state: S applied to the weighted eta window.
  Matrix eta_window = gather(data.fine.eta, data.anchor_index, data.stride, data.T);
  Vector x = S * (eta_window * gen.alpha.col(0));

  double worst = (plant.C * x - gen.y_bar.col(0)).norm();
  const double h = gen.dt;
  for (Eigen::Index k = 0; k + 1 < gen.samples(); ++k) {
    Vector u0 = stage_input(k, 0);
    Vector u_mid = stage_input(k, 1);
    Vector u1 = stage_input(k, 2);
    Vector k1 = plant.A * x + plant.B * u0;
    Vector k2 = plant.A * (x + (0.5 * h) * k1) + plant.B * u_mid;
    Vector k3 = plant.A * (x + (0.5 * h) * k2) + plant.B * u_mid;
    Vector k4 = plant.A * (x + h * k3) + plant.B * u1;
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    worst = std::max(worst, (plant.C * x - gen.y_bar.col(k + 1)).norm());
  }
  return worst;
}

}  // namespace

double verify_generated_against_plant(const TrajGenData& data,
                                      const GeneratedTrajectory& gen,
                                      const LtiPlant& plant, const Matrix& S) {
  return resimulate_and_compare(
      data, gen, plant, S, [&](Eigen::Index k, int stage) -> Vector {
        if (stage == 0) return gen.u_bar.col(k);
        if (stage == 1) return gen.u_bar_mid.col(k);
        return gen.u_bar.col(k + 1);
      });
}

double verify_generated_against_plant(const TrajGenData& data,
                                      const GeneratedTrajectory& gen,
                                      const SinusoidInput& u_bar,
                                      const LtiPlant& plant, const Matrix& S) {
  return resimulate_and_compare(
      data, gen, plant, S, [&](Eigen::Index k, int stage) -> Vector {
        double tau = gen.time_at(k);
        if (stage == 1) tau += 0.5 * gen.dt;
        if (stage == 2) tau += gen.dt;
        return u_bar.value(tau);
      });
}

}  // namespace ddlqr
