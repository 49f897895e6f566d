#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "ddlqr/experiments.hpp"
#include "ddlqr/filter_pipeline.hpp"
#include "ddlqr/lti.hpp"
#include "ddlqr/rng.hpp"

namespace ddlqr::testing {

// Multi-output benchmark problem used throughout the suites: n=4, m=2, p=2,
// Q = I, R = 2I, observer spectrum {-2,-3,-4,-5}.
inline LtiPlant multi_output_plant() {
  Matrix A(4, 4);
  A << -1.0169, -1.4786, 1.7280, 0.2547,
       1.5194, -0.5787, 0.3642, 0.1249,
       -1.6774, 0.4439, -0.6473, -0.3487,
       -0.3387, -0.2713, 0.1172, -0.7287;
  Matrix B(4, 2);
  B << -0.2938, 0.0,
       -0.8479, 0.3075,
       -1.1201, -1.2571,
       0.0, 1.0;
  Matrix C(2, 4);
  C << 1, 1, 0, 0,
       0, 1, 0, 0;
  return LtiPlant(A, B, C);
}

// Same plant with the (2,2) entry flipped positive; open-loop unstable.
inline LtiPlant multi_output_plant_unstable() {
  LtiPlant plant = multi_output_plant();
  Matrix A = plant.A;
  A(1, 1) = 0.5787;
  return LtiPlant(A, plant.B, plant.C);
}

// Observable and stabilizable but uncontrollable diagonal variant.
inline LtiPlant uncontrollable_plant() {
  Matrix A = Vector::LinSpaced(4, -1.0, -4.0).asDiagonal();
  Matrix B(4, 2);
  B << 1, 0,
       0, 1,
       0, 1,
       0, 0;
  Matrix C(2, 4);
  C << 1, 0, 1, 0,
       0, 1, 0, 1;
  return LtiPlant(A, B, C);
}

inline CostSpec multi_output_cost() {
  return CostSpec(Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2));
}

inline std::vector<std::complex<double>> multi_output_observer_eigenvalues() {
  return {{-2.0, 0.0}, {-3.0, 0.0}, {-4.0, 0.0}, {-5.0, 0.0}};
}

// Two-channel excitation of the multi-output experiments (cosines folded into
// phase-shifted sines).
inline SinusoidInput multi_output_input() {
  SinusoidInput input;
  const double half_pi = 0.5 * M_PI;
  SinusoidChannel ch1;
  ch1.terms = {{0.5, 2.0 * M_PI, 0.0},
               {0.3, 4.0 * M_PI, half_pi},
               {0.2, 6.0 * M_PI, M_PI / 4.0},
               {0.1, 10.0 * M_PI, half_pi}};
  SinusoidChannel ch2;
  ch2.terms = {{0.4, 3.0 * M_PI, half_pi},
               {0.25, 5.0 * M_PI, 0.0},
               {0.15, 7.0 * M_PI, M_PI / 6.0},
               {0.05, 9.0 * M_PI, 0.0}};
  input.channels = {ch1, ch2};
  return input;
}

// Enriched two-channel excitation with six sinusoids per channel; rich to
// order 2n+1 = 9, which the four-sinusoid excitation cannot reach, and with
// enough steady-state span (24 quadratures) to keep the stacked
// input/state windows of prescribed-input generation uniformly full rank.
inline SinusoidInput multi_output_input_rich() {
  SinusoidInput input = multi_output_input();
  input.channels[0].terms.push_back({0.15, 11.0 * M_PI, 0.9});
  input.channels[0].terms.push_back({0.12, 13.0 * M_PI, 2.1});
  input.channels[1].terms.push_back({0.1, 12.0 * M_PI, 0.5});
  input.channels[1].terms.push_back({0.08, 8.0 * M_PI, 1.6});
  return input;
}

// c1 u(t + d1) + c2 u(t + d2) folded into a single sinusoid input by phasor
// addition; a delayed-copy mixture is itself a trajectory-generation target.
inline SinusoidInput delayed_mixture(const SinusoidInput& base, double c1, double d1,
                                     double c2, double d2) {
  SinusoidInput out;
  for (const auto& ch : base.channels) {
    SinusoidChannel oc;
    oc.offset = (c1 + c2) * ch.offset;
    for (const auto& term : ch.terms) {
      double re = c1 * std::cos(term.phase + term.angular_frequency * d1) +
                  c2 * std::cos(term.phase + term.angular_frequency * d2);
      double im = c1 * std::sin(term.phase + term.angular_frequency * d1) +
                  c2 * std::sin(term.phase + term.angular_frequency * d2);
      double amp = term.amplitude * std::hypot(re, im);
      if (amp > 0.0)
        oc.terms.push_back({amp, term.angular_frequency, std::atan2(im, re)});
    }
    out.channels.push_back(std::move(oc));
  }
  return out;
}

// Single-channel excitation of the single-output study.
inline SinusoidInput single_output_input() {
  SinusoidInput input;
  SinusoidChannel ch;
  ch.offset = -0.2;
  ch.terms = {{0.2, 74.0 * M_PI, 0.0},
              {0.3, 38.0 * M_PI, 0.0},
              {0.4, 26.0 * M_PI, 0.0},
              {0.5, 10.0 * M_PI, 0.0}};
  input.channels = {ch};
  return input;
}

inline std::vector<std::complex<double>> single_output_observer_eigenvalues() {
  return {{-5.0, 0.0}, {-6.0, 0.0}};
}

// A well-conditioned moderate-frequency probe input; the random suites use it
// instead of the high-frequency study input to keep data matrices benign.
inline SinusoidInput probe_input(int m, Rng& rng) {
  SinusoidInput input;
  for (int c = 0; c < m; ++c) {
    SinusoidChannel ch;
    ch.offset = rng.uniform(-0.3, 0.3);
    for (int k = 0; k < 5; ++k)
      ch.terms.push_back({rng.uniform(0.3, 1.0),
                          rng.uniform(1.0, 25.0),
                          rng.uniform(0.0, 2.0 * M_PI)});
    input.channels.push_back(std::move(ch));
  }
  return input;
}

struct PipelineFixture {
  FilterBank bank;
  RawDataset data;
  ProjectedData proj;
};

inline double phi0_condition(const ProjectedData& proj) {
  return proj.e0_singular_values(0) / proj.min_singular_Phi0;
}

inline PipelineFixture run_pipeline(const LtiPlant& plant,
                                    const std::vector<std::complex<double>>& observer_eigs,
                                    const SinusoidInput& input, const Vector& x0,
                                    const Vector& eta0_eps, double sample_dt,
                                    Eigen::Index T, double dt_integration,
                                    double record_tail = 0.0) {
  PipelineFixture fixture{
      build_filter_bank(observer_eigs, static_cast<int>(plant.m()),
                        static_cast<int>(plant.p()), eta0_eps),
      {},
      {}};
  fixture.data = collect_data(plant, fixture.bank, input, x0, 0.0, sample_dt, T,
                              dt_integration, record_tail);
  fixture.proj = project(fixture.data, fixture.bank);
  return fixture;
}

// Random single-output case with a conditioning screen on Phi0. Tight
// per-iterate comparisons against the model-based oracle are only meaningful
// when pseudo-inverse roundoff amplification stays below the tolerance, so
// draws whose data matrix is worse conditioned than max_cond are discarded.
struct RandomCase {
  LtiPlant plant;
  CostSpec cost;
  Vector x0;
  std::vector<std::complex<double>> observer_eigs;
  PipelineFixture pipe;
};

inline RandomCase well_conditioned_case(Rng& rng, double max_cond = 1e5) {
  CostSpec cost(Matrix::Identity(1, 1), Matrix::Identity(1, 1));
  EnsembleSpec spec;
  std::vector<std::complex<double>> eigs{{-1.5, 0.0}, {-2.5, 0.0}};
  for (int attempt = 0; attempt < 50; ++attempt) {
    LtiPlant plant = random_assumption1_plant(rng, spec, cost);
    SinusoidInput input = probe_input(1, rng);
    Vector x0 = rng.uniform_vector(2, -1.0, 1.0);
    Vector eta0 = rng.uniform_vector(2, -1.0, 1.0);
    PipelineFixture pipe = run_pipeline(plant, eigs, input, x0, eta0, 0.1, 12, 1e-3);
    if (phi0_condition(pipe.proj) <= max_cond)
      return {plant, cost, x0, eigs, std::move(pipe)};
  }
  throw NumericalError("well_conditioned_case: no admissible draw in 50 attempts");
}

}  // namespace ddlqr::testing
