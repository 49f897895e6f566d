#include <benchmark/benchmark.h>

#include <cmath>
#include <complex>
#include <vector>

#include "ddlqr/filter_pipeline.hpp"
#include "ddlqr/lti.hpp"
#include "ddlqr/rng.hpp"
#include "ddlqr/solvers.hpp"

namespace {

using namespace ddlqr;

LtiPlant bench_plant() {
  Matrix A(4, 4);
  A << -1.0169, -1.4786, 1.7280, 0.2547,
       1.5194, -0.5787, 0.3642, 0.1249,
       -1.6774, 0.4439, -0.6473, -0.3487,
       -0.3387, -0.2713, 0.1172, -0.7287;
  Matrix B(4, 2);
  B << -0.2938, 0.0, -0.8479, 0.3075, -1.1201, -1.2571, 0.0, 1.0;
  Matrix C(2, 4);
  C << 1, 1, 0, 0, 0, 1, 0, 0;
  return LtiPlant(A, B, C);
}

SinusoidInput bench_input() {
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

Vector bench_eta0() {
  Vector v(4);
  v << 3.1, -7.4, 5.9, -1.2;
  return v;
}

struct BenchData {
  FilterBank bank;
  RawDataset data;
  ProjectedData proj;
  CostSpec cost;

  BenchData()
      : bank(build_filter_bank({{-2, 0}, {-3, 0}, {-4, 0}, {-5, 0}}, 2, 2, bench_eta0())),
        cost(Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2)) {
    LtiPlant plant = bench_plant();
    Vector x0(4);
    x0 << 2.0, -4.0, 1.0, 3.0;
    data = collect_data(plant, bank, bench_input(), x0, 0.0, 0.2, 32, 1e-3);
    proj = project(data, bank);
  }
};

const BenchData& shared_data() {
  static BenchData instance;
  return instance;
}

void BM_CollectData(benchmark::State& state) {
  LtiPlant plant = bench_plant();
  const auto& d = shared_data();
  Vector x0(4);
  x0 << 2.0, -4.0, 1.0, 3.0;
  for (auto _ : state) {
    RawDataset data =
        collect_data(plant, d.bank, bench_input(), x0, 0.0, 0.2, 32, 1e-3);
    benchmark::DoNotOptimize(data.E0.norm());
  }
}
BENCHMARK(BM_CollectData)->Unit(benchmark::kMillisecond);

void BM_Project(benchmark::State& state) {
  const auto& d = shared_data();
  for (auto _ : state) {
    ProjectedData proj = project(d.data, d.bank);
    benchmark::DoNotOptimize(proj.rank_r);
  }
}
BENCHMARK(BM_Project)->Unit(benchmark::kMicrosecond);

void BM_PolicyIteration(benchmark::State& state) {
  const auto& d = shared_data();
  PiConfig cfg;
  for (auto _ : state) {
    SolveReport report = policy_iteration(d.proj, d.data.U0, d.data.Y0, d.cost, cfg);
    benchmark::DoNotOptimize(report.iterations_run);
  }
}
BENCHMARK(BM_PolicyIteration)->Unit(benchmark::kMillisecond);

void BM_ValueIteration(benchmark::State& state) {
  const auto& d = shared_data();
  ViConfig cfg;
  cfg.step_numerator = 100.0;
  cfg.Sigma0 = 0.01 * Matrix::Identity(d.proj.rank_r, d.proj.rank_r);
  for (auto _ : state) {
    SolveReport report = value_iteration(d.proj, d.data.U0, d.data.Y0, d.cost, cfg);
    benchmark::DoNotOptimize(report.iterations_run);
  }
}
BENCHMARK(BM_ValueIteration)->Unit(benchmark::kMillisecond);

void BM_GeneralizedSylvester(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  Rng rng(5);
  Matrix P0 = rng.uniform_matrix(n, 2 * n, -1.0, 1.0);
  Matrix A = rng.uniform_matrix(n, n, -1.0, 1.0);
  A -= (spectral_abscissa(A) + 0.5) * Matrix::Identity(n, n);
  Matrix Z = A * P0;
  Matrix W0 = rng.uniform_matrix(n, n, -1.0, 1.0);
  Matrix W = P0.transpose() * (0.5 * (W0 + W0.transpose())) * P0;
  for (auto _ : state) {
    Matrix S = solve_generalized_sylvester(Z, P0, W);
    benchmark::DoNotOptimize(S.norm());
  }
}
BENCHMARK(BM_GeneralizedSylvester)->Arg(6)->Arg(16)->Arg(24)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
