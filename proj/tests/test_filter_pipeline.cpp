#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ddlqr/filter_pipeline.hpp"
#include "ddlqr/rng.hpp"
#include "support/fixtures.hpp"

using namespace ddlqr;
namespace fx = ddlqr::testing;

namespace {

Vector fixed_eta0(int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = 0.3 + 0.7 * static_cast<double>(i % 3) - 0.2 * i;
  return v;
}

SinusoidInput zero_input(int m) {
  SinusoidInput input;
  input.channels.resize(static_cast<std::size_t>(m));
  return input;
}

}  // namespace

TEST_CASE("filter bank coefficients for the single-output spectrum") {
  FilterBank bank = build_filter_bank({{-5, 0}, {-6, 0}}, 1, 1, fixed_eta0(2));
  // (s+5)(s+6) = s^2 + 11 s + 30
  CHECK(bank.char_coeffs(0) == doctest::Approx(30.0));
  CHECK(bank.char_coeffs(1) == doctest::Approx(11.0));
  Matrix expected(2, 2);
  expected << 0, 1, -30, -11;
  CHECK((bank.A_s - expected).norm() == 0.0);
  CHECK(bank.eta_dim() == 6);
}

TEST_CASE("filter bank coefficients for the multi-output spectrum") {
  FilterBank bank = build_filter_bank(fx::multi_output_observer_eigenvalues(), 2, 2,
                                      fixed_eta0(4));
  Vector expected(4);
  expected << 120, 154, 71, 14;
  CHECK((bank.char_coeffs - expected).norm() < 1e-10);
  CHECK(bank.script_A.rows() == 20);
  CHECK(bank.script_A.cols() == 20);
  CHECK(bank.script_B.rows() == 20);
  CHECK(bank.script_B.cols() == 2 + 2 + 4);
  // Block-diagonal layout: one companion block per channel plus the
  // autonomous error block, zero elsewhere.
  for (int c = 0; c < 4; ++c)
    CHECK((bank.script_A.block(4 * c, 4 * c, 4, 4) - bank.A_s).norm() == 0.0);
  CHECK((bank.script_A.bottomRightCorner(4, 4) - bank.A_eps).norm() == 0.0);
  CHECK(bank.script_B.rightCols(4).norm() == 0.0);
}

TEST_CASE("first-order filter bank") {
  FilterBank bank = build_filter_bank({{-1, 0}}, 1, 1, fixed_eta0(1));
  CHECK(bank.A_s(0, 0) == doctest::Approx(-1.0));
  CHECK(bank.b_s(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("complex observer eigenvalues are accepted in conjugate pairs") {
  FilterBank bank = build_filter_bank({{-1, 2}, {-1, -2}}, 1, 1, fixed_eta0(2));
  // (s+1-2i)(s+1+2i) = s^2 + 2 s + 5
  CHECK(bank.char_coeffs(0) == doctest::Approx(5.0));
  CHECK(bank.char_coeffs(1) == doctest::Approx(2.0));
  CHECK_THROWS_AS(build_filter_bank({{-1, 2}, {-1, 3}}, 1, 1, fixed_eta0(2)),
                  ValidationError);
}

TEST_CASE("unstable observer spectra are rejected") {
  CHECK_THROWS_AS(build_filter_bank({{2, 0}, {-3, 0}}, 1, 1, fixed_eta0(2)),
                  UnstableSpectrumError);
  CHECK_THROWS_AS(build_filter_bank({{-2, 0}, {-3, 0}}, 1, 1, Vector::Zero(2).eval()),
                  DegenerateEta0Error);
}

TEST_CASE("random eta0 sampling respects the Krylov condition") {
  Rng rng(5);
  FilterBank bank = build_filter_bank({{-2, 0}, {-3, 0}}, 1, 1, std::nullopt, &rng);
  CHECK(bank.eta0_eps.norm() > 0.0);
}

TEST_CASE("zero input and zero state excite only the error filter") {
  LtiPlant plant(-Matrix::Identity(2, 2), Matrix::Identity(2, 1).eval(),
                 Matrix::Identity(1, 2).eval());
  FilterBank bank = build_filter_bank({{-5, 0}, {-6, 0}}, 1, 1, fixed_eta0(2));
  RawDataset data = collect_data(plant, bank, zero_input(1), Vector::Zero(2), 0.0,
                                 0.1, 12, 1e-3);
  CHECK(data.U0.norm() == 0.0);
  CHECK(data.Y0.norm() == 0.0);
  CHECK(data.E0.topRows(4).norm() == 0.0);
  CHECK(data.E0.bottomRows(2).norm() > 0.0);
}

TEST_CASE("derivative columns are evaluated from the filter right-hand side") {
  LtiPlant plant = fx::multi_output_plant();
  FilterBank bank = build_filter_bank(fx::multi_output_observer_eigenvalues(), 2, 2,
                                      fixed_eta0(4));
  Rng rng(7);
  Vector x0 = rng.uniform_vector(4, -10.0, 10.0);
  RawDataset data = collect_data(plant, bank, fx::multi_output_input(), x0, 0.0, 0.2,
                                 32, 1e-3);
  for (Eigen::Index k = 0; k < data.T; ++k) {
    Vector expected = bank.derivative(data.E0.col(k), data.U0.col(k), data.Y0.col(k));
    CHECK((data.E1.col(k) - expected).norm() == 0.0);
  }
}

TEST_CASE("single-output data matrices reach full row rank") {
  Rng rng(9);
  CostSpec cost(Matrix::Identity(1, 1), Matrix::Identity(1, 1));
  Matrix A(2, 2);
  A << -0.9, 0.3, 0.3, -1.4;
  Matrix B(2, 1);
  B << 0.8, 0.4;
  Matrix C(1, 2);
  C << 0.7, 0.9;
  LtiPlant plant(A, B, C);
  FilterBank bank =
      build_filter_bank(fx::single_output_observer_eigenvalues(), 1, 1, fixed_eta0(2));
  RawDataset data = collect_data(plant, bank, fx::single_output_input(),
                                 rng.uniform_vector(2, -1.0, 1.0), 0.0, 0.2, 12, 2e-4);
  // p = 1: the raw matrix itself is full row rank (m+2)n = rows.
  RankRevealing rr = rank_reveal(data.E0);
  CHECK(rr.rank == 6);
  CHECK(data.E0.rows() == 6);

  ProjectedData proj = project(data, bank);
  CHECK(proj.rank_r == 6);
  CHECK(proj.order_estimate == 2);
  // No information removed: F1 is square orthogonal.
  CHECK(proj.F1.rows() == 6);
  CHECK((proj.F1 * proj.F1.transpose() - Matrix::Identity(6, 6)).norm() < 1e-10);
  CHECK((proj.F1.transpose() * proj.F1 - Matrix::Identity(6, 6)).norm() < 1e-10);
}

TEST_CASE("multi-output data matrices are rank deficient before projection") {
  LtiPlant plant = fx::multi_output_plant();
  FilterBank bank = build_filter_bank(fx::multi_output_observer_eigenvalues(), 2, 2,
                                      fixed_eta0(4));
  Rng rng(13);
  Vector x0 = rng.uniform_vector(4, -10.0, 10.0);
  RawDataset data = collect_data(plant, bank, fx::multi_output_input(), x0, 0.0, 0.2,
                                 32, 1e-3);
  CHECK(data.E0.rows() == (2 + 2 + 1) * 4);  // 20 rows
  RankRevealing rr = rank_reveal(data.E0);
  CHECK(rr.rank == (2 + 2) * 4);  // (m+2) n = 16 informative directions

  ProjectedData proj = project(data, bank);
  CHECK(proj.rank_r == 16);
  CHECK(proj.order_estimate == 4);
  CHECK(proj.min_singular_Phi0 > proj.tolerance_used);
  CHECK((proj.F1 * proj.F1.transpose() - Matrix::Identity(16, 16)).norm() < 1e-10);

  SUBCASE("projection loses no information") {
    CHECK((proj.F1.transpose() * proj.F1 * data.E0 - data.E0).norm() <=
          1e-8 * data.E0.norm());
  }

  SUBCASE("projected data satisfy the isosystem relations") {
    Matrix A_hat = reduced_dynamics(proj, data.U0);
    Matrix C_hat = reduced_output(proj, data.Y0);
    CHECK((proj.Phi1 - A_hat * proj.Phi0 - proj.B_F * data.U0).norm() <=
          1e-8 * proj.Phi1.norm());
    CHECK((data.Y0 - C_hat * proj.Phi0).norm() <= 1e-8 * data.Y0.norm());
  }

  SUBCASE("stacked data parameterize arbitrary feedback gains") {
    Matrix stacked(proj.rank_r + 2, data.T);
    stacked.topRows(proj.rank_r) = proj.Phi0;
    stacked.bottomRows(2) = data.U0;
    RankRevealing rr_stacked = rank_reveal(stacked);
    CHECK(rr_stacked.rank == proj.rank_r + 2);

    // im([F1; K F1]) lies inside im([Phi0; U0]) for any compatible gain.
    Rng krng(17);
    Matrix K = krng.uniform_matrix(2, static_cast<int>(proj.rank_r), -1.0, 1.0);
    Matrix target(proj.rank_r + 2, proj.F1.cols());
    target.topRows(proj.rank_r) = proj.F1;
    target.bottomRows(2) = K * proj.F1;
    Matrix basis = rr_stacked.orthonormal_rows;
    double residual = (target - basis.transpose() * (basis * target)).norm();
    CHECK(residual <= 1e-8 * target.norm());

    // The unprojected matrix cannot do the same when p > 1.
    Matrix stacked_raw(data.E0.rows() + 2, data.T);
    stacked_raw.topRows(data.E0.rows()) = data.E0;
    stacked_raw.bottomRows(2) = data.U0;
    CHECK(rank_reveal(stacked_raw).rank < stacked_raw.rows());
  }
}

TEST_CASE("square minimal data yields an invertible Phi0") {
  LtiPlant plant = fx::multi_output_plant();
  FilterBank bank = build_filter_bank(fx::multi_output_observer_eigenvalues(), 2, 2,
                                      fixed_eta0(4));
  Rng rng(19);
  Vector x0 = rng.uniform_vector(4, -10.0, 10.0);
  RawDataset data = collect_data(plant, bank, fx::multi_output_input(), x0, 0.0, 0.2,
                                 16, 1e-3);
  ProjectedData proj = project(data, bank);
  REQUIRE(proj.Phi0.rows() == proj.Phi0.cols());
  Eigen::FullPivLU<Matrix> lu(proj.Phi0);
  CHECK(lu.isInvertible());
}

TEST_CASE("insufficient excitation is reported, not silently accepted") {
  LtiPlant plant(-Matrix::Identity(2, 2), Matrix::Identity(2, 1).eval(),
                 Matrix::Identity(1, 2).eval());
  FilterBank bank =
      build_filter_bank(fx::single_output_observer_eigenvalues(), 1, 1, fixed_eta0(2));
  SinusoidInput constant;
  SinusoidChannel ch;
  ch.offset = 1.0;
  constant.channels = {ch};
  RawDataset data =
      collect_data(plant, bank, constant, Vector::Zero(2), 0.0, 0.2, 12, 1e-3);
  CHECK_THROWS_AS(project(data, bank), InsufficientExcitationError);
}

TEST_CASE("the outer-product regressor needs enough columns") {
  LtiPlant plant(-Matrix::Identity(2, 2), Matrix::Identity(2, 1).eval(),
                 Matrix::Identity(1, 2).eval());
  FilterBank bank = build_filter_bank({{-2, 0}, {-3, 0}}, 1, 1, fixed_eta0(2));
  RawDataset data = collect_data(plant, bank, zero_input(1), Vector::Zero(2), 0.0,
                                 0.05, 10, 1e-3);  // fewer than ((m+2)n)^2 = 36
  CHECK_THROWS_AS(regression_matrix_rank(data), ValidationError);
}

TEST_CASE("outer-product regressor rank obeys the structural bound") {
  SUBCASE("scalar toy system") {
    LtiPlant plant(-Matrix::Identity(1, 1), Matrix::Identity(1, 1),
                   Matrix::Identity(1, 1));
    FilterBank bank = build_filter_bank({{-2, 0}}, 1, 1, fixed_eta0(1));
    SinusoidInput input;
    SinusoidChannel ch;
    ch.offset = 0.3;
    ch.terms = {{1.0, 3.0, 0.0}, {0.7, 7.0, 0.4}};
    input.channels = {ch};
    Vector x0(1);
    x0 << 0.5;
    RawDataset data = collect_data(plant, bank, input, x0, 0.0, 0.1, 24, 1e-3);
    RegressionRankReport report = regression_matrix_rank(data);
    CHECK(report.bound == 9);
    CHECK(report.rank <= 9);
  }

  SUBCASE("zero input and state confine the regressor to the error block") {
    LtiPlant plant(-Matrix::Identity(2, 2), Matrix::Identity(2, 1).eval(),
                   Matrix::Identity(1, 2).eval());
    FilterBank bank = build_filter_bank({{-2, 0}, {-3, 0}}, 1, 1, fixed_eta0(2));
    RawDataset data = collect_data(plant, bank, zero_input(1), Vector::Zero(2), 0.0,
                                   0.05, 40, 1e-3);
    RegressionRankReport report = regression_matrix_rank(data);
    CHECK(report.rank <= 4);  // n^2 entries of the error-filter block
  }
}
