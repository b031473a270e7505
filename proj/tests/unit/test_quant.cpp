// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "specquant/error.hpp"
#include "specquant/quant.hpp"
#include "test_util.hpp"

using namespace specquant;

TEST(QuantParams, ThreePointSlice) {
  const std::vector<double> s{-1, 0, 1};
  const QuantParams p = compute_params(s, 2);
  EXPECT_DOUBLE_EQ(p.delta, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(p.zero_point, 1.5);
}

TEST(QuantParams, DegenerateSlice) {
  const std::vector<double> s{5, 5, 5};
  for (int b = kMinBits; b <= kMaxBits; ++b) {
    const QuantParams p = compute_params(s, b);
    EXPECT_EQ(p.delta, 1.0);
    EXPECT_EQ(p.zero_point, -5.0);
  }
}

TEST(QuantParams, RangeMatchesCodeRange) {
  const std::vector<double> s{0, 15};
  const QuantParams p = compute_params(s, 4);
  EXPECT_EQ(p.delta, 1.0);
  EXPECT_EQ(p.zero_point, 0.0);
}

TEST(QuantParams, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(compute_params(std::vector<double>{}, 4), ArgumentError);
  EXPECT_THROW(compute_params(std::vector<double>{1.0, NAN}, 4), DataError);
}

TEST(Quantize, HalfRoundsAwayFromZero) {
  const Matrix x(1, 3, std::vector<double>{-1, 0, 1});
  const QuantizedTensor q = quantize(x, 2, Granularity::per_tensor);
  EXPECT_EQ(q.codes, (std::vector<std::uint8_t>{0, 2, 3}));
}

TEST(Quantize, DequantizeWorkedExample) {
  const Matrix x(1, 3, std::vector<double>{-1, 0, 1});
  const Matrix d = dequantize(quantize(x, 2, Granularity::per_tensor));
  EXPECT_NEAR(d(0, 0), -1.0, 1e-15);
  EXPECT_NEAR(d(0, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(d(0, 2), 1.0, 1e-15);
}

TEST(Quantize, ZerosRestoreExactly) {
  const Matrix x(3, 4);
  for (auto g : {Granularity::per_token, Granularity::per_channel, Granularity::per_tensor}) {
    const QuantizedTensor q = quantize(x, 4, g);
    for (auto c : q.codes) EXPECT_EQ(c, q.codes.front());
    EXPECT_EQ(dequantize(q), x);
  }
}

TEST(Quantize, ConstantSliceRestoresExactly) {
  const Matrix x(2, 3, 5.0);
  EXPECT_EQ(dequantize(quantize(x, 3, Granularity::per_tensor)), x);
}

TEST(Quantize, BitsOutOfRange) {
  const Matrix x(2, 2, 1.0);
  EXPECT_THROW(quantize(x, 1, Granularity::per_tensor), ArgumentError);
  EXPECT_THROW(quantize(x, 9, Granularity::per_tensor), ArgumentError);
}

TEST(Quantize, SliceLayout) {
  EXPECT_EQ(slice_count(Granularity::per_token, 3, 5), 3u);
  EXPECT_EQ(slice_count(Granularity::per_channel, 3, 5), 5u);
  EXPECT_EQ(slice_count(Granularity::per_tensor, 3, 5), 1u);
}

class QuantProperty : public ::testing::TestWithParam<std::tuple<int, Granularity>> {};

TEST_P(QuantProperty, RoundTripWithinHalfStepAndCodesInRange) {
  const auto [bits, g] = GetParam();
  std::mt19937_64 rng(100 + bits);
  for (int trial = 0; trial < 50; ++trial) {
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-3, 3)(rng));
    const Matrix x = testing_util::random_matrix(rng, 6, 9, -scale, scale * 0.5);
    const QuantizedTensor q = quantize(x, bits, g);
    ASSERT_NO_THROW(validate(q));
    const Matrix d = dequantize(q);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const auto& p = q.params[q.slice_of(r, c)];
        EXPECT_LE(q.codes[r * x.cols() + c], p.max_code());
        EXPECT_LE(std::abs(d(r, c) - x(r, c)), p.delta / 2.0 * (1 + 1e-12));
      }
    // Codes are a fixed point: requantizing the restored values on the same
    // grid returns them unchanged.
    EXPECT_EQ(quantize_with_params(d, q).codes, q.codes);
  }
}

INSTANTIATE_TEST_SUITE_P(AllWidths, QuantProperty,
                         ::testing::Combine(::testing::Values(2, 3, 4, 8),
                                            ::testing::Values(Granularity::per_token, Granularity::per_channel,
                                                              Granularity::per_tensor)));

TEST(Quantize, ValidateRejectsOutOfRangeCode) {
  QuantizedTensor q = quantize(Matrix(2, 2, 1.0), 2, Granularity::per_tensor);
  q.codes[0] = 4;
  EXPECT_THROW(validate(q), DataError);
}

TEST(Compensated, SingleInputRowMatchesRtn) {
  std::mt19937_64 rng(3);
  const Matrix r = testing_util::random_matrix(rng, 1, 6);
  const Matrix x = testing_util::random_matrix(rng, 10, 1);
  const QuantizedTensor comp = quantize_residual_compensated(r, 4, x);
  const QuantizedTensor rtn = quantize(r, 4, Granularity::per_channel);
  EXPECT_EQ(comp.codes, rtn.codes);
  EXPECT_EQ(comp.params, rtn.params);
}

TEST(Compensated, ZeroMatrix) {
  std::mt19937_64 rng(4);
  const Matrix r(4, 3);
  const Matrix x = testing_util::random_matrix(rng, 8, 4);
  const QuantizedTensor q = quantize_residual_compensated(r, 4, x);
  EXPECT_EQ(dequantize(q), r);
  EXPECT_EQ(calibration_weighted_error(x, r, q), 0.0);
}

TEST(Compensated, SingularGramFallsBack) {
  std::mt19937_64 rng(7);
  const Matrix r = testing_util::random_matrix(rng, 3, 3);
  const QuantizedTensor q = quantize_residual_compensated(r, 4, Matrix(5, 3));
  EXPECT_EQ(q.compensation, Compensation::singular_gram);
  EXPECT_EQ(q.codes, quantize(r, 4, Granularity::per_channel).codes);
}

namespace {

std::pair<std::vector<double>, std::vector<double>> grids_of(const QuantizedTensor& q) {
  std::vector<double> delta, zero;
  for (const auto& p : q.params) {
    delta.push_back(p.delta);
    zero.push_back(p.zero_point);
  }
  return {delta, zero};
}

}  // namespace

TEST(Compensated, IdentityGramGridAgainstBruteForce) {
  // 2x2 residuals on a grid with identity calibration: never worse than RTN
  // and equal to the best assignment on the fixed grid.
  const Matrix eye(2, 2, std::vector<double>{1, 0, 0, 1});
  const std::vector<double> grid{-1.0, -0.37, 0.0, 0.21, 0.5, 1.3};
  for (double a : grid)
    for (double b : grid)
      for (double c : grid)
        for (double d : grid) {
          const Matrix r(2, 2, std::vector<double>{a, b, c, d});
          const QuantizedTensor comp = quantize_residual_compensated(r, 2, eye);
          const double e_comp = calibration_weighted_error(eye, r, comp);
          EXPECT_LE(e_comp, calibration_weighted_error(eye, r, quantize(r, 2, Granularity::per_channel)) + 1e-12);
          const auto [delta, zero] = grids_of(comp);
          EXPECT_NEAR(e_comp, oracle::best_code_assignment(r.values(), 2, 2, eye.values(), 2, delta, zero, 2), 1e-12);
        }
}

TEST(Compensated, IdentityGramThreeRowsIsOptimal) {
  // With three rows the middle entry is not a grid endpoint, so rounding
  // actually happens.
  const Matrix eye(3, 3, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 60; ++trial) {
    const Matrix r = testing_util::random_matrix(rng, 3, 2);
    const QuantizedTensor comp = quantize_residual_compensated(r, 2, eye);
    const auto [delta, zero] = grids_of(comp);
    const double best = oracle::best_code_assignment(r.values(), 3, 2, eye.values(), 3, delta, zero, 2);
    EXPECT_GT(best, 0.0);
    EXPECT_NEAR(calibration_weighted_error(eye, r, comp), best, 1e-12);
  }
}

TEST(Compensated, CorrelatedCalibrationBeatsRtnAndBoundedByBruteForce) {
  std::mt19937_64 rng(21);
  int improved = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Matrix r = testing_util::random_matrix(rng, 3, 2);
    // Strongly correlated input channels.
    Matrix x = testing_util::random_matrix(rng, 16, 3);
    for (std::size_t t = 0; t < x.rows(); ++t) {
      x(t, 1) = 0.9 * x(t, 0) + 0.1 * x(t, 1);
      x(t, 2) = 0.8 * x(t, 1) + 0.2 * x(t, 2);
    }
    const QuantizedTensor comp = quantize_residual_compensated(r, 2, x);
    const QuantizedTensor rtn = quantize(r, 2, Granularity::per_channel);
    const double e_comp = calibration_weighted_error(x, r, comp);
    const double e_rtn = calibration_weighted_error(x, r, rtn);
    EXPECT_LE(e_comp, e_rtn);
    const auto [delta, zero] = grids_of(comp);
    const double best = oracle::best_code_assignment(r.values(), 3, 2, x.values(), 16, delta, zero, 2);
    EXPECT_GE(e_comp, best - 1e-12);
    if (e_comp < e_rtn - 1e-12) ++improved;
  }
  EXPECT_GE(improved, 3);
}
