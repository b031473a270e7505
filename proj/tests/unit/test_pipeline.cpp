// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "specquant/error.hpp"
#include "specquant/pipeline.hpp"
#include "specquant/synthetic.hpp"
#include "test_util.hpp"

using namespace specquant;

namespace {

CompressConfig fixed_config(double ratio, double s = 0.5) {
  CompressConfig c;
  c.ratio = ratio;
  c.migration_strength = s;
  return c;
}

// One-sided tail of the unnormalized half-spectrum from bin k on.
double one_sided_tail(const std::vector<double>& channel, std::size_t k) {
  const auto half = fft(channel);
  double t = 0.0;
  for (std::size_t m = k; m < half.size(); ++m) t += pair_weight(m, channel.size()) / 2.0 * std::norm(half[m]);
  return t;
}

}  // namespace

TEST(Smoothing, ExponentLimits) {
  std::mt19937_64 rng(1);
  const Matrix x = testing_util::random_matrix(rng, 10, 4, -3, 3);
  const Matrix w = testing_util::random_matrix(rng, 4, 5);
  const auto f0 = compute_smoothing(x, w, 0.0);
  const auto f1 = compute_smoothing(x, w, 1.0);
  for (std::size_t j = 0; j < 4; ++j) {
    double xmax = 0;
    for (std::size_t t = 0; t < 10; ++t) xmax = std::max(xmax, std::abs(x(t, j)));
    EXPECT_DOUBLE_EQ(f0.lambda[j], 1.0 / max_abs(w.row(j)));
    EXPECT_DOUBLE_EQ(f1.lambda[j], xmax);
  }
}

TEST(Smoothing, ZeroActivationChannelKeepsUnitFactor) {
  std::mt19937_64 rng(2);
  Matrix x = testing_util::random_matrix(rng, 6, 3);
  for (std::size_t t = 0; t < 6; ++t) x(t, 1) = 0.0;
  const auto f = compute_smoothing(x, testing_util::random_matrix(rng, 3, 3), 0.5);
  EXPECT_EQ(f.lambda[1], 1.0);
}

TEST(Smoothing, UnitFactorsAreIdentity) {
  std::mt19937_64 rng(3);
  const Matrix x = testing_util::random_matrix(rng, 5, 4);
  const Matrix w = testing_util::random_matrix(rng, 4, 2);
  const SmoothingFactors f{std::vector<double>(4, 1.0), 0.5};
  const auto [xh, wh] = apply_smoothing(x, w, f);
  EXPECT_EQ(xh, x);
  EXPECT_EQ(wh, w);
}

TEST(Smoothing, ProductIsPreserved) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix x = synthetic::outlier_activations(16, 12, trial, 100.0, 1 + trial % 3);
    const Matrix w = testing_util::random_matrix(rng, 12, 9);
    const double s = std::uniform_real_distribution<double>(0, 1)(rng);
    const auto [xh, wh] = apply_smoothing(x, w, compute_smoothing(x, w, s));
    const Matrix ref = matmul(x, w);
    EXPECT_LE(frobenius_distance(matmul(xh, wh), ref), 1e-12 * frobenius_norm(ref));
  }
}

TEST(Smoothing, OutlierRangeShrinks) {
  std::mt19937_64 rng(5);
  Matrix x = testing_util::random_matrix(rng, 32, 8);
  for (std::size_t t = 0; t < 32; ++t) x(t, 3) *= 100.0;
  const Matrix w = testing_util::random_matrix(rng, 8, 8);
  const Matrix xh = smooth_activations(x, compute_smoothing(x, w, 0.5));
  EXPECT_LT(max_abs(xh.data()), max_abs(x.data()));
}

TEST(Smoothing, RejectsBadStrength) {
  EXPECT_THROW(compute_smoothing(Matrix(2, 2), Matrix(2, 2), 1.5), ArgumentError);
  EXPECT_THROW(compute_smoothing(Matrix(2, 3), Matrix(2, 2), 0.5), ShapeError);
}

TEST(MigrationSearch, SingletonGrid) {
  std::mt19937_64 rng(6);
  CompressConfig c = fixed_config(0.2);
  c.grid = {0.35};
  EXPECT_EQ(select_migration_strength(testing_util::random_matrix(rng, 8, 8), testing_util::random_matrix(rng, 8, 8), c),
            0.35);
}

TEST(MigrationSearch, TiesPickSmallest) {
  // Zero weights make every loss zero.
  CompressConfig c = fixed_config(0.2);
  c.grid = {0.7, 0.3, 0.5};
  std::mt19937_64 rng(7);
  EXPECT_EQ(select_migration_strength(testing_util::random_matrix(rng, 8, 8), Matrix(8, 8), c), 0.3);
}

TEST(MigrationSearch, OutliersFavourMigration) {
  const Matrix x = synthetic::outlier_activations(64, 32, 3, 100.0, 1);
  const Matrix w = synthetic::smooth_decay_layer(32, 32, 2.0, 3).weights;
  CompressConfig c = fixed_config(0.2);
  c.grid = {0.0, 0.25, 0.5, 0.75};
  const double chosen = select_migration_strength(x, w, c);
  EXPECT_GT(chosen, 0.0);
  double best = std::numeric_limits<double>::infinity();
  double arg = -1;
  for (double s : c.grid) {
    const double l = migration_loss(x, w, c, s);
    if (l < best) {
      best = l;
      arg = s;
    }
  }
  EXPECT_EQ(chosen, arg);
}

TEST(SpectralBudget, RatioOneCoversHalfSpectrum) {
  EXPECT_EQ(spectral_budget(1.0, 128, 10), 650u);
  EXPECT_EQ(spectral_budget(0.2, 64, 3), 19u);
}

TEST(Compress, RatioOneIsExact) {
  std::mt19937_64 rng(8);
  const Matrix x = testing_util::random_matrix(rng, 20, 16, -2, 2);
  const Matrix w = testing_util::random_matrix(rng, 16, 12);
  const CompressedLayer layer = compress_layer(x, w, fixed_config(1.0));
  const Matrix w_hat = smooth_weights(w, layer.smoothing);
  EXPECT_LT(frobenius_distance(layer.low_frequency_branch(), w_hat), 1e-9);
  EXPECT_LT(max_abs(dequantize(layer.residual).data()), 1e-12);
  const Matrix ref = matmul(x, w);
  EXPECT_LT(frobenius_distance(forward_approx(x, layer, kUnquantizedActivations), ref), 1e-6 * frobenius_norm(ref));
}

TEST(Compress, ZeroWeights) {
  std::mt19937_64 rng(9);
  const CompressedLayer layer = compress_layer(testing_util::random_matrix(rng, 8, 8), Matrix(8, 6), fixed_config(0.3));
  for (const auto& s : layer.spectra)
    for (double a : s.amps) EXPECT_EQ(a, 0.0);
  EXPECT_EQ(dequantize(layer.residual), Matrix(8, 6));
}

TEST(Compress, ZeroInputGivesZeroOutput) {
  std::mt19937_64 rng(10);
  const Matrix w = testing_util::random_matrix(rng, 8, 8);
  const CompressedLayer layer = compress_layer(testing_util::random_matrix(rng, 8, 8), w, fixed_config(0.3));
  EXPECT_EQ(forward_approx(Matrix(5, 8), layer, 4), Matrix(5, 8));
}

TEST(Compress, GroupsModeFixesEveryChannel) {
  std::mt19937_64 rng(11);
  CompressConfig c = fixed_config(0.2);
  c.groups = 16;
  const CompressedLayer layer =
      compress_layer(testing_util::random_matrix(rng, 32, 128), synthetic::smooth_decay_layer(128, 128, 2.0, 1).weights, c);
  for (std::size_t k : layer.plan.k) EXPECT_EQ(k, 16u);
  EXPECT_FALSE(layer.ratio.has_value());
  EXPECT_EQ(layer.branch_parameters(), 2u * 16u * 128u);
}

TEST(Compress, ResidualWithinHalfStep) {
  std::mt19937_64 rng(12);
  const Matrix x = testing_util::random_matrix(rng, 16, 32);
  const Matrix w = synthetic::smooth_decay_layer(32, 24, 2.0, 12).weights;
  const CompressedLayer layer = compress_layer(x, w, fixed_config(0.1));
  const Matrix w_hat = smooth_weights(w, layer.smoothing);
  const Matrix recon = layer.low_frequency_branch() + dequantize(layer.residual);
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t c = 0; c < 24; ++c)
      EXPECT_LE(std::abs(recon(r, c) - w_hat(r, c)), layer.residual.params[c].delta / 2 * (1 + 1e-9) + 1e-15);
}

TEST(Compress, CompensatedNeverWorseThanRtn) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix x = synthetic::outlier_activations(64, 32, seed);
    const Matrix w = synthetic::gaussian(32, 16, seed + 100, 0.1);
    CompressConfig c = fixed_config(0.1);
    const CompressedLayer rtn = compress_layer(x, w, c);
    c.residual_quant = ResidualQuant::compensated;
    const CompressedLayer comp = compress_layer(x, w, c);
    const Matrix ref = matmul(x, w);
    EXPECT_LE(frobenius_distance(forward_approx(x, comp, 16), ref),
              frobenius_distance(forward_approx(x, rtn, 16), ref) * (1 + 1e-12));
  }
}

TEST(Compress, DeterministicAcrossThreadCounts) {
  const Matrix x = synthetic::outlier_activations(32, 32, 4);
  const Matrix w = synthetic::smooth_decay_layer(32, 32, 2.0, 4).weights;
  CompressConfig c = fixed_config(0.2);
  c.migration_strength.reset();
  ::setenv("SPECQUANT_THREADS", "1", 1);
  const CompressedLayer a = compress_layer(x, w, c);
  ::setenv("SPECQUANT_THREADS", "4", 1);
  const CompressedLayer b = compress_layer(x, w, c);
  ::unsetenv("SPECQUANT_THREADS");
  EXPECT_EQ(a, b);
}

TEST(Compress, SmoothChannelsRespectDecayBound) {
  const double r = 2.0;
  const auto layer = synthetic::smooth_decay_layer(64, 16, r, 21);
  for (std::size_t j = 0; j < 16; ++j) {
    const auto col = layer.weights.column(j);
    const double c = layer.decay_constants[j];
    for (std::size_t k = 2; k <= half_spectrum_size(64); ++k) {
      const double bound = c * c / ((2 * r - 1) * std::pow(static_cast<double>(k - 1), 2 * r - 1));
      EXPECT_LE(one_sided_tail(col, k), bound * (1 + 1e-12)) << "j=" << j << " k=" << k;
    }
  }
}

TEST(ForwardApprox, OutliersBeatNaive) {
  const Matrix x = synthetic::outlier_activations(128, 64, 31, 100.0, 1);
  const Matrix w = synthetic::smooth_decay_layer(64, 64, 2.0, 31).weights;
  const CompressedLayer layer = compress_layer(x, w, fixed_config(0.2));
  const Matrix ref = matmul(x, w);
  const Matrix naive =
      matmul(fake_quantize(x, 4, Granularity::per_token), fake_quantize(w, 4, Granularity::per_channel));
  EXPECT_LT(frobenius_distance(forward_approx(x, layer, 4), ref), frobenius_distance(naive, ref));
}

TEST(ForwardApprox, RejectsBadBits) {
  std::mt19937_64 rng(13);
  const CompressedLayer layer =
      compress_layer(testing_util::random_matrix(rng, 4, 4), testing_util::random_matrix(rng, 4, 4), fixed_config(0.5));
  EXPECT_THROW(forward_approx(Matrix(2, 4), layer, 12), ArgumentError);
  EXPECT_THROW(forward_approx(Matrix(2, 3), layer, 4), ShapeError);
}

TEST(HalfPrecision, RoundsLikeBinary16) {
  EXPECT_EQ(round_to_half(1.0), 1.0);
  EXPECT_EQ(round_to_half(1.0 + 1.0 / 4096), 1.0);
  EXPECT_EQ(round_to_half(1.0 + 3.0 / 2048), 1.0 + 2.0 / 1024);
  EXPECT_EQ(round_to_half(65504.0), 65504.0);
  EXPECT_TRUE(std::isinf(round_to_half(70000.0)));
  EXPECT_EQ(round_to_half(std::ldexp(1.0, -24)), std::ldexp(1.0, -24));
  EXPECT_EQ(round_to_half(std::ldexp(1.0, -26)), 0.0);
}

TEST(Svd, FullRankBudgetIsExact) {
  std::mt19937_64 rng(14);
  const Matrix w = testing_util::random_matrix(rng, 6, 5);
  const auto svd = svd_baseline(w, 5 * (6 + 5 + 1));
  EXPECT_LT(frobenius_norm(svd.residual), 1e-9);
}

TEST(Svd, RankOneIsExact) {
  const Matrix w = synthetic::rank_one_white(16, 12, 3);
  const auto svd = svd_rank(w, 1);
  EXPECT_LT(frobenius_norm(svd.residual), 1e-9);
}

TEST(Svd, TailMatchesJacobiOracle) {
  std::mt19937_64 rng(15);
  const Matrix w = testing_util::random_matrix(rng, 8, 8);
  const auto svd = svd_rank(w, 3);
  const auto sigma = oracle::singular_values(w.values(), 8, 8);
  double tail = 0;
  for (std::size_t i = 3; i < 8; ++i) tail += sigma[i] * sigma[i];
  EXPECT_NEAR(std::pow(frobenius_norm(svd.residual), 2), tail, 1e-10);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(svd.singular_values[i], sigma[i], 1e-11);
}

TEST(Svd, RejectsBudgetBelowOneTriplet) { EXPECT_THROW(svd_baseline(Matrix(4, 4, 1.0), 8), ArgumentError); }

TEST(CompareBudgets, SmoothLayerFavoursSpectral) {
  const Matrix w = synthetic::smooth_decay_layer(128, 128, 2.0, 5).weights;
  const auto c = compare_budgets(w, nullptr, 0.2);
  EXPECT_GE(c.b_spectral, c.b_svd);
  EXPECT_LT(c.error_spectral, c.error_svd);
}

TEST(CompareBudgets, RankOneFavoursSvd) {
  const Matrix w = synthetic::rank_one_white(64, 64, 6);
  const auto c = compare_budgets(w, nullptr, 0.2);
  EXPECT_LT(c.error_svd, 1e-9);
  EXPECT_GT(c.error_spectral, c.error_svd);
}

TEST(CompareBudgets, ZeroLayer) {
  const auto c = compare_budgets(Matrix(32, 32), nullptr, 0.2);
  EXPECT_EQ(c.error_spectral, 0.0);
  EXPECT_EQ(c.error_svd, 0.0);
}

TEST(EvaluateMatmul, RowsAndZeroActivations) {
  std::mt19937_64 rng(16);
  const Matrix w = testing_util::random_matrix(rng, 16, 16);
  const CompressedLayer layer = compress_layer(testing_util::random_matrix(rng, 8, 16), w, fixed_config(0.2));
  const auto rows = evaluate_matmul(Matrix(4, 16), w, layer, 4, 4);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].method, "fp-reference");
  EXPECT_EQ(rows[1].method, "naive-W4A4");
  EXPECT_EQ(rows[2].method, "smooth-only-W4A4");
  EXPECT_EQ(rows[3].method, "specquant");
  for (const auto& r : rows) EXPECT_EQ(r.frobenius_error, 0.0);
}

TEST(EvaluateMatmul, OutlierOrdering) {
  const Matrix x = synthetic::outlier_activations(128, 128, 17);
  const Matrix w = synthetic::smooth_decay_layer(128, 128, 2.0, 17).weights;
  const CompressedLayer layer = compress_layer(x, w, fixed_config(0.2));
  const auto rows = evaluate_matmul(x, w, layer, 4, 4);
  EXPECT_EQ(rows[0].frobenius_error, 0.0);
  EXPECT_LT(rows[3].frobenius_error, rows[2].frobenius_error);
  EXPECT_LT(rows[3].frobenius_error, rows[1].frobenius_error);
}
