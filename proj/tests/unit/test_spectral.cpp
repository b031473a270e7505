// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "specquant/error.hpp"
#include "specquant/spectral.hpp"
#include "test_util.hpp"

using namespace specquant;

namespace {

double relative_bin_error(Complex a, std::complex<long double> b) {
  const long double diff = std::abs(std::complex<long double>(a.real(), a.imag()) - b);
  const long double ref = std::abs(b);
  return static_cast<double>(ref > 1e-300L ? diff / ref : diff);
}

std::vector<double> sine(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / n);
  return x;
}

double l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST(Dft, ConstantHasOnlyDc) {
  const std::vector<double> x{2.5, 2.5, 2.5, 2.5};
  const auto X = dft_naive(x);
  EXPECT_NEAR(X[0].real(), 10.0, 1e-14);
  for (std::size_t k = 1; k < 4; ++k) EXPECT_NEAR(std::abs(X[k]), 0.0, 1e-14);
}

TEST(Dft, ImpulseIsFlat) {
  const auto X = dft_naive(std::vector<double>{1, 0, 0, 0});
  for (const auto& v : X) {
    EXPECT_NEAR(v.real(), 1.0, 1e-15);
    EXPECT_NEAR(v.imag(), 0.0, 1e-15);
  }
}

TEST(Dft, LengthSevenMatchesExtendedPrecision) {
  std::mt19937_64 rng(7);
  const auto x = testing_util::random_vector(rng, 7);
  const auto X = dft_naive(x);
  const auto ref = oracle::dft(x);
  for (std::size_t k = 0; k < 7; ++k) EXPECT_LT(relative_bin_error(X[k], ref[k]), 1e-13) << k;
}

TEST(Fft, MatchesOracleAcrossLengths) {
  std::mt19937_64 rng(42);
  for (std::size_t n : {1, 2, 3, 4, 5, 6, 7, 8, 12, 16, 31, 64, 100, 127, 128, 255, 256}) {
    const auto x = testing_util::random_vector(rng, n);
    const auto full = fft_full(x);
    const auto ref = oracle::dft(x);
    ASSERT_EQ(full.size(), n);
    for (std::size_t k = 0; k < n; ++k) EXPECT_LT(relative_bin_error(full[k], ref[k]), 1e-10) << "n=" << n << " k=" << k;
    const auto half = fft(x);
    ASSERT_EQ(half.size(), half_spectrum_size(n));
    for (std::size_t k = 0; k < half.size(); ++k) EXPECT_EQ(half[k], full[k]);
  }
}

TEST(Fft, LengthOneIsIdentity) {
  const auto X = fft(std::vector<double>{3.25});
  ASSERT_EQ(X.size(), 1u);
  EXPECT_EQ(X[0], Complex(3.25, 0.0));
}

TEST(Fft, InverseRoundTrip) {
  std::mt19937_64 rng(8);
  for (std::size_t n : {5, 16, 24, 97}) {
    const auto x = testing_util::random_vector(rng, n);
    std::vector<Complex> data(x.begin(), x.end());
    fft_complex(data, false);
    fft_complex(data, true);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(data[i].real() / n, x[i], 1e-12);
  }
}

TEST(HalfSpectrum, SizeAndRealBins) {
  EXPECT_EQ(half_spectrum_size(1), 1u);
  EXPECT_EQ(half_spectrum_size(8), 5u);
  EXPECT_EQ(half_spectrum_size(7), 4u);
  EXPECT_TRUE(is_real_bin(0, 7));
  EXPECT_FALSE(is_real_bin(3, 7));
  EXPECT_TRUE(is_real_bin(4, 8));
  EXPECT_EQ(pair_weight(2, 8), 2.0);
}

TEST(Truncate, RealBinsCarryZeroOrPiPhase) {
  std::mt19937_64 rng(9);
  const auto x = testing_util::random_vector(rng, 16);
  const auto spec = truncate_low_freq(fft(x), 16, 9);
  EXPECT_TRUE(spec.phases[0] == 0.0 || spec.phases[0] == std::numbers::pi);
  EXPECT_TRUE(spec.phases[8] == 0.0 || spec.phases[8] == std::numbers::pi);
  for (std::size_t m = 0; m < spec.retained(); ++m) {
    EXPECT_GE(spec.amps[m], 0.0);
    EXPECT_GT(spec.phases[m], -std::numbers::pi);
    EXPECT_LE(spec.phases[m], std::numbers::pi);
  }
}

TEST(Truncate, RejectsBadArguments) {
  const auto half = fft(std::vector<double>{1, 2, 3, 4});
  EXPECT_THROW(truncate_low_freq(half, 4, 0), ArgumentError);
  EXPECT_THROW(truncate_low_freq(half, 4, 4), ArgumentError);
  EXPECT_THROW(truncate_low_freq(half, 6, 2), ArgumentError);
}

TEST(Reconstruct, FullSpectrumIsExact) {
  std::mt19937_64 rng(10);
  for (std::size_t n : {1, 2, 9, 32, 50}) {
    const auto x = testing_util::random_vector(rng, n);
    const auto y = reconstruct(truncate_low_freq(fft(x), n, half_spectrum_size(n)));
    EXPECT_LT(l2(x, y), 1e-12) << n;
  }
}

TEST(Reconstruct, ConstantWithDcOnly) {
  const std::vector<double> x(10, -1.75);
  const auto y = reconstruct(truncate_low_freq(fft(x), 10, 1));
  EXPECT_LT(l2(x, y), 1e-14);
}

TEST(Reconstruct, SineNeedsTwoBins) {
  const auto x = sine(16);
  EXPECT_LT(l2(x, reconstruct(truncate_low_freq(fft(x), 16, 2))), 1e-13);
  // DC alone loses the whole bin-1 energy, which is all of it.
  const double err = l2(x, reconstruct(truncate_low_freq(fft(x), 16, 1)));
  EXPECT_NEAR(err * err, 8.0, 1e-12);
}

TEST(Reconstruct, HandBuiltDcSpectrum) {
  const ChannelSpectrum spec{4, {4.0}, {0.0}};
  const auto y = reconstruct(spec);
  for (double v : y) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Reconstruct, ImpulseDcIsMean) {
  const auto y = reconstruct(truncate_low_freq(fft(std::vector<double>{1, 0, 0, 0}), 4, 1));
  for (double v : y) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(ErrorBound, FullKeepIsZero) {
  std::mt19937_64 rng(12);
  const auto x = testing_util::random_vector(rng, 12);
  EXPECT_EQ(error_bound(fft(x), 12, 7), 0.0);
}

TEST(ErrorBound, SineDcOnlyEqualsNorm) {
  const auto x = sine(20);
  EXPECT_NEAR(error_bound(fft(x), 20, 1), std::sqrt(10.0), 1e-12);
}

TEST(ErrorBound, ExhaustiveSmallSweep) {
  std::mt19937_64 rng(13);
  for (std::size_t n = 1; n <= 32; ++n) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto x = testing_util::random_vector(rng, n);
      const auto half = fft(x);
      for (std::size_t k = 1; k <= half.size(); ++k) {
        const double achieved = l2(x, reconstruct(truncate_low_freq(half, n, k)));
        EXPECT_LE(achieved, error_bound(half, n, k) + 1e-9) << "n=" << n << " k=" << k;
      }
    }
  }
}

TEST(Parseval, Examples) {
  const auto zero = parseval_check(std::vector<double>(8, 0.0));
  EXPECT_EQ(zero.time, 0.0);
  EXPECT_EQ(zero.frequency, 0.0);
  const auto impulse = parseval_check(std::vector<double>{1, 0, 0, 0});
  EXPECT_DOUBLE_EQ(impulse.time, 1.0);
  EXPECT_DOUBLE_EQ(impulse.frequency, 1.0);
}

TEST(Parseval, RandomLengths) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 1024;
    const auto e = parseval_check(testing_util::random_vector(rng, n));
    EXPECT_NEAR(e.frequency, e.time, 1e-9 * e.time) << n;
  }
}

TEST(BinEnergies, SumToSignalEnergy) {
  std::mt19937_64 rng(15);
  for (std::size_t n : {7, 8}) {
    const auto x = testing_util::random_vector(rng, n);
    double time = 0;
    for (double v : x) time += v * v;
    double total = 0;
    for (double e : bin_energies(fft(x), n)) total += e;
    EXPECT_NEAR(total, time, 1e-12);
  }
}

TEST(StorageCounts, ImplicitIndexingKeepsMoreBins) {
  EXPECT_EQ(retained_count_implicit(0.3, 128), 19u);
  EXPECT_EQ(retained_count_explicit(0.3, 128), 12u);
}

TEST(Analyze, ReportIsConsistent) {
  std::mt19937_64 rng(16);
  const auto x = testing_util::random_vector(rng, 30);
  const ChannelReport r = analyze_channel(x, 5);
  EXPECT_EQ(r.retained, 5u);
  EXPECT_NEAR(r.retained_energy + r.tail_energy, r.total_energy, 1e-12);
  EXPECT_NEAR(r.error_bound, r.achieved_error, 1e-12);
  EXPECT_NEAR(r.error_bound * r.error_bound, r.tail_energy, 1e-12);
}

TEST(Analyze, LowFrequencyFraction) {
  EXPECT_NEAR(low_frequency_energy_fraction(std::vector<double>(16, 1.0), 0.2), 1.0, 1e-12);
  EXPECT_EQ(low_frequency_energy_fraction(std::vector<double>(16, 0.0), 0.2), 0.0);
}
