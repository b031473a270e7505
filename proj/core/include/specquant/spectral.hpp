// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace specquant {

using Complex = std::complex<double>;

/// O(N^2) reference DFT, X[k] = sum_n x[n] e^{-i 2 pi k n / N}, all N bins.
std::vector<Complex> dft_naive(std::span<const double> x);

/// In-place unnormalized forward (or inverse, without the 1/N) transform of
/// any length: iterative radix-2 for powers of two, Bluestein otherwise.
void fft_complex(std::vector<Complex>& data, bool inverse = false);

/// All N bins of the forward transform of a real vector.
std::vector<Complex> fft_full(std::span<const double> x);

/// Bins 0..floor(N/2) of the forward transform. Together with conjugate
/// symmetry X[N-k] = conj(X[k]) these determine the signal exactly.
std::vector<Complex> fft(std::span<const double> x);

/// Number of bins in the half-spectrum of a length-n real signal.
constexpr std::size_t half_spectrum_size(std::size_t n) { return n / 2 + 1; }

/// DC and (for even n) Nyquist bins are their own conjugates and carry no
/// mirrored partner.
constexpr bool is_real_bin(std::size_t m, std::size_t n) { return m == 0 || (n % 2 == 0 && m == n / 2); }

/// Weight of bin m in the half-spectrum energy sum: 1 for self-conjugate
/// bins, 2 for bins that stand for a conjugate pair.
constexpr double pair_weight(std::size_t m, std::size_t n) { return is_real_bin(m, n) ? 1.0 : 2.0; }

/// Retained low band of one channel, stored as (amplitude, phase) pairs. The
/// frequency of entry m is m / n by position and is never stored.
struct ChannelSpectrum {
  std::size_t n = 0;
  std::vector<double> amps;    ///< A_m >= 0
  std::vector<double> phases;  ///< phi_m in (-pi, pi]; 0 or pi on real bins

  std::size_t retained() const { return amps.size(); }
  bool is_real(std::size_t m) const { return is_real_bin(m, n); }
  Complex coefficient(std::size_t m) const;

  friend bool operator==(const ChannelSpectrum&, const ChannelSpectrum&) = default;
};

/// Keeps bins 0..k-1 of a half-spectrum. Requires 1 <= k <= half.size().
ChannelSpectrum truncate_low_freq(std::span<const Complex> half, std::size_t n, std::size_t k);

/// x[t] = (1/n) Re sum_m w_m A_m e^{i(2 pi m t / n + phi_m)} with w_m the
/// pair weight. Computed through an inverse FFT.
std::vector<double> reconstruct(const ChannelSpectrum& spec);

/// sqrt((1/n) sum_{m >= k} w_m |X_m|^2): the L2 norm of what truncating to k
/// bins discards. Achieved reconstruction error never exceeds it.
double error_bound(std::span<const Complex> half, std::size_t n, std::size_t k);

/// Per-bin contribution to the time-domain energy, (w_m / n) |X_m|^2.
std::vector<double> bin_energies(std::span<const Complex> half, std::size_t n);

struct ParsevalEnergies {
  double time = 0.0;       ///< sum |x[n]|^2
  double frequency = 0.0;  ///< (1/N) sum over all N bins |X[k]|^2
};

ParsevalEnergies parseval_check(std::span<const double> x);

/// Retained-bin count when each bin stores (A, phi): floor(ratio * n / 2).
std::size_t retained_count_implicit(double ratio, std::size_t n);
/// Retained-bin count when each bin stores (A, phi, f): floor(ratio * n / 3).
std::size_t retained_count_explicit(double ratio, std::size_t n);

/// Energy accounting for one channel truncated to k bins.
struct ChannelReport {
  std::size_t retained = 0;
  double total_energy = 0.0;
  double retained_energy = 0.0;
  double tail_energy = 0.0;
  double error_bound = 0.0;
  double achieved_error = 0.0;
};

ChannelReport analyze_channel(std::span<const double> x, std::size_t k);

/// Fraction of a channel's energy held by the lowest `fraction` of its
/// half-spectrum bins (at least one bin).
double low_frequency_energy_fraction(std::span<const double> x, double fraction);

}  // namespace specquant
