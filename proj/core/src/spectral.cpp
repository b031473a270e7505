// SPDX-License-Identifier: Apache-2.0
#include "specquant/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "specquant/error.hpp"

namespace specquant {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// e^{sign * i 2 pi num / den} with num reduced modulo den first.
Complex unit_root(std::size_t num, std::size_t den, double sign) {
  const double angle = sign * 2.0 * kPi * static_cast<double>(num % den) / static_cast<double>(den);
  return {std::cos(angle), std::sin(angle)};
}

// Plain complex product; std::complex's operator* adds Annex G NaN
// recovery that costs a library call per butterfly.
inline Complex mul(Complex a, Complex b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

void radix2(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> twiddle(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) twiddle[k] = unit_root(k, n, sign);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex even = a[start + k];
        const Complex odd = mul(a[start + k + half], twiddle[k * stride]);
        a[start + k] = even + odd;
        a[start + k + half] = even - odd;
      }
    }
  }
}

// Chirp-z: X[k] = w_k sum_n (x_n w_n) conj(w_{k-n}), w_k = e^{-i pi k^2 / N}.
void bluestein(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  const std::size_t m = next_power_of_two(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 reduced modulo 2n keeps the angle argument small.
    const std::size_t k2 = (k * k) % (2 * n);
    chirp[k] = unit_root(k2, 2 * n, sign);
  }
  std::vector<Complex> u(m), v(m);
  for (std::size_t k = 0; k < n; ++k) u[k] = mul(a[k], chirp[k]);
  v[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) v[k] = v[m - k] = std::conj(chirp[k]);
  radix2(u, false);
  radix2(v, false);
  for (std::size_t k = 0; k < m; ++k) u[k] = mul(u[k], v[k]);
  radix2(u, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = mul(u[k] * scale, chirp[k]);
}

}  // namespace

std::vector<Complex> dft_naive(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) acc += x[t] * unit_root(k * t, n, -1.0);
    out[k] = acc;
  }
  return out;
}

void fft_complex(std::vector<Complex>& data, bool inverse) {
  if (data.size() <= 1) return;
  if (is_power_of_two(data.size()))
    radix2(data, inverse);
  else
    bluestein(data, inverse);
}

std::vector<Complex> fft_full(std::span<const double> x) {
  std::vector<Complex> data(x.begin(), x.end());
  fft_complex(data);
  return data;
}

std::vector<Complex> fft(std::span<const double> x) {
  auto full = fft_full(x);
  full.resize(x.empty() ? 0 : half_spectrum_size(x.size()));
  return full;
}

Complex ChannelSpectrum::coefficient(std::size_t m) const { return std::polar(amps.at(m), phases.at(m)); }

ChannelSpectrum truncate_low_freq(std::span<const Complex> half, std::size_t n, std::size_t k) {
  if (half.size() != half_spectrum_size(n)) {
    throw ArgumentError("truncate_low_freq: half-spectrum has " + std::to_string(half.size()) +
                        " bins, expected " + std::to_string(half_spectrum_size(n)));
  }
  if (k < 1 || k > half.size()) {
    throw ArgumentError("truncate_low_freq: k = " + std::to_string(k) + " outside [1, " +
                        std::to_string(half.size()) + "]");
  }
  ChannelSpectrum spec;
  spec.n = n;
  spec.amps.resize(k);
  spec.phases.resize(k);
  for (std::size_t m = 0; m < k; ++m) {
    if (is_real_bin(m, n)) {
      const double re = half[m].real();
      spec.amps[m] = std::abs(re);
      spec.phases[m] = re < 0.0 ? kPi : 0.0;
    } else {
      spec.amps[m] = std::abs(half[m]);
      double phase = std::arg(half[m]);
      if (phase <= -kPi) phase = kPi;
      spec.phases[m] = phase;
    }
  }
  return spec;
}

std::vector<double> reconstruct(const ChannelSpectrum& spec) {
  const std::size_t n = spec.n;
  if (n == 0) return {};
  std::vector<Complex> full(n, Complex{0.0, 0.0});
  for (std::size_t m = 0; m < spec.retained(); ++m) {
    if (spec.is_real(m)) {
      full[m] = Complex{spec.phases[m] == 0.0 ? spec.amps[m] : -spec.amps[m], 0.0};
    } else {
      const Complex c = spec.coefficient(m);
      full[m] = c;
      full[n - m] = std::conj(c);
    }
  }
  fft_complex(full, true);
  std::vector<double> out(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t) out[t] = full[t].real() * scale;
  return out;
}

std::vector<double> bin_energies(std::span<const Complex> half, std::size_t n) {
  std::vector<double> e(half.size());
  for (std::size_t m = 0; m < half.size(); ++m) e[m] = pair_weight(m, n) * std::norm(half[m]) / static_cast<double>(n);
  return e;
}

double error_bound(std::span<const Complex> half, std::size_t n, std::size_t k) {
  const auto e = bin_energies(half, n);
  double tail = 0.0;
  for (std::size_t m = std::min(k, e.size()); m < e.size(); ++m) tail += e[m];
  return std::sqrt(tail);
}

ParsevalEnergies parseval_check(std::span<const double> x) {
  ParsevalEnergies out;
  for (double v : x) out.time += v * v;
  if (x.empty()) return out;
  for (const auto& c : fft_full(x)) out.frequency += std::norm(c);
  out.frequency /= static_cast<double>(x.size());
  return out;
}

std::size_t retained_count_implicit(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) / 2.0));
}

std::size_t retained_count_explicit(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) / 3.0));
}

ChannelReport analyze_channel(std::span<const double> x, std::size_t k) {
  const std::size_t n = x.size();
  const auto half = fft(x);
  const auto energies = bin_energies(half, n);
  ChannelReport r;
  r.retained = k;
  for (std::size_t m = 0; m < energies.size(); ++m) {
    r.total_energy += energies[m];
    (m < k ? r.retained_energy : r.tail_energy) += energies[m];
  }
  r.error_bound = std::sqrt(r.tail_energy);
  const auto approx = reconstruct(truncate_low_freq(half, n, k));
  double err = 0.0;
  for (std::size_t t = 0; t < n; ++t) err += (x[t] - approx[t]) * (x[t] - approx[t]);
  r.achieved_error = std::sqrt(err);
  return r;
}

double low_frequency_energy_fraction(std::span<const double> x, double fraction) {
  if (x.empty()) return 0.0;
  const auto energies = bin_energies(fft(x), x.size());
  const auto low = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(energies.size()))), 1, energies.size());
  double total = 0.0;
  double kept = 0.0;
  for (std::size_t m = 0; m < energies.size(); ++m) {
    total += energies[m];
    if (m < low) kept += energies[m];
  }
  return total > 0.0 ? kept / total : 0.0;
}

}  // namespace specquant
