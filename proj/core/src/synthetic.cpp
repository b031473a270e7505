// SPDX-License-Identifier: Apache-2.0
#include "specquant/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "specquant/error.hpp"
#include "specquant/spectral.hpp"

namespace specquant::synthetic {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed, double sigma) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = sigma * rng.normal();
  return m;
}

SmoothLayer smooth_decay_layer(std::size_t c_in, std::size_t c_out, double decay_rate, std::uint64_t seed,
                               double scale) {
  if (c_in == 0) throw ArgumentError("smooth_decay_layer: c_in must be positive");
  Rng rng(seed);
  SmoothLayer out;
  out.decay_rate = decay_rate;
  out.weights = Matrix(c_in, c_out);
  out.decay_constants.resize(c_out);
  const std::size_t bins = half_spectrum_size(c_in);
  for (std::size_t j = 0; j < c_out; ++j) {
    const double c = 0.5 * scale * static_cast<double>(c_in) * rng.uniform(0.5, 1.5);
    out.decay_constants[j] = c;
    ChannelSpectrum spec;
    spec.n = c_in;
    spec.amps.resize(bins);
    spec.phases.resize(bins);
    const double dc = c * rng.uniform(-0.5, 0.5);
    spec.amps[0] = std::abs(dc);
    spec.phases[0] = dc < 0.0 ? std::numbers::pi : 0.0;
    for (std::size_t m = 1; m < bins; ++m) {
      spec.amps[m] = c * rng.uniform(0.5, 1.0) / std::pow(static_cast<double>(m), decay_rate);
      if (is_real_bin(m, c_in)) {
        spec.phases[m] = rng.uniform() < 0.5 ? std::numbers::pi : 0.0;
      } else {
        spec.phases[m] = std::numbers::pi * (1.0 - 2.0 * rng.uniform());
        if (spec.phases[m] <= -std::numbers::pi) spec.phases[m] = std::numbers::pi;
      }
    }
    out.weights.set_column(j, reconstruct(spec));
  }
  return out;
}

Matrix outlier_activations(std::size_t tokens, std::size_t c_in, std::uint64_t seed, double magnitude,
                           std::size_t outlier_channels) {
  Rng rng(seed);
  Matrix x(tokens, c_in);
  for (double& v : x.data()) v = rng.normal();
  outlier_channels = std::min(outlier_channels, c_in);
  std::vector<std::size_t> channels(c_in);
  std::iota(channels.begin(), channels.end(), 0);
  // Partial Fisher-Yates picks distinct outlier channels.
  for (std::size_t i = 0; i < outlier_channels; ++i) {
    const std::size_t pick = i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(c_in - i));
    std::swap(channels[i], channels[std::min(pick, c_in - 1)]);
    for (std::size_t t = 0; t < tokens; ++t) x(t, channels[i]) *= magnitude;
  }
  return x;
}

Matrix rank_one_white(std::size_t c_in, std::size_t c_out, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> u(c_in), v(c_out);
  for (double& e : u) e = rng.normal();
  for (double& e : v) e = rng.normal();
  Matrix m(c_in, c_out);
  for (std::size_t r = 0; r < c_in; ++r)
    for (std::size_t c = 0; c < c_out; ++c) m(r, c) = u[r] * v[c];
  return m;
}

}  // namespace specquant::synthetic
