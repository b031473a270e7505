// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "specquant/matrix.hpp"

namespace specquant::synthetic {

/// Seeded generator whose uniform and normal draws are defined here rather
/// than by the standard library's distributions, so a seed produces the same
/// values with any toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller).
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed, double sigma = 1.0);

struct SmoothLayer {
  Matrix weights;                        ///< c_in x c_out
  std::vector<double> decay_constants;   ///< C_j with |X_j[m]| <= C_j / m^r, m >= 1
  double decay_rate = 2.0;               ///< r
};

/// Channels built in the frequency domain with |X_j[m]| = C_j u_{jm} / m^r,
/// u in [0.5, 1], uniform random phases, and independent draws per channel.
/// `scale` sets the typical weight magnitude.
SmoothLayer smooth_decay_layer(std::size_t c_in, std::size_t c_out, double decay_rate, std::uint64_t seed,
                               double scale = 0.05);

/// T x c_in standard-normal activations with `outlier_channels` channels
/// (chosen by the seed) multiplied by `magnitude`.
Matrix outlier_activations(std::size_t tokens, std::size_t c_in, std::uint64_t seed, double magnitude = 100.0,
                           std::size_t outlier_channels = 1);

/// u v^T with a white-noise u (no spectral decay) and a random v.
Matrix rank_one_white(std::size_t c_in, std::size_t c_out, std::uint64_t seed);

}  // namespace specquant::synthetic
