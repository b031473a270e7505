// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specquant/budget.hpp"
#include "specquant/matrix.hpp"
#include "specquant/quant.hpp"
#include "specquant/spectral.hpp"

namespace specquant {

struct SmoothingFactors {
  std::vector<double> lambda;       ///< one per input channel, > 0
  double migration_strength = 0.5;  ///< s in [0, 1]

  friend bool operator==(const SmoothingFactors&, const SmoothingFactors&) = default;
};

enum class ResidualQuant { rtn, compensated };

std::string_view to_string(ResidualQuant q);
ResidualQuant residual_quant_from_string(std::string_view s);

/// One linear layer after compression: smoothing factors, the per-channel
/// low-frequency spectra (the high-precision branch W'), and the quantized
/// residual R = diag(lambda) W - W'.
struct CompressedLayer {
  std::string layer_name = "layer";
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  SmoothingFactors smoothing;
  std::vector<ChannelSpectrum> spectra;  ///< one per output channel
  QuantizedTensor residual;              ///< c_in x c_out, per_channel
  BudgetPlan plan;
  ImportanceMetric metric = ImportanceMetric::spectral_entropy;
  std::optional<double> ratio;          ///< set in ratio mode
  std::optional<std::size_t> groups;    ///< set in fixed-groups mode
  ResidualQuant residual_quant = ResidualQuant::rtn;

  /// Materializes W' (c_in x c_out) from the stored spectra.
  Matrix low_frequency_branch() const;

  /// Throws ShapeError unless spectra, residual and factors agree with
  /// c_in / c_out.
  void validate() const;

  /// Reals stored by the low-frequency branch: 2 * sum_j k_j.
  std::size_t branch_parameters() const;

  /// Storage cost per original weight when the branch and the factors are
  /// held in 16-bit floats, residual codes at their bit width and each
  /// residual slice carries a 16-bit (delta, zero point) pair.
  double bits_per_parameter() const;

  friend bool operator==(const CompressedLayer&, const CompressedLayer&) = default;
};

}  // namespace specquant
