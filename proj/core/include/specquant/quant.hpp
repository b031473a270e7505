// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "specquant/matrix.hpp"

namespace specquant {

inline constexpr int kMinBits = 2;
inline constexpr int kMaxBits = 8;

/// Asymmetric uniform quantizer parameters for one slice.
struct QuantParams {
  int bits = 4;
  double delta = 1.0;       ///< step size
  double zero_point = 0.0;  ///< real-valued offset z; code = round(x / delta + z)

  int max_code() const { return (1 << bits) - 1; }
  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

/// Slicing axis. Activations (T x C_in) are quantized per token (row); weights
/// (C_in x C_out) per output channel (column).
enum class Granularity : std::uint8_t { per_token, per_channel, per_tensor };

std::string_view to_string(Granularity g);
Granularity granularity_from_string(std::string_view s);

/// How a residual quantization was produced.
enum class Compensation : std::uint8_t {
  none,           ///< plain round-to-nearest was requested
  applied,        ///< error-compensated result returned
  singular_gram,  ///< calibration Gram not positive definite; fell back to RTN
  no_gain,        ///< compensated result was not better than RTN; RTN returned
};

std::string_view to_string(Compensation c);
Compensation compensation_from_string(std::string_view s);

struct QuantizedTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Granularity granularity = Granularity::per_tensor;
  int bits = 4;
  std::vector<std::uint8_t> codes;  ///< row-major, rows * cols entries
  std::vector<QuantParams> params;  ///< one per slice
  Compensation compensation = Compensation::none;

  /// Index into params for element (r, c).
  std::size_t slice_of(std::size_t r, std::size_t c) const;
  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

std::size_t slice_count(Granularity g, std::size_t rows, std::size_t cols);

/// Delta = (max - min) / (2^b - 1), z = -min / Delta. A constant slice gets
/// Delta = 1, z = -min so the constant dequantizes exactly.
QuantParams compute_params(std::span<const double> slice, int bits);

std::uint8_t quantize_value(double x, const QuantParams& p);
double dequantize_value(std::uint8_t code, const QuantParams& p);

QuantizedTensor quantize(const Matrix& x, int bits, Granularity granularity);
/// Re-encodes x against an existing parameter set and layout.
QuantizedTensor quantize_with_params(const Matrix& x, const QuantizedTensor& layout);
Matrix dequantize(const QuantizedTensor& q);

/// Checks code range, slice count and shape consistency.
void validate(const QuantizedTensor& q);

/// GPTQ-style residual quantization, per output channel. Input dimensions
/// (rows of r) are quantized in ascending index order; each row's error is
/// pushed onto the rows not yet quantized through the inverse of the damped
/// calibration Gram x_calib^T x_calib. The returned codes never have a larger
/// calibration-weighted error than plain RTN; see Compensation for why a
/// given result is or is not compensated.
QuantizedTensor quantize_residual_compensated(const Matrix& r, int bits, const Matrix& x_calib,
                                              double damping_fraction = 0.01);

/// ||x_calib (r - dequantize(q))||_F^2.
double calibration_weighted_error(const Matrix& x_calib, const Matrix& r, const QuantizedTensor& q);

}  // namespace specquant
