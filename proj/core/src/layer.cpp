// SPDX-License-Identifier: Apache-2.0
#include "specquant/layer.hpp"

#include <cmath>
#include <string>

#include "specquant/error.hpp"

namespace specquant {

std::string_view to_string(ResidualQuant q) { return q == ResidualQuant::rtn ? "rtn" : "compensated"; }

ResidualQuant residual_quant_from_string(std::string_view s) {
  if (s == "rtn") return ResidualQuant::rtn;
  if (s == "compensated") return ResidualQuant::compensated;
  throw ArgumentError("unknown residual quantizer '" + std::string(s) + "' (expected rtn or compensated)");
}

Matrix CompressedLayer::low_frequency_branch() const {
  Matrix out(c_in, c_out);
  for (std::size_t j = 0; j < c_out; ++j) out.set_column(j, reconstruct(spectra[j]));
  return out;
}

void CompressedLayer::validate() const {
  const std::string dims = std::to_string(c_in) + "x" + std::to_string(c_out);
  if (smoothing.lambda.size() != c_in) throw ShapeError("layer " + dims + ": smoothing factor count != c_in");
  for (double l : smoothing.lambda)
    if (!(l > 0.0) || !std::isfinite(l)) throw DataError("layer " + dims + ": smoothing factors must be finite and > 0");
  if (spectra.size() != c_out) throw ShapeError("layer " + dims + ": spectra count != c_out");
  for (std::size_t j = 0; j < c_out; ++j) {
    const auto& s = spectra[j];
    if (s.n != c_in) throw ShapeError("layer " + dims + ": spectrum " + std::to_string(j) + " length != c_in");
    if (s.phases.size() != s.amps.size() || s.retained() < 1 || s.retained() > half_spectrum_size(c_in))
      throw ShapeError("layer " + dims + ": spectrum " + std::to_string(j) + " has invalid retained count");
  }
  if (residual.rows != c_in || residual.cols != c_out) throw ShapeError("layer " + dims + ": residual shape mismatch");
  if (residual.granularity != Granularity::per_channel) throw ShapeError("layer " + dims + ": residual must be per_channel");
  specquant::validate(residual);
  if (plan.k.size() != c_out || plan.rho.size() != c_out) throw ShapeError("layer " + dims + ": budget plan length != c_out");
  for (std::size_t j = 0; j < c_out; ++j)
    if (plan.k[j] != spectra[j].retained()) throw ShapeError("layer " + dims + ": plan and spectra disagree on k");
}

std::size_t CompressedLayer::branch_parameters() const {
  std::size_t total = 0;
  for (const auto& s : spectra) total += 2 * s.retained();
  return total;
}

double CompressedLayer::bits_per_parameter() const {
  const double weights = static_cast<double>(c_in * c_out);
  if (weights == 0.0) return 0.0;
  const double bits = 16.0 * static_cast<double>(branch_parameters()) +
                      static_cast<double>(residual.bits) * weights + 16.0 * static_cast<double>(c_in) +
                      32.0 * static_cast<double>(residual.params.size());
  return bits / weights;
}

}  // namespace specquant
