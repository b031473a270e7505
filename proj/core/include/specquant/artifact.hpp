// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "specquant/layer.hpp"

namespace specquant {

inline constexpr const char* kFormatVersion = "specquant/1";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kLambdaFile = "lambda.bin";
inline constexpr const char* kSpectraFile = "spectra.bin";
inline constexpr const char* kResidualFile = "residual.bin";

/// Bytes per retained bin: amplitude and phase as little-endian real64.
inline constexpr std::size_t kBytesPerBin = 2 * sizeof(double);
/// Bytes per bin if the frequency were stored next to amplitude and phase.
inline constexpr std::size_t kBytesPerBinExplicit = 3 * sizeof(double);

struct ArtifactManifest {
  std::string format_version = kFormatVersion;
  std::string layer_name;
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::string smoothing_factors = kLambdaFile;
  std::string spectra = kSpectraFile;
  std::string residual = kResidualFile;
  std::string metric;
  double temperature = 1.0;
  std::optional<double> compression_ratio;
  std::optional<std::size_t> groups;
  int residual_bits = 4;
};

/// Interleaved (A_0, phi_0, A_1, phi_1, ...) little-endian real64; exactly
/// kBytesPerBin * retained bytes.
std::vector<std::uint8_t> encode_spectrum(const ChannelSpectrum& spec);
ChannelSpectrum decode_spectrum(std::span<const std::uint8_t> bytes, std::size_t n);

/// Residual blob: c_out (delta, zero_point) real64 pairs, then the codes in
/// row-major order. Widths up to 4 bits pack two codes per byte (even flat
/// index in the low nibble); wider codes take one byte each.
std::vector<std::uint8_t> encode_residual(const QuantizedTensor& q);
QuantizedTensor decode_residual(std::span<const std::uint8_t> bytes, std::size_t rows, std::size_t cols, int bits);
std::size_t packed_code_bytes(std::size_t count, int bits);

/// Writes manifest.json, lambda.bin, spectra.bin and residual.bin into dir
/// (created if missing). Throws IoError when dir cannot be written.
ArtifactManifest save_compressed_layer(const CompressedLayer& layer, const std::filesystem::path& dir);

ArtifactManifest read_manifest(const std::filesystem::path& dir);

/// Inverse of save_compressed_layer; reproduces the layer bit for bit.
/// Blob sizes are checked against the manifest's c_in / c_out.
CompressedLayer load_compressed_layer(const std::filesystem::path& dir);

}  // namespace specquant
