// SPDX-License-Identifier: Apache-2.0
#include "specquant/artifact.hpp"

#include <bit>
#include <nlohmann/json.hpp>
#include <numeric>
#include <string>
#include <system_error>

#include "specquant/error.hpp"
#include "specquant/npy.hpp"

namespace specquant {

namespace {

using nlohmann::json;

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

double get_f64(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(in[offset + b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

std::vector<std::uint8_t> encode_f64(std::span<const double> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 8);
  for (double v : values) put_f64(out, v);
  return out;
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw FormatError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(where + ": field '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

json load_json(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void require_size(const std::filesystem::path& file, std::size_t actual, std::size_t expected) {
  if (actual != expected) {
    throw ShapeError(file.string() + ": " + std::to_string(actual) + " bytes, manifest implies " +
                     std::to_string(expected));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_spectrum(const ChannelSpectrum& spec) {
  std::vector<std::uint8_t> out;
  out.reserve(spec.retained() * kBytesPerBin);
  for (std::size_t m = 0; m < spec.retained(); ++m) {
    put_f64(out, spec.amps[m]);
    put_f64(out, spec.phases[m]);
  }
  return out;
}

ChannelSpectrum decode_spectrum(std::span<const std::uint8_t> bytes, std::size_t n) {
  if (bytes.size() % kBytesPerBin != 0) throw ShapeError("spectrum blob is not a whole number of bins");
  ChannelSpectrum spec;
  spec.n = n;
  const std::size_t k = bytes.size() / kBytesPerBin;
  spec.amps.resize(k);
  spec.phases.resize(k);
  for (std::size_t m = 0; m < k; ++m) {
    spec.amps[m] = get_f64(bytes, m * kBytesPerBin);
    spec.phases[m] = get_f64(bytes, m * kBytesPerBin + 8);
  }
  return spec;
}

std::size_t packed_code_bytes(std::size_t count, int bits) { return bits <= 4 ? (count + 1) / 2 : count; }

std::vector<std::uint8_t> encode_residual(const QuantizedTensor& q) {
  validate(q);
  std::vector<std::uint8_t> out;
  out.reserve(q.params.size() * 16 + packed_code_bytes(q.codes.size(), q.bits));
  for (const auto& p : q.params) {
    put_f64(out, p.delta);
    put_f64(out, p.zero_point);
  }
  if (q.bits <= 4) {
    for (std::size_t i = 0; i < q.codes.size(); i += 2) {
      const std::uint8_t lo = q.codes[i];
      const std::uint8_t hi = i + 1 < q.codes.size() ? q.codes[i + 1] : 0;
      out.push_back(static_cast<std::uint8_t>(lo | (hi << 4)));
    }
  } else {
    out.insert(out.end(), q.codes.begin(), q.codes.end());
  }
  return out;
}

QuantizedTensor decode_residual(std::span<const std::uint8_t> bytes, std::size_t rows, std::size_t cols, int bits) {
  QuantizedTensor q;
  q.rows = rows;
  q.cols = cols;
  q.bits = bits;
  q.granularity = Granularity::per_channel;
  const std::size_t count = rows * cols;
  const std::size_t expected = cols * 16 + packed_code_bytes(count, bits);
  if (bytes.size() != expected) {
    throw ShapeError("residual blob has " + std::to_string(bytes.size()) + " bytes, expected " +
                     std::to_string(expected));
  }
  q.params.resize(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    q.params[c].bits = bits;
    q.params[c].delta = get_f64(bytes, c * 16);
    q.params[c].zero_point = get_f64(bytes, c * 16 + 8);
  }
  const auto codes = bytes.subspan(cols * 16);
  q.codes.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    q.codes[i] = bits <= 4 ? static_cast<std::uint8_t>((codes[i / 2] >> (4 * (i % 2))) & 0x0f) : codes[i];
  }
  validate(q);
  return q;
}

ArtifactManifest save_compressed_layer(const CompressedLayer& layer, const std::filesystem::path& dir) {
  layer.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create artifact directory '" + dir.string() + "': " + ec.message());

  ArtifactManifest manifest;
  manifest.layer_name = layer.layer_name;
  manifest.c_in = layer.c_in;
  manifest.c_out = layer.c_out;
  manifest.metric = std::string(to_string(layer.metric));
  manifest.temperature = layer.plan.alpha;
  manifest.compression_ratio = layer.ratio;
  manifest.groups = layer.groups;
  manifest.residual_bits = layer.residual.bits;

  std::vector<std::uint8_t> spectra;
  std::vector<std::size_t> retained;
  for (const auto& s : layer.spectra) {
    const auto bytes = encode_spectrum(s);
    spectra.insert(spectra.end(), bytes.begin(), bytes.end());
    retained.push_back(s.retained());
  }

  json j;
  j["format_version"] = manifest.format_version;
  j["layer_name"] = manifest.layer_name;
  j["c_in"] = manifest.c_in;
  j["c_out"] = manifest.c_out;
  j["smoothing_factors"] = {{"file", manifest.smoothing_factors},
                            {"dtype", "<f8"},
                            {"count", layer.c_in},
                            {"migration_strength", layer.smoothing.migration_strength}};
  j["spectra"] = {{"file", manifest.spectra},
                  {"dtype", "<f8"},
                  {"layout", "per channel, bins 0..k-1, interleaved amplitude/phase"},
                  {"retained", retained}};
  j["residual"] = {{"file", manifest.residual},
                   {"bits", layer.residual.bits},
                   {"granularity", std::string(to_string(layer.residual.granularity))},
                   {"packing", layer.residual.bits <= 4 ? "two codes per byte, low nibble first" : "one code per byte"},
                   {"quantizer", std::string(to_string(layer.residual_quant))},
                   {"compensation", std::string(to_string(layer.residual.compensation))}};
  j["budget_meta"] = {{"metric", manifest.metric},
                      {"temperature", manifest.temperature},
                      {"compression_ratio", manifest.compression_ratio ? json(*manifest.compression_ratio) : json()},
                      {"groups", manifest.groups ? json(*manifest.groups) : json()},
                      {"total_budget", layer.plan.total_budget},
                      {"rho", layer.plan.rho}};
  j["residual_bits"] = manifest.residual_bits;

  const std::string text = j.dump(2) + "\n";
  write_file(dir / kManifestFile, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  write_file(dir / kLambdaFile, encode_f64(layer.smoothing.lambda));
  write_file(dir / kSpectraFile, spectra);
  write_file(dir / kResidualFile, encode_residual(layer.residual));
  return manifest;
}

ArtifactManifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifestFile;
  const json j = load_json(path);
  const std::string where = path.string();
  ArtifactManifest m;
  m.format_version = field<std::string>(j, "format_version", where);
  if (m.format_version != kFormatVersion) {
    throw FormatError(where + ": format_version '" + m.format_version + "' is not '" + kFormatVersion + "'");
  }
  m.layer_name = field<std::string>(j, "layer_name", where);
  m.c_in = field<std::size_t>(j, "c_in", where);
  m.c_out = field<std::size_t>(j, "c_out", where);
  m.smoothing_factors = field<std::string>(field<json>(j, "smoothing_factors", where), "file", where);
  m.spectra = field<std::string>(field<json>(j, "spectra", where), "file", where);
  m.residual = field<std::string>(field<json>(j, "residual", where), "file", where);
  const auto meta = field<json>(j, "budget_meta", where);
  m.metric = field<std::string>(meta, "metric", where);
  m.temperature = field<double>(meta, "temperature", where);
  m.compression_ratio = optional_field<double>(meta, "compression_ratio");
  m.groups = optional_field<std::size_t>(meta, "groups");
  m.residual_bits = field<int>(j, "residual_bits", where);
  return m;
}

CompressedLayer load_compressed_layer(const std::filesystem::path& dir) {
  const ArtifactManifest m = read_manifest(dir);
  const json j = load_json(dir / kManifestFile);
  const std::string where = (dir / kManifestFile).string();

  CompressedLayer layer;
  layer.layer_name = m.layer_name;
  layer.c_in = m.c_in;
  layer.c_out = m.c_out;
  layer.metric = metric_from_string(m.metric);
  layer.ratio = m.compression_ratio;
  layer.groups = m.groups;

  const auto smoothing = field<json>(j, "smoothing_factors", where);
  layer.smoothing.migration_strength = field<double>(smoothing, "migration_strength", where);
  const auto lambda_path = dir / m.smoothing_factors;
  const auto lambda_bytes = read_file(lambda_path);
  require_size(lambda_path, lambda_bytes.size(), 8 * m.c_in);
  layer.smoothing.lambda.resize(m.c_in);
  for (std::size_t i = 0; i < m.c_in; ++i) layer.smoothing.lambda[i] = get_f64(lambda_bytes, 8 * i);

  const auto retained = field<std::vector<std::size_t>>(field<json>(j, "spectra", where), "retained", where);
  if (retained.size() != m.c_out) {
    throw ShapeError(where + ": " + std::to_string(retained.size()) + " retained counts for c_out = " +
                     std::to_string(m.c_out));
  }
  for (std::size_t k : retained) {
    if (k < 1 || k > half_spectrum_size(m.c_in))
      throw ShapeError(where + ": retained count " + std::to_string(k) + " invalid for c_in = " + std::to_string(m.c_in));
  }
  const auto spectra_path = dir / m.spectra;
  const auto spectra_bytes = read_file(spectra_path);
  const std::size_t total_bins = std::accumulate(retained.begin(), retained.end(), std::size_t{0});
  require_size(spectra_path, spectra_bytes.size(), total_bins * kBytesPerBin);
  std::size_t offset = 0;
  for (std::size_t k : retained) {
    layer.spectra.push_back(
        decode_spectrum(std::span(spectra_bytes).subspan(offset, k * kBytesPerBin), m.c_in));
    offset += k * kBytesPerBin;
  }

  const auto residual_meta = field<json>(j, "residual", where);
  layer.residual_quant = residual_quant_from_string(field<std::string>(residual_meta, "quantizer", where));
  const auto residual_path = dir / m.residual;
  const auto residual_bytes = read_file(residual_path);
  require_size(residual_path, residual_bytes.size(), 16 * m.c_out + packed_code_bytes(m.c_in * m.c_out, m.residual_bits));
  layer.residual = decode_residual(residual_bytes, m.c_in, m.c_out, m.residual_bits);
  layer.residual.compensation = compensation_from_string(field<std::string>(residual_meta, "compensation", where));

  const auto meta = field<json>(j, "budget_meta", where);
  layer.plan.alpha = m.temperature;
  layer.plan.total_budget = field<std::size_t>(meta, "total_budget", where);
  layer.plan.rho = field<std::vector<double>>(meta, "rho", where);
  layer.plan.k = retained;
  layer.validate();
  return layer;
}

}  // namespace specquant
