// SPDX-License-Identifier: Apache-2.0
#include "specquant/quant.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "specquant/error.hpp"

namespace specquant {

namespace {

void require_bits(int bits) {
  if (bits < kMinBits || bits > kMaxBits) {
    throw ArgumentError("bit width " + std::to_string(bits) + " outside [" +
                        std::to_string(kMinBits) + ", " + std::to_string(kMaxBits) + "]");
  }
}

std::vector<double> gather_slice(const Matrix& x, Granularity g, std::size_t s) {
  switch (g) {
    case Granularity::per_token: {
      auto row = x.row(s);
      return {row.begin(), row.end()};
    }
    case Granularity::per_channel:
      return x.column(s);
    case Granularity::per_tensor:
      return x.values();
  }
  return {};
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

}  // namespace

std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::per_token: return "per_token";
    case Granularity::per_channel: return "per_channel";
    case Granularity::per_tensor: return "per_tensor";
  }
  return "per_tensor";
}

Granularity granularity_from_string(std::string_view s) {
  if (s == "per_token") return Granularity::per_token;
  if (s == "per_channel") return Granularity::per_channel;
  if (s == "per_tensor") return Granularity::per_tensor;
  throw FormatError("unknown granularity '" + std::string(s) + "'");
}

std::string_view to_string(Compensation c) {
  switch (c) {
    case Compensation::none: return "none";
    case Compensation::applied: return "applied";
    case Compensation::singular_gram: return "singular_gram";
    case Compensation::no_gain: return "no_gain";
  }
  return "none";
}

Compensation compensation_from_string(std::string_view s) {
  if (s == "none") return Compensation::none;
  if (s == "applied") return Compensation::applied;
  if (s == "singular_gram") return Compensation::singular_gram;
  if (s == "no_gain") return Compensation::no_gain;
  throw FormatError("unknown compensation state '" + std::string(s) + "'");
}

std::size_t slice_count(Granularity g, std::size_t rows, std::size_t cols) {
  switch (g) {
    case Granularity::per_token: return rows;
    case Granularity::per_channel: return cols;
    case Granularity::per_tensor: return rows * cols == 0 ? 0 : 1;
  }
  return 0;
}

std::size_t QuantizedTensor::slice_of(std::size_t r, std::size_t c) const {
  switch (granularity) {
    case Granularity::per_token: return r;
    case Granularity::per_channel: return c;
    case Granularity::per_tensor: return 0;
  }
  return 0;
}

QuantParams compute_params(std::span<const double> slice, int bits) {
  require_bits(bits);
  if (slice.empty()) throw ArgumentError("compute_params: empty slice");
  double lo = slice[0];
  double hi = slice[0];
  for (double v : slice) {
    if (!std::isfinite(v)) throw DataError("compute_params: non-finite value in slice");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  QuantParams p;
  p.bits = bits;
  if (hi == lo) {
    p.delta = 1.0;
    p.zero_point = -lo;
    return p;
  }
  p.delta = (hi - lo) / static_cast<double>(p.max_code());
  p.zero_point = -lo / p.delta;
  return p;
}

std::uint8_t quantize_value(double x, const QuantParams& p) {
  const double scaled = std::clamp(x / p.delta + p.zero_point, 0.0, static_cast<double>(p.max_code()));
  // std::round is half-away-from-zero.
  return static_cast<std::uint8_t>(std::round(scaled));
}

double dequantize_value(std::uint8_t code, const QuantParams& p) {
  return (static_cast<double>(code) - p.zero_point) * p.delta;
}

QuantizedTensor quantize(const Matrix& x, int bits, Granularity granularity) {
  require_bits(bits);
  QuantizedTensor q;
  q.rows = x.rows();
  q.cols = x.cols();
  q.granularity = granularity;
  q.bits = bits;
  const std::size_t slices = slice_count(granularity, x.rows(), x.cols());
  q.params.reserve(slices);
  for (std::size_t s = 0; s < slices; ++s) q.params.push_back(compute_params(gather_slice(x, granularity, s), bits));
  q.codes.resize(x.size());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c)
      q.codes[r * x.cols() + c] = quantize_value(x(r, c), q.params[q.slice_of(r, c)]);
  return q;
}

QuantizedTensor quantize_with_params(const Matrix& x, const QuantizedTensor& layout) {
  if (x.rows() != layout.rows || x.cols() != layout.cols)
    throw ShapeError("quantize_with_params: shape mismatch");
  QuantizedTensor q = layout;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c)
      q.codes[r * x.cols() + c] = quantize_value(x(r, c), q.params[q.slice_of(r, c)]);
  return q;
}

Matrix dequantize(const QuantizedTensor& q) {
  validate(q);
  Matrix out(q.rows, q.cols);
  for (std::size_t r = 0; r < q.rows; ++r)
    for (std::size_t c = 0; c < q.cols; ++c)
      out(r, c) = dequantize_value(q.codes[r * q.cols + c], q.params[q.slice_of(r, c)]);
  return out;
}

void validate(const QuantizedTensor& q) {
  if (q.codes.size() != q.rows * q.cols) throw ShapeError("QuantizedTensor: code count does not match shape");
  const std::size_t slices = slice_count(q.granularity, q.rows, q.cols);
  if (q.params.size() != slices) {
    throw ShapeError("QuantizedTensor: expected " + std::to_string(slices) + " parameter sets, found " +
                     std::to_string(q.params.size()));
  }
  require_bits(q.bits);
  const int max_code = (1 << q.bits) - 1;
  for (const auto& p : q.params) {
    if (p.bits != q.bits) throw DataError("QuantizedTensor: slice bit width differs from tensor bit width");
    if (!(p.delta > 0.0) || !std::isfinite(p.delta) || !std::isfinite(p.zero_point))
      throw DataError("QuantizedTensor: invalid step size or zero point");
  }
  for (auto code : q.codes)
    if (code > max_code) throw DataError("QuantizedTensor: code outside [0, 2^b - 1]");
}

double calibration_weighted_error(const Matrix& x_calib, const Matrix& r, const QuantizedTensor& q) {
  const Matrix diff = r - dequantize(q);
  return std::pow(frobenius_norm(matmul(x_calib, diff)), 2);
}

QuantizedTensor quantize_residual_compensated(const Matrix& r, int bits, const Matrix& x_calib,
                                              double damping_fraction) {
  require_bits(bits);
  if (x_calib.cols() != r.rows()) {
    throw ShapeError("quantize_residual_compensated: calibration has " + std::to_string(x_calib.cols()) +
                     " channels, residual has " + std::to_string(r.rows()) + " input rows");
  }
  QuantizedTensor rtn = quantize(r, bits, Granularity::per_channel);
  rtn.compensation = Compensation::singular_gram;
  const std::size_t n = r.rows();
  if (n == 0 || r.cols() == 0) {
    rtn.compensation = Compensation::applied;
    return rtn;
  }

  const Eigen::MatrixXd x = to_eigen(x_calib);
  Eigen::MatrixXd gram = x.transpose() * x;
  const double mean_diag = gram.diagonal().mean();
  if (!(mean_diag > 0.0) || !std::isfinite(mean_diag)) return rtn;
  gram.diagonal().array() += damping_fraction * mean_diag;

  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) return rtn;
  const Eigen::MatrixXd inverse = llt.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::LLT<Eigen::MatrixXd> inverse_llt(inverse);
  if (inverse_llt.info() != Eigen::Success) return rtn;
  // Upper factor U with inverse = U^T U; row i of U drives the update of the
  // rows after i once row i is fixed.
  const Eigen::MatrixXd upper = inverse_llt.matrixU();

  QuantizedTensor out = rtn;
  Matrix work = r;
  for (std::size_t i = 0; i < n; ++i) {
    const double pivot = upper(i, i);
    for (std::size_t c = 0; c < r.cols(); ++c) {
      const auto& p = out.params[c];
      const std::uint8_t code = quantize_value(work(i, c), p);
      out.codes[i * r.cols() + c] = code;
      const double err = (work(i, c) - dequantize_value(code, p)) / pivot;
      for (std::size_t l = i + 1; l < n; ++l) work(l, c) -= err * upper(i, l);
    }
  }

  const double compensated_error = calibration_weighted_error(x_calib, r, out);
  const double rtn_error = calibration_weighted_error(x_calib, r, rtn);
  if (compensated_error > rtn_error) {
    rtn.compensation = Compensation::no_gain;
    return rtn;
  }
  out.compensation = Compensation::applied;
  return out;
}

}  // namespace specquant
