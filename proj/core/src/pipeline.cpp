// SPDX-License-Identifier: Apache-2.0
#include "specquant/pipeline.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "specquant/error.hpp"
#include "specquant/parallel.hpp"

namespace specquant {

namespace {

void require_finite(const Matrix& m, const char* what) {
  for (double v : m.data())
    if (!std::isfinite(v)) throw DataError(std::string(what) + ": non-finite value");
}

// Spectra and W' for every channel of w_hat under the given plan.
void truncate_channels(const Matrix& w_hat, const BudgetPlan& plan, std::vector<ChannelSpectrum>& spectra,
                       Matrix& low) {
  const std::size_t c_in = w_hat.rows();
  spectra.resize(w_hat.cols());
  low = Matrix(c_in, w_hat.cols());
  std::vector<std::vector<double>> columns(w_hat.cols());
  parallel_for(w_hat.cols(), [&](std::size_t j) {
    const auto col = w_hat.column(j);
    spectra[j] = truncate_low_freq(fft(col), c_in, plan.k[j]);
    columns[j] = reconstruct(spectra[j]);
  });
  for (std::size_t j = 0; j < w_hat.cols(); ++j) low.set_column(j, columns[j]);
}

BudgetPlan make_plan(const Matrix& w_hat, const Matrix* x_calib, const CompressConfig& config) {
  const std::size_t c_in = w_hat.rows();
  const std::size_t c_out = w_hat.cols();
  if (config.groups) return fixed_groups(c_out, *config.groups, c_in);
  if (!config.ratio) throw ArgumentError("compress: either a ratio or a group count is required");
  const double ratio = *config.ratio;
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ArgumentError("compress: ratio must lie in (0, 1]");
  const std::size_t budget = spectral_budget(ratio, c_in, c_out);
  if (budget < c_out) {
    throw ArgumentError("compress: ratio " + std::to_string(ratio) + " gives " + std::to_string(budget) +
                        " coefficients, fewer than one per output channel (" + std::to_string(c_out) + ")");
  }
  return allocate(importance(w_hat, x_calib, config.metric), config.alpha, budget, c_in);
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

}  // namespace

SmoothingFactors compute_smoothing(const Matrix& x_calib, const Matrix& w, double s) {
  if (x_calib.cols() != w.rows()) {
    throw ShapeError("compute_smoothing: activations have " + std::to_string(x_calib.cols()) +
                     " channels, weight has " + std::to_string(w.rows()) + " input rows");
  }
  if (!(s >= 0.0 && s <= 1.0)) throw ArgumentError("compute_smoothing: migration strength must lie in [0, 1]");
  SmoothingFactors f;
  f.migration_strength = s;
  f.lambda.assign(w.rows(), 1.0);
  std::vector<double> act_max(w.rows(), 0.0);
  for (std::size_t t = 0; t < x_calib.rows(); ++t)
    for (std::size_t j = 0; j < w.rows(); ++j) act_max[j] = std::max(act_max[j], std::abs(x_calib(t, j)));
  for (std::size_t j = 0; j < w.rows(); ++j) {
    const double weight_max = max_abs(w.row(j));
    if (act_max[j] == 0.0 || weight_max == 0.0) continue;
    const double lambda = std::pow(act_max[j], s) / std::pow(weight_max, 1.0 - s);
    if (lambda > 0.0 && std::isfinite(lambda)) f.lambda[j] = lambda;
  }
  return f;
}

Matrix smooth_activations(const Matrix& x, const SmoothingFactors& f) {
  if (x.cols() != f.lambda.size()) throw ShapeError("smooth_activations: width != number of smoothing factors");
  Matrix out = x;
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t j = 0; j < x.cols(); ++j) out(t, j) /= f.lambda[j];
  return out;
}

Matrix smooth_weights(const Matrix& w, const SmoothingFactors& f) {
  if (w.rows() != f.lambda.size()) throw ShapeError("smooth_weights: rows != number of smoothing factors");
  Matrix out = w;
  for (std::size_t j = 0; j < w.rows(); ++j)
    for (double& v : out.row(j)) v *= f.lambda[j];
  return out;
}

std::pair<Matrix, Matrix> apply_smoothing(const Matrix& x, const Matrix& w, const SmoothingFactors& f) {
  return {smooth_activations(x, f), smooth_weights(w, f)};
}

std::vector<double> default_migration_grid() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }

std::size_t spectral_budget(double ratio, std::size_t c_in, std::size_t c_out) {
  const double capacity = static_cast<double>(c_out * half_spectrum_size(c_in));
  // The epsilon absorbs representation error in products like 0.2 * 1665.
  return static_cast<std::size_t>(std::floor(ratio * capacity + 1e-9));
}

CompressedLayer compress_layer(const Matrix& x_calib, const Matrix& w, const CompressConfig& config) {
  require_finite(x_calib, "compress_layer activations");
  require_finite(w, "compress_layer weights");
  const double s = config.migration_strength ? *config.migration_strength
                                             : select_migration_strength(x_calib, w, config);

  CompressedLayer layer;
  layer.layer_name = config.layer_name;
  layer.c_in = w.rows();
  layer.c_out = w.cols();
  layer.metric = config.metric;
  layer.ratio = config.groups ? std::nullopt : config.ratio;
  layer.groups = config.groups;
  layer.residual_quant = config.residual_quant;
  layer.smoothing = compute_smoothing(x_calib, w, s);

  const auto [x_hat, w_hat] = apply_smoothing(x_calib, w, layer.smoothing);
  layer.plan = make_plan(w_hat, &x_calib, config);

  Matrix low;
  truncate_channels(w_hat, layer.plan, layer.spectra, low);
  const Matrix residual = w_hat - low;
  if (config.residual_quant == ResidualQuant::compensated)
    layer.residual = quantize_residual_compensated(residual, config.residual_bits, x_hat);
  else
    layer.residual = quantize(residual, config.residual_bits, Granularity::per_channel);
  return layer;
}

double migration_loss(const Matrix& x_calib, const Matrix& w, const CompressConfig& config, double s) {
  CompressConfig fixed = config;
  fixed.migration_strength = s;
  const CompressedLayer layer = compress_layer(x_calib, w, fixed);
  const Matrix approx = forward_approx(x_calib, layer, config.activation_bits);
  return std::pow(frobenius_distance(matmul(x_calib, w), approx), 2);
}

double select_migration_strength(const Matrix& x_calib, const Matrix& w, const CompressConfig& config) {
  if (config.grid.empty()) throw ArgumentError("select_migration_strength: empty grid");
  std::vector<double> losses(config.grid.size());
  parallel_for(config.grid.size(), [&](std::size_t i) { losses[i] = migration_loss(x_calib, w, config, config.grid[i]); });
  double best_s = config.grid[0];
  double best_loss = losses[0];
  for (std::size_t i = 1; i < config.grid.size(); ++i) {
    const double s = config.grid[i];
    if (losses[i] < best_loss || (losses[i] == best_loss && s < best_s)) {
      best_loss = losses[i];
      best_s = s;
    }
  }
  return best_s;
}

double round_to_half(double v) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  int exponent = 0;
  std::frexp(v, &exponent);
  // Leading bit sits at 2^(exponent - 1); binary16 keeps 10 fraction bits
  // and stops normalizing below 2^-14.
  const int lead = std::max(exponent - 1, -14);
  const double quantum = std::ldexp(1.0, lead - 10);
  const double rounded = std::nearbyint(v / quantum) * quantum;
  if (std::abs(rounded) > 65504.0) return std::copysign(std::numeric_limits<double>::infinity(), v);
  return rounded;
}

Matrix fake_quantize(const Matrix& x, int bits, Granularity g) { return dequantize(quantize(x, bits, g)); }

Matrix forward_approx(const Matrix& x, const CompressedLayer& layer, int activation_bits, bool half_precision_branch) {
  if (x.cols() != layer.c_in) {
    throw ShapeError("forward_approx: activations have " + std::to_string(x.cols()) + " channels, layer expects " +
                     std::to_string(layer.c_in));
  }
  if (activation_bits != kUnquantizedActivations && (activation_bits < kMinBits || activation_bits > kMaxBits)) {
    throw ArgumentError("forward_approx: activation bits must lie in [2, 8] or equal 16");
  }
  Matrix x_hat = smooth_activations(x, layer.smoothing);
  Matrix low = layer.low_frequency_branch();

  Matrix branch_x = x_hat;
  if (half_precision_branch) {
    for (double& v : branch_x.data()) v = round_to_half(v);
    for (double& v : low.data()) v = round_to_half(v);
  }
  const Matrix high_precision = matmul(branch_x, low);

  const Matrix quant_x = activation_bits == kUnquantizedActivations
                             ? x_hat
                             : fake_quantize(x_hat, activation_bits, Granularity::per_token);
  return high_precision + matmul(quant_x, dequantize(layer.residual));
}

SvdApproximation svd_rank(const Matrix& w_hat, std::size_t rank) {
  SvdApproximation out;
  const std::size_t full = std::min(w_hat.rows(), w_hat.cols());
  if (rank > full) rank = full;
  out.rank = rank;
  out.low_rank = Matrix(w_hat.rows(), w_hat.cols());
  if (full == 0) {
    out.residual = w_hat;
    return out;
  }
  const Eigen::MatrixXd a = to_eigen(w_hat);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sigma = svd.singularValues();
  out.singular_values.assign(sigma.data(), sigma.data() + sigma.size());
  if (rank > 0) {
    const Eigen::MatrixXd approx = svd.matrixU().leftCols(rank) * sigma.head(rank).asDiagonal() *
                                   svd.matrixV().leftCols(rank).transpose();
    for (std::size_t r = 0; r < w_hat.rows(); ++r)
      for (std::size_t c = 0; c < w_hat.cols(); ++c) out.low_rank(r, c) = approx(r, c);
  }
  out.residual = w_hat - out.low_rank;
  return out;
}

SvdApproximation svd_baseline(const Matrix& w_hat, std::size_t budget) {
  const std::size_t per_triplet = w_hat.rows() + w_hat.cols() + 1;
  if (budget < per_triplet) {
    throw ArgumentError("svd_baseline: budget " + std::to_string(budget) + " below one singular triplet (" +
                        std::to_string(per_triplet) + " parameters)");
  }
  return svd_rank(w_hat, budget / per_triplet);
}

BudgetComparison compare_budgets(const Matrix& w_hat, const Matrix* x_calib, double ratio, ImportanceMetric metric,
                                 double alpha) {
  require_finite(w_hat, "compare_budgets weights");
  CompressConfig config;
  config.ratio = ratio;
  config.metric = metric;
  config.alpha = alpha;

  BudgetComparison out;
  out.ratio = ratio;
  const BudgetPlan plan = make_plan(w_hat, x_calib, config);
  out.k = plan.k;

  std::vector<ChannelSpectrum> spectra;
  Matrix low;
  truncate_channels(w_hat, plan, spectra, low);
  out.b_spectral = 2 * plan.allocated();
  out.error_spectral = frobenius_distance(w_hat, low);
  out.channel_tail_energy.resize(w_hat.cols());
  for (std::size_t j = 0; j < w_hat.cols(); ++j) {
    double e = 0.0;
    for (std::size_t r = 0; r < w_hat.rows(); ++r) e += std::pow(w_hat(r, j) - low(r, j), 2);
    out.channel_tail_energy[j] = e;
  }

  const std::size_t per_triplet = w_hat.rows() + w_hat.cols() + 1;
  const SvdApproximation svd = svd_rank(w_hat, out.b_spectral / per_triplet);
  out.k_svd = svd.rank;
  out.b_svd = out.k_svd * per_triplet;
  out.error_svd = frobenius_distance(w_hat, svd.low_rank);
  for (std::size_t i = svd.rank; i < svd.singular_values.size(); ++i)
    out.svd_tail_energy += svd.singular_values[i] * svd.singular_values[i];
  return out;
}

std::vector<MatmulEval> evaluate_matmul(const Matrix& x, const Matrix& w, const CompressedLayer& layer,
                                        int activation_bits, int weight_bits) {
  if (w.rows() != layer.c_in || w.cols() != layer.c_out) throw ShapeError("evaluate_matmul: weight/layer shape mismatch");
  const Matrix reference = matmul(x, w);
  std::vector<MatmulEval> rows;
  rows.push_back({"fp-reference", frobenius_distance(reference, reference)});

  const Matrix naive = matmul(fake_quantize(x, activation_bits, Granularity::per_token),
                              fake_quantize(w, weight_bits, Granularity::per_channel));
  rows.push_back({"naive-W" + std::to_string(weight_bits) + "A" + std::to_string(activation_bits),
                  frobenius_distance(reference, naive)});

  const auto [x_hat, w_hat] = apply_smoothing(x, w, layer.smoothing);
  const Matrix smooth = matmul(fake_quantize(x_hat, activation_bits, Granularity::per_token),
                               fake_quantize(w_hat, weight_bits, Granularity::per_channel));
  rows.push_back({"smooth-only-W" + std::to_string(weight_bits) + "A" + std::to_string(activation_bits),
                  frobenius_distance(reference, smooth)});

  rows.push_back({"specquant", frobenius_distance(reference, forward_approx(x, layer, activation_bits))});
  return rows;
}

}  // namespace specquant
