// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "specquant/layer.hpp"

namespace specquant {

/// lambda_j = max|X[:, j]|^s / max|W[j, :]|^(1 - s). A channel whose
/// activation or weight row is entirely zero keeps lambda_j = 1.
SmoothingFactors compute_smoothing(const Matrix& x_calib, const Matrix& w, double s);

/// X diag(lambda)^-1: column j divided by lambda_j.
Matrix smooth_activations(const Matrix& x, const SmoothingFactors& f);
/// diag(lambda) W: row j multiplied by lambda_j.
Matrix smooth_weights(const Matrix& w, const SmoothingFactors& f);
std::pair<Matrix, Matrix> apply_smoothing(const Matrix& x, const Matrix& w, const SmoothingFactors& f);

/// Default migration-strength search grid {0.1, ..., 0.9}.
std::vector<double> default_migration_grid();

struct CompressConfig {
  std::optional<double> ratio = 0.2;       ///< fraction of the half-spectrum kept
  std::optional<std::size_t> groups;       ///< fixed bins per channel; overrides ratio
  ImportanceMetric metric = ImportanceMetric::spectral_entropy;
  double alpha = 1.0;
  int residual_bits = 4;
  int activation_bits = 4;                 ///< used by the migration-strength search
  std::optional<double> migration_strength = 0.5;  ///< nullopt selects from `grid`
  std::vector<double> grid = default_migration_grid();
  ResidualQuant residual_quant = ResidualQuant::rtn;
  std::string layer_name = "layer";
};

/// Complex coefficients kept across the layer in ratio mode:
/// floor(ratio * c_out * (floor(c_in/2) + 1)). ratio = 1 keeps every bin.
std::size_t spectral_budget(double ratio, std::size_t c_in, std::size_t c_out);

/// Smooths, truncates every output channel of diag(lambda) W to its budgeted
/// low band, and quantizes the residual per output channel.
CompressedLayer compress_layer(const Matrix& x_calib, const Matrix& w, const CompressConfig& config);

/// Grid search over s minimizing ||X W - forward_approx(X, layer)||_F^2 on the
/// calibration set, each candidate built with the full compress path. Ties
/// go to the smaller s.
double select_migration_strength(const Matrix& x_calib, const Matrix& w, const CompressConfig& config);

/// Calibration loss of one candidate strength (the quantity minimized above).
double migration_loss(const Matrix& x_calib, const Matrix& w, const CompressConfig& config, double s);

/// Passing this as activation_bits leaves the residual-branch activations in
/// floating point.
inline constexpr int kUnquantizedActivations = 16;

/// X_hat W' + Q(X_hat) Q(R) with X_hat = X diag(lambda)^-1; Q(X_hat) is
/// per-token at activation_bits. With half_precision_branch, X_hat and W'
/// are rounded to the binary16 grid before the branch product.
Matrix forward_approx(const Matrix& x, const CompressedLayer& layer, int activation_bits,
                      bool half_precision_branch = false);

/// Nearest binary16 value (round half to even), returned as a double.
double round_to_half(double v);

/// dequantize(quantize(x, bits, g)).
Matrix fake_quantize(const Matrix& x, int bits, Granularity g);

struct SvdApproximation {
  Matrix low_rank;
  Matrix residual;
  std::size_t rank = 0;
  std::vector<double> singular_values;  ///< all of them, descending
};

/// Best rank-k approximation with k = floor(budget / (c_in + c_out + 1)).
SvdApproximation svd_baseline(const Matrix& w_hat, std::size_t budget);

/// Same, with the rank given directly (0 allowed: the approximation is zero).
SvdApproximation svd_rank(const Matrix& w_hat, std::size_t rank);

struct BudgetComparison {
  double ratio = 0.0;
  std::size_t b_spectral = 0;  ///< 2 * sum_j k_j
  std::size_t b_svd = 0;       ///< k_svd * (c_in + c_out + 1)
  std::size_t k_svd = 0;
  double error_spectral = 0.0;  ///< ||W - W'||_F
  double error_svd = 0.0;       ///< ||W - W_svd||_F
  std::vector<double> channel_tail_energy;  ///< squared L2 loss of each channel
  double svd_tail_energy = 0.0;             ///< sum_{i > k} sigma_i^2
  std::vector<std::size_t> k;
};

/// Truncates w_hat channel-wise at `ratio` and compares with the truncated
/// SVD of the same parameter count. Smoothing is not applied; x_calib is only
/// consulted by the activation-aware metric.
BudgetComparison compare_budgets(const Matrix& w_hat, const Matrix* x_calib, double ratio,
                                 ImportanceMetric metric = ImportanceMetric::spectral_entropy, double alpha = 1.0);

/// Frobenius error of each method against the full-precision product X W.
struct MatmulEval {
  std::string method;
  double frobenius_error = 0.0;
};

/// Rows: fp-reference, naive, smooth-only, specquant. The naive and
/// smooth-only rows quantize activations per token at activation_bits and
/// weights per channel at weight_bits; smooth-only reuses the layer's lambda.
std::vector<MatmulEval> evaluate_matmul(const Matrix& x, const Matrix& w, const CompressedLayer& layer,
                                        int activation_bits, int weight_bits);

}  // namespace specquant
