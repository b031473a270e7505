// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "specquant/matrix.hpp"

namespace specquant {

enum class ImportanceMetric { abs_mean, abs_max, l2_norm, spectral_entropy, activation_aware };

/// CLI spelling: abs-mean, abs-max, l2-norm, spectral-entropy, activation-aware.
std::string_view to_string(ImportanceMetric m);
ImportanceMetric metric_from_string(std::string_view s);

struct ImportanceVector {
  ImportanceMetric metric = ImportanceMetric::spectral_entropy;
  std::vector<double> scores;  ///< one per output channel
};

/// Shannon entropy (base 2) of the normalized |A_f|^2 distribution over the
/// half-spectrum of one channel; 0 for a zero-energy channel.
double spectral_entropy(std::span<const double> channel);

/// Scores every output channel (column) of the smoothed weight. The
/// activation-aware metric |mean(X[:, j]) * mean(W[:, j])| needs calibration
/// data and, since it pairs input and output channel j, a square layer.
ImportanceVector importance(const Matrix& w_smoothed, const Matrix* x_calib, ImportanceMetric metric);

struct BudgetPlan {
  std::vector<double> rho;         ///< softmax weights, sum to 1
  std::vector<std::size_t> k;      ///< retained bins per channel
  double alpha = 1.0;              ///< softmax temperature
  std::size_t total_budget = 0;    ///< retained complex coefficients requested

  std::size_t allocated() const;
  friend bool operator==(const BudgetPlan&, const BudgetPlan&) = default;
};

/// Numerically stable softmax of alpha * scores.
std::vector<double> softmax(std::span<const double> scores, double alpha);

/// Provisional k_j = floor(rho_j * total_budget), clamped to
/// [1, floor(c_in/2) + 1]. Any shortfall is handed out one bin at a time in
/// descending score order (ties by ascending channel index); any excess
/// caused by the floor of 1 is taken back in the reverse order. The final
/// sum is min(total_budget, sum of caps).
BudgetPlan allocate(const ImportanceVector& scores, double alpha, std::size_t total_budget, std::size_t c_in);

/// Every channel keeps exactly `groups` bins; groups must lie in
/// [1, floor(c_in/2) + 1].
BudgetPlan fixed_groups(std::size_t c_out, std::size_t groups, std::size_t c_in);

}  // namespace specquant
