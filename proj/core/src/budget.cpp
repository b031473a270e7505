// SPDX-License-Identifier: Apache-2.0
#include "specquant/budget.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "specquant/error.hpp"
#include "specquant/spectral.hpp"

namespace specquant {

std::string_view to_string(ImportanceMetric m) {
  switch (m) {
    case ImportanceMetric::abs_mean: return "abs-mean";
    case ImportanceMetric::abs_max: return "abs-max";
    case ImportanceMetric::l2_norm: return "l2-norm";
    case ImportanceMetric::spectral_entropy: return "spectral-entropy";
    case ImportanceMetric::activation_aware: return "activation-aware";
  }
  return "spectral-entropy";
}

ImportanceMetric metric_from_string(std::string_view s) {
  if (s == "abs-mean") return ImportanceMetric::abs_mean;
  if (s == "abs-max") return ImportanceMetric::abs_max;
  if (s == "l2-norm") return ImportanceMetric::l2_norm;
  if (s == "spectral-entropy") return ImportanceMetric::spectral_entropy;
  if (s == "activation-aware") return ImportanceMetric::activation_aware;
  throw ArgumentError("unknown importance metric '" + std::string(s) + "'");
}

double spectral_entropy(std::span<const double> channel) {
  if (channel.empty()) return 0.0;
  const auto half = fft(channel);
  double total = 0.0;
  for (const auto& c : half) total += std::norm(c);
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (const auto& c : half) {
    const double p = std::norm(c) / total;
    if (p > 0.0) h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

ImportanceVector importance(const Matrix& w_smoothed, const Matrix* x_calib, ImportanceMetric metric) {
  const std::size_t c_in = w_smoothed.rows();
  const std::size_t c_out = w_smoothed.cols();
  ImportanceVector out;
  out.metric = metric;
  out.scores.resize(c_out, 0.0);

  std::vector<double> activation_means;
  if (metric == ImportanceMetric::activation_aware) {
    if (x_calib == nullptr) throw ArgumentError("activation-aware importance requires calibration activations");
    if (x_calib->cols() != c_in) throw ShapeError("activation-aware importance: calibration width != C_in");
    if (c_in != c_out) {
      throw ShapeError("activation-aware importance pairs input and output channel j and is defined only for "
                       "square layers (got " + std::to_string(c_in) + "x" + std::to_string(c_out) + ")");
    }
    activation_means.assign(c_in, 0.0);
    for (std::size_t t = 0; t < x_calib->rows(); ++t)
      for (std::size_t j = 0; j < c_in; ++j) activation_means[j] += (*x_calib)(t, j);
    if (x_calib->rows() > 0)
      for (double& m : activation_means) m /= static_cast<double>(x_calib->rows());
  }

  for (std::size_t j = 0; j < c_out; ++j) {
    const auto col = w_smoothed.column(j);
    double score = 0.0;
    switch (metric) {
      case ImportanceMetric::abs_mean:
        for (double v : col) score += std::abs(v);
        score = c_in ? score / static_cast<double>(c_in) : 0.0;
        break;
      case ImportanceMetric::abs_max:
        score = max_abs(col);
        break;
      case ImportanceMetric::l2_norm:
        for (double v : col) score += v * v;
        score = std::sqrt(score);
        break;
      case ImportanceMetric::spectral_entropy:
        score = spectral_entropy(col);
        break;
      case ImportanceMetric::activation_aware: {
        double mean_w = std::accumulate(col.begin(), col.end(), 0.0);
        mean_w = c_in ? mean_w / static_cast<double>(c_in) : 0.0;
        score = std::abs(activation_means[j] * mean_w);
        break;
      }
    }
    out.scores[j] = score;
  }
  return out;
}

std::size_t BudgetPlan::allocated() const { return std::accumulate(k.begin(), k.end(), std::size_t{0}); }

std::vector<double> softmax(std::span<const double> scores, double alpha) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  // Subtract the extremum that maximizes alpha * score before scaling so
  // every exponent is <= 0.
  const double ref = alpha >= 0.0 ? *std::max_element(scores.begin(), scores.end())
                                  : *std::min_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(alpha * (scores[i] - ref));
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

BudgetPlan allocate(const ImportanceVector& scores, double alpha, std::size_t total_budget, std::size_t c_in) {
  const std::size_t c_out = scores.scores.size();
  if (!std::isfinite(alpha)) throw ArgumentError("allocate: temperature must be finite");
  if (total_budget < c_out) {
    throw ArgumentError("allocate: budget " + std::to_string(total_budget) + " is below one bin per channel (" +
                        std::to_string(c_out) + ")");
  }
  const std::size_t cap = half_spectrum_size(c_in);

  BudgetPlan plan;
  plan.alpha = alpha;
  plan.total_budget = total_budget;
  plan.rho = softmax(scores.scores, alpha);
  plan.k.resize(c_out);
  for (std::size_t j = 0; j < c_out; ++j) {
    const double provisional = std::floor(plan.rho[j] * static_cast<double>(total_budget));
    plan.k[j] = std::clamp<std::size_t>(static_cast<std::size_t>(provisional), 1, cap);
  }

  std::vector<std::size_t> order(c_out);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores.scores[a] > scores.scores[b]; });

  const std::size_t target = std::min(total_budget, cap * c_out);
  std::size_t sum = plan.allocated();
  while (sum < target) {
    for (std::size_t j : order) {
      if (sum == target) break;
      if (plan.k[j] < cap) {
        ++plan.k[j];
        ++sum;
      }
    }
  }
  while (sum > target) {
    for (auto it = order.rbegin(); it != order.rend() && sum > target; ++it) {
      if (plan.k[*it] > 1) {
        --plan.k[*it];
        --sum;
      }
    }
  }
  return plan;
}

BudgetPlan fixed_groups(std::size_t c_out, std::size_t groups, std::size_t c_in) {
  const std::size_t cap = half_spectrum_size(c_in);
  if (groups < 1 || groups > cap) {
    throw ArgumentError("fixed_groups: " + std::to_string(groups) + " bins per channel outside [1, " +
                        std::to_string(cap) + "]");
  }
  BudgetPlan plan;
  plan.alpha = 0.0;
  plan.total_budget = groups * c_out;
  plan.rho.assign(c_out, c_out ? 1.0 / static_cast<double>(c_out) : 0.0);
  plan.k.assign(c_out, groups);
  return plan;
}

}  // namespace specquant
