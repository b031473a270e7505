// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "specquant/artifact.hpp"
#include "specquant/error.hpp"
#include "specquant/npy.hpp"
#include "specquant/synthetic.hpp"

namespace specquant::cli {

namespace {

using nlohmann::json;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// CSV goes to `out` when set, stdout otherwise.
void emit_csv(const RunConfig& cfg, const std::string& csv, std::ostream& log) {
  if (cfg.out.empty()) {
    std::fputs(csv.c_str(), stdout);
    return;
  }
  if (cfg.out.has_parent_path()) std::filesystem::create_directories(cfg.out.parent_path());
  write_text(cfg.out, csv);
  log << "wrote " << cfg.out.string() << "\n";
}

json config_json(const RunConfig& cfg) {
  json j;
  j["command"] = cfg.command;
  j["weights"] = cfg.weights.string();
  j["calib"] = cfg.calib.string();
  j["artifact"] = cfg.artifact.string();
  j["ratio"] = cfg.ratio ? json(*cfg.ratio) : json();
  j["groups"] = cfg.groups ? json(*cfg.groups) : json();
  j["metric"] = cfg.metric;
  j["alpha"] = cfg.alpha;
  j["residual_bits"] = cfg.residual_bits;
  j["act_bits"] = cfg.activation_bits;
  j["smooth"] = cfg.smooth;
  j["residual_quant"] = cfg.residual_quant;
  j["seed"] = cfg.seed;
  j["calib_rows"] = cfg.calib_rows ? json(*cfg.calib_rows) : json();
  return j;
}

struct Inputs {
  Matrix w;
  Matrix x;
};

Inputs load_inputs(const RunConfig& cfg) {
  if (cfg.weights.empty()) throw ArgumentError("--weights is required");
  if (cfg.calib.empty()) throw ArgumentError("--calib is required");
  Inputs in;
  in.w = load_matrix(cfg.weights);
  in.x = load_calibration(cfg.calib, in.w.rows(), cfg.calib_rows);
  return in;
}

}  // namespace

CompressConfig to_compress_config(const RunConfig& cfg) {
  CompressConfig cc;
  if (cfg.ratio && cfg.groups) throw ArgumentError("--ratio and --groups are mutually exclusive");
  cc.groups = cfg.groups;
  cc.ratio = cfg.groups ? std::nullopt : std::optional<double>(cfg.ratio.value_or(0.2));
  cc.metric = metric_from_string(cfg.metric);
  cc.alpha = cfg.alpha;
  cc.residual_bits = cfg.residual_bits;
  cc.activation_bits = cfg.activation_bits;
  cc.residual_quant = residual_quant_from_string(cfg.residual_quant);
  cc.layer_name = cfg.layer_name;
  if (cfg.smooth == "auto") {
    cc.migration_strength = std::nullopt;
  } else {
    try {
      cc.migration_strength = std::stod(cfg.smooth);
    } catch (const std::exception&) {
      throw ArgumentError("--smooth expects 'auto' or a number in [0, 1], got '" + cfg.smooth + "'");
    }
  }
  return cc;
}

int cmd_compress(const RunConfig& cfg, std::ostream& log) {
  if (cfg.out.empty()) throw ArgumentError("--out is required");
  const Inputs in = load_inputs(cfg);
  const CompressConfig cc = to_compress_config(cfg);
  const CompressedLayer layer = compress_layer(in.x, in.w, cc);
  save_compressed_layer(layer, cfg.out);

  const Matrix w_hat = smooth_weights(in.w, layer.smoothing);
  const Matrix low = layer.low_frequency_branch();
  const Matrix residual_hat = dequantize(layer.residual);
  const ImportanceVector scores =
      cc.groups ? ImportanceVector{cc.metric, std::vector<double>(layer.c_out, 0.0)} : importance(w_hat, &in.x, cc.metric);

  bool parseval_ok = true;
  bool bound_ok = true;
  json channels = json::array();
  std::ostringstream csv;
  csv << "channel,k,rho,score,total_energy,retained_energy,tail_energy,error_bound,achieved_error,branch_overhead\n";
  for (std::size_t j = 0; j < layer.c_out; ++j) {
    const auto col = w_hat.column(j);
    const ChannelReport r = analyze_channel(col, layer.plan.k[j]);
    double time_energy = 0.0;
    for (double v : col) time_energy += v * v;
    const double scale = std::max(time_energy, 1e-300);
    if (std::abs(r.retained_energy + r.tail_energy - time_energy) > 1e-9 * scale) parseval_ok = false;
    if (r.achieved_error > r.error_bound + 1e-9) bound_ok = false;
    const double overhead = 2.0 * static_cast<double>(r.retained) / static_cast<double>(layer.c_in);
    csv << j << ',' << r.retained << ',' << num(layer.plan.rho[j]) << ',' << num(scores.scores[j]) << ','
        << num(r.total_energy) << ',' << num(r.retained_energy) << ',' << num(r.tail_energy) << ','
        << num(r.error_bound) << ',' << num(r.achieved_error) << ',' << num(overhead) << '\n';
    channels.push_back({{"channel", j},
                        {"k", r.retained},
                        {"rho", layer.plan.rho[j]},
                        {"total_energy", r.total_energy},
                        {"tail_energy", r.tail_energy},
                        {"error_bound", r.error_bound},
                        {"achieved_error", r.achieved_error}});
  }

  // Residual reconstruction error per element vs half a step of its slice.
  bool residual_ok = true;
  if (layer.residual.compensation == Compensation::none) {
    for (std::size_t r = 0; r < layer.c_in && residual_ok; ++r) {
      for (std::size_t c = 0; c < layer.c_out; ++c) {
        const double err = std::abs(w_hat(r, c) - low(r, c) - residual_hat(r, c));
        const double half_step = layer.residual.params[c].delta / 2.0;
        if (err > half_step * (1.0 + 1e-9) + 1e-12) {
          residual_ok = false;
          break;
        }
      }
    }
  }

  const bool roundtrip_ok = load_compressed_layer(cfg.out) == layer;
  const Matrix reference = matmul(in.x, in.w);
  const double ref_norm = frobenius_norm(reference);
  const double forward_err = frobenius_distance(reference, forward_approx(in.x, layer, cfg.activation_bits));
  const double weight_err = frobenius_distance(w_hat, low + residual_hat);

  json report;
  report["config"] = config_json(cfg);
  report["resolved"] = {{"migration_strength", layer.smoothing.migration_strength},
                        {"total_budget", layer.plan.total_budget},
                        {"allocated_bins", layer.plan.allocated()}};
  report["summary"] = {{"c_in", layer.c_in},
                       {"c_out", layer.c_out},
                       {"branch_parameters", layer.branch_parameters()},
                       {"bits_per_parameter", layer.bits_per_parameter()},
                       {"residual_compensation", std::string(to_string(layer.residual.compensation))},
                       {"weight_reconstruction_error", weight_err},
                       {"low_branch_error", frobenius_distance(w_hat, low)},
                       {"forward_error", forward_err},
                       {"forward_relative_error", ref_norm > 0.0 ? forward_err / ref_norm : 0.0}};
  report["invariants"] = {{"parseval", parseval_ok},
                          {"error_bound", bound_ok},
                          {"residual_half_step", residual_ok},
                          {"artifact_roundtrip", roundtrip_ok}};
  report["channels"] = channels;
  write_text(cfg.out / "report.json", report.dump(2) + "\n");
  write_text(cfg.out / "report.csv", csv.str());

  log << "compressed " << layer.c_in << "x" << layer.c_out << " layer into " << cfg.out.string()
      << " (s = " << layer.smoothing.migration_strength << ", " << layer.plan.allocated()
      << " bins, " << layer.bits_per_parameter() << " bits/param, forward rel. error "
      << (ref_norm > 0.0 ? forward_err / ref_norm : 0.0) << ")\n";
  const bool ok = parseval_ok && bound_ok && residual_ok && roundtrip_ok;
  if (!ok) log << "error: an internal invariant check failed; see report.json\n";
  return ok ? 0 : 1;
}

int cmd_analyze(const RunConfig& cfg, std::ostream& log) {
  if (cfg.weights.empty()) throw ArgumentError("--weights is required");
  if (cfg.out.empty()) throw ArgumentError("--out is required");
  const Matrix w = load_matrix(cfg.weights);
  std::optional<Matrix> x;
  if (!cfg.calib.empty()) x = load_calibration(cfg.calib, w.rows(), cfg.calib_rows);

  CompressConfig cc = to_compress_config(cfg);
  BudgetPlan plan;
  if (cc.groups) {
    plan = fixed_groups(w.cols(), *cc.groups, w.rows());
  } else {
    plan = allocate(importance(w, x ? &*x : nullptr, cc.metric), cc.alpha,
                    spectral_budget(*cc.ratio, w.rows(), w.cols()), w.rows());
  }
  const auto mean_abs = importance(w, nullptr, ImportanceMetric::abs_mean);
  const auto max_abs_scores = importance(w, nullptr, ImportanceMetric::abs_max);
  const auto l2 = importance(w, nullptr, ImportanceMetric::l2_norm);
  const auto entropy = importance(w, nullptr, ImportanceMetric::spectral_entropy);

  std::filesystem::create_directories(cfg.out);
  std::ostringstream csv;
  std::ostringstream bins;
  csv << "channel,k,total_energy,low_frequency_fraction,spectral_entropy,abs_mean,abs_max,l2_norm,tail_energy,"
         "error_bound,achieved_error\n";
  bins << "channel,bin,amplitude,phase,energy\n";
  std::vector<double> fractions;
  for (std::size_t j = 0; j < w.cols(); ++j) {
    const auto col = w.column(j);
    const ChannelReport r = analyze_channel(col, plan.k[j]);
    const double fraction = low_frequency_energy_fraction(col, cfg.low_fraction);
    fractions.push_back(fraction);
    csv << j << ',' << r.retained << ',' << num(r.total_energy) << ',' << num(fraction) << ','
        << num(entropy.scores[j]) << ',' << num(mean_abs.scores[j]) << ',' << num(max_abs_scores.scores[j]) << ','
        << num(l2.scores[j]) << ',' << num(r.tail_energy) << ',' << num(r.error_bound) << ','
        << num(r.achieved_error) << '\n';
    if (cfg.dump_spectrum) {
      const auto half = fft(col);
      const auto full = truncate_low_freq(half, col.size(), half.size());
      const auto energies = bin_energies(half, col.size());
      for (std::size_t m = 0; m < half.size(); ++m)
        bins << j << ',' << m << ',' << num(full.amps[m]) << ',' << num(full.phases[m]) << ','
             << num(energies[m]) << '\n';
    }
  }
  double mean = 0.0;
  for (double f : fractions) mean += f;
  mean = fractions.empty() ? 0.0 : mean / static_cast<double>(fractions.size());
  double var = 0.0;
  for (double f : fractions) var += (f - mean) * (f - mean);
  const double stddev = fractions.size() > 1 ? std::sqrt(var / static_cast<double>(fractions.size() - 1)) : 0.0;

  json summary;
  summary["config"] = config_json(cfg);
  summary["c_in"] = w.rows();
  summary["c_out"] = w.cols();
  summary["low_fraction_bins"] = cfg.low_fraction;
  summary["low_frequency_energy_mean"] = mean;
  summary["low_frequency_energy_std"] = stddev;
  summary["allocated_bins"] = plan.allocated();
  write_text(cfg.out / "analysis.json", summary.dump(2) + "\n");
  write_text(cfg.out / "analysis.csv", csv.str());
  if (cfg.dump_spectrum) write_text(cfg.out / "spectrum.csv", bins.str());
  log << "analyzed " << w.cols() << " channels: low-frequency (" << cfg.low_fraction * 100.0
      << "% of bins) energy fraction mean " << mean << ", std " << stddev << "\n";
  return 0;
}

int cmd_compare_svd(const RunConfig& cfg, std::ostream& log) {
  if (cfg.weights.empty()) throw ArgumentError("--weights is required");
  Matrix w = load_matrix(cfg.weights);
  std::optional<Matrix> x;
  if (!cfg.calib.empty()) {
    x = load_calibration(cfg.calib, w.rows(), cfg.calib_rows);
    if (cfg.smooth != "none") {
      RunConfig first = cfg;
      first.ratio = cfg.ratios.empty() ? 0.2 : cfg.ratios.front();
      first.groups.reset();
      const CompressConfig cc = to_compress_config(first);
      const double s = cc.migration_strength ? *cc.migration_strength : select_migration_strength(*x, w, cc);
      w = smooth_weights(w, compute_smoothing(*x, w, s));
    }
  }
  const ImportanceMetric metric = metric_from_string(cfg.metric);
  std::ostringstream csv;
  csv << "ratio,B_spectral,B_SVD,k_svd,err_spectral,err_svd,L_freq,L_svd\n";
  for (double ratio : cfg.ratios) {
    const BudgetComparison c = compare_budgets(w, x ? &*x : nullptr, ratio, metric, cfg.alpha);
    double l_freq = 0.0;
    for (double e : c.channel_tail_energy) l_freq += e;
    csv << num(ratio) << ',' << c.b_spectral << ',' << c.b_svd << ',' << c.k_svd << ',' << num(c.error_spectral)
        << ',' << num(c.error_svd) << ',' << num(l_freq) << ',' << num(c.svd_tail_energy) << '\n';
  }
  emit_csv(cfg, csv.str(), log);
  return 0;
}

int cmd_eval_matmul(const RunConfig& cfg, std::ostream& log) {
  const Inputs in = load_inputs(cfg);
  const CompressedLayer layer =
      cfg.artifact.empty() ? compress_layer(in.x, in.w, to_compress_config(cfg)) : load_compressed_layer(cfg.artifact);
  const auto rows = evaluate_matmul(in.x, in.w, layer, cfg.activation_bits, layer.residual.bits);
  const double reference = frobenius_norm(matmul(in.x, in.w));
  std::ostringstream csv;
  csv << "method,frobenius_error,relative_error\n";
  for (const auto& r : rows)
    csv << r.method << ',' << num(r.frobenius_error) << ',' << num(reference > 0.0 ? r.frobenius_error / reference : 0.0)
        << '\n';
  emit_csv(cfg, csv.str(), log);
  return 0;
}

int cmd_synth(const RunConfig& cfg, std::ostream& log) {
  if (cfg.out.empty()) throw ArgumentError("--out is required");
  Matrix m;
  if (cfg.kind == "smooth") {
    m = synthetic::smooth_decay_layer(cfg.rows, cfg.cols, cfg.decay, cfg.seed, cfg.scale).weights;
  } else if (cfg.kind == "activations" || cfg.kind == "outlier") {
    m = synthetic::outlier_activations(cfg.rows, cfg.cols, cfg.seed, cfg.magnitude, cfg.outlier_channels);
  } else if (cfg.kind == "rank1") {
    m = synthetic::rank_one_white(cfg.rows, cfg.cols, cfg.seed);
  } else if (cfg.kind == "gaussian") {
    m = synthetic::gaussian(cfg.rows, cfg.cols, cfg.seed, cfg.scale);
  } else if (cfg.kind == "zero") {
    m = Matrix(cfg.rows, cfg.cols);
  } else {
    throw ArgumentError("unknown --kind '" + cfg.kind + "' (smooth, outlier, rank1, gaussian, zero)");
  }
  if (cfg.out.has_parent_path()) std::filesystem::create_directories(cfg.out.parent_path());
  save_matrix(cfg.out, m);
  log << "wrote " << cfg.rows << "x" << cfg.cols << " " << cfg.kind << " matrix to " << cfg.out.string() << "\n";
  return 0;
}

}  // namespace specquant::cli
