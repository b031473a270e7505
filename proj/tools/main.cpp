// SPDX-License-Identifier: Apache-2.0
#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <iostream>

#include "commands.hpp"
#include "specquant/error.hpp"

namespace {

using specquant::cli::RunConfig;

void add_compression_flags(CLI::App* sub, RunConfig& cfg) {
  auto* ratio = sub->add_option("--ratio", cfg.ratio, "fraction of each channel's half-spectrum kept (default 0.2)")
                    ->check(CLI::Range(0.0, 1.0));
  auto* groups = sub->add_option("--groups", cfg.groups, "fixed retained bins per channel, bypasses allocation")
                     ->check(CLI::PositiveNumber);
  ratio->excludes(groups);
  sub->add_option("--metric", cfg.metric, "channel importance metric")
      ->check(CLI::IsMember({"abs-mean", "abs-max", "l2-norm", "spectral-entropy", "activation-aware"}));
  sub->add_option("--alpha", cfg.alpha, "softmax temperature");
  sub->add_option("--residual-bits", cfg.residual_bits, "residual weight bit width")->check(CLI::Range(2, 8));
  sub->add_option("--act-bits", cfg.activation_bits, "activation bit width")->check(CLI::Range(2, 8));
  sub->add_option("--smooth", cfg.smooth, "migration strength: 'auto' or a value in [0, 1]");
  sub->add_option("--residual-quant", cfg.residual_quant, "residual quantizer")
      ->check(CLI::IsMember({"rtn", "compensated"}));
  sub->add_option("--seed", cfg.seed, "seed recorded in reports");
  sub->add_option("--calib-rows", cfg.calib_rows, "use only the first N calibration rows");
  sub->add_option("--name", cfg.layer_name, "layer name stored in the artifact");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Spectral low-frequency truncation plus low-bit residual quantization for linear layers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "specquant 0.1.0");

  auto* compress = app.add_subcommand("compress", "compress one layer into an artifact directory");
  compress->add_option("--weights", cfg.weights, "weight matrix .npy (C_in x C_out)")->required();
  compress->add_option("--calib", cfg.calib, "calibration activations .npy (T x C_in)")->required();
  compress->add_option("--out", cfg.out, "artifact directory")->required();
  add_compression_flags(compress, cfg);

  auto* analyze = app.add_subcommand("analyze", "per-channel spectral statistics of a weight matrix");
  analyze->add_option("--weights", cfg.weights, "weight matrix .npy")->required();
  analyze->add_option("--calib", cfg.calib, "calibration activations, needed for activation-aware");
  analyze->add_option("--out", cfg.out, "output directory")->required();
  analyze->add_option("--low-fraction", cfg.low_fraction, "share of lowest bins counted as low frequency")
      ->check(CLI::Range(0.0, 1.0));
  analyze->add_flag("--dump-spectrum", cfg.dump_spectrum, "also write every bin to spectrum.csv");
  add_compression_flags(analyze, cfg);

  auto* compare = app.add_subcommand("compare-svd", "spectral truncation vs truncated SVD at matched budgets");
  compare->add_option("--weights", cfg.weights, "weight matrix .npy")->required();
  compare->add_option("--calib", cfg.calib, "calibration activations; enables smoothing first");
  compare->add_option("--ratios", cfg.ratios, "ratio sweep")->delimiter(',')->check(CLI::Range(0.0, 1.0));
  compare->add_option("--out", cfg.out, "CSV path (stdout if omitted)");
  add_compression_flags(compare, cfg);

  auto* eval = app.add_subcommand("eval-matmul", "Frobenius error of quantized matmuls against the fp product");
  eval->add_option("--weights", cfg.weights, "weight matrix .npy")->required();
  eval->add_option("--calib", cfg.calib, "activations .npy, also used to compress when --artifact is absent")
      ->required();
  eval->add_option("--artifact", cfg.artifact, "artifact written by compress");
  eval->add_option("--out", cfg.out, "CSV path (stdout if omitted)");
  add_compression_flags(eval, cfg);

  auto* synth = app.add_subcommand("synth", "write a synthetic matrix");
  synth->add_option("--kind", cfg.kind, "matrix family")
      ->check(CLI::IsMember({"smooth", "outlier", "activations", "rank1", "gaussian", "zero"}));
  synth->add_option("--rows", cfg.rows, "rows (C_in for layers, T for activations)");
  synth->add_option("--cols", cfg.cols, "columns");
  synth->add_option("--decay", cfg.decay, "spectral decay exponent r of smooth layers");
  synth->add_option("--magnitude", cfg.magnitude, "outlier channel scale");
  synth->add_option("--outlier-channels", cfg.outlier_channels, "number of outlier channels");
  synth->add_option("--scale", cfg.scale, "weight scale");
  synth->add_option("--seed", cfg.seed, "generator seed");
  synth->add_option("--out", cfg.out, "output .npy")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*compress) {
      cfg.command = "compress";
      return specquant::cli::cmd_compress(cfg, std::cerr);
    }
    if (*analyze) {
      cfg.command = "analyze";
      return specquant::cli::cmd_analyze(cfg, std::cerr);
    }
    if (*compare) {
      cfg.command = "compare-svd";
      return specquant::cli::cmd_compare_svd(cfg, std::cerr);
    }
    if (*eval) {
      cfg.command = "eval-matmul";
      return specquant::cli::cmd_eval_matmul(cfg, std::cerr);
    }
    cfg.command = "synth";
    return specquant::cli::cmd_synth(cfg, std::cerr);
  } catch (const specquant::Error& e) {
    std::cerr << "specquant " << cfg.command << ": error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "specquant " << cfg.command << ": unexpected error: " << e.what() << "\n";
    return 2;
  }
}
