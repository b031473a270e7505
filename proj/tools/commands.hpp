// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "specquant/pipeline.hpp"

namespace specquant::cli {

/// Fully resolved options of one CLI invocation.
struct RunConfig {
  std::string command;
  std::filesystem::path weights;
  std::filesystem::path calib;
  std::filesystem::path artifact;
  std::filesystem::path out;
  std::optional<double> ratio;
  std::optional<std::size_t> groups;
  std::vector<double> ratios{0.1, 0.2, 0.3};
  std::string metric = "spectral-entropy";
  double alpha = 1.0;
  int residual_bits = 4;
  int activation_bits = 4;
  std::string smooth = "auto";
  std::string residual_quant = "rtn";
  std::uint64_t seed = 0;
  std::optional<std::size_t> calib_rows;
  std::string layer_name = "layer";
  double low_fraction = 0.2;
  bool dump_spectrum = false;

  // synth
  std::string kind = "smooth";
  std::size_t rows = 128;
  std::size_t cols = 128;
  double decay = 2.0;
  double magnitude = 100.0;
  std::size_t outlier_channels = 1;
  double scale = 0.05;
};

/// Library configuration implied by the CLI flags.
CompressConfig to_compress_config(const RunConfig& cfg);

/// Each returns the process exit code; results go to cfg.out and a short
/// summary to `log`.
int cmd_compress(const RunConfig& cfg, std::ostream& log);
int cmd_analyze(const RunConfig& cfg, std::ostream& log);
int cmd_compare_svd(const RunConfig& cfg, std::ostream& log);
int cmd_eval_matmul(const RunConfig& cfg, std::ostream& log);
int cmd_synth(const RunConfig& cfg, std::ostream& log);

}  // namespace specquant::cli
