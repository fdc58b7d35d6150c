#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "deocc/harness.hpp"

namespace deocc {

enum class ThresholdMode {
  kEvaluation,  // threshold chosen on the scored pairs themselves
  kHeldOut,     // threshold chosen on the first half, accuracy on the second
};

/// Everything a CLI run needs, parsed from a key=value file.
struct RunConfig {
  std::uint64_t seed = 7;
  DatasetConfig dataset;
  TrainConfig train;
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "run";
  std::filesystem::path centroids_file;  // empty: compute from the training split
  std::size_t ablation_seeds = 5;
  std::size_t max_positive_pairs = 3000;
  ThresholdMode threshold_mode = ThresholdMode::kEvaluation;

  /// Applies `seed` to the dataset and training configs.
  void set_seed(std::uint64_t value);
  void validate() const;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys, duplicate
/// keys and malformed values throw InvalidInput. Missing keys keep defaults.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical text of every key, parseable by parse_run_config.
std::string to_text(const RunConfig& config);

}  // namespace deocc
