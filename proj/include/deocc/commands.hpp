#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "deocc/ablation.hpp"
#include "deocc/evaluation.hpp"
#include "deocc/harness.hpp"
#include "deocc/relational_losses.hpp"
#include "deocc/run_config.hpp"

namespace deocc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Dataset directory layout:
//   config.txt     echoed run config
//   manifest.csv   index,label,split,coverage
//   clean.tensor, masked.tensor, mask.tensor, inpainted.tensor   [N, r, r] float32
//   labels.tensor, split.tensor                                   [N] float32
//   anchors.tensor, render_map.tensor, unrender.tensor, gain.tensor   float64
//   pairs.csv      a,b,same over evaluation samples
void save_dataset(const SyntheticIdentityDataset& dataset, const RunConfig& config, const PairSet& pairs,
                  const std::filesystem::path& dir);
SyntheticIdentityDataset load_dataset(const std::filesystem::path& dir);

void save_pairs(const PairSet& pairs, const std::filesystem::path& path);
PairSet load_pairs(const std::filesystem::path& path, std::size_t sample_count);

// Checkpoint directory: w1, b1, w2, b2, wc, bc and input_norm (mean, scale), float64.
void save_checkpoint(const StudentModel& model, const std::filesystem::path& dir);
StudentModel load_checkpoint(const std::filesystem::path& dir);

// Centroid file: [K, 2 + d] float64 rows of (label, count, centroid).
void save_centroids(const CentroidTable& centroids, const std::filesystem::path& path);
CentroidTable load_centroids(const std::filesystem::path& path);

std::string metrics_header();
std::string metrics_row(const EpochRecord& record);

/// Generates the dataset and evaluation pairs into config.data_dir.
void cmd_gen_data(const RunConfig& config, std::ostream& log);

/// Trains on config.data_dir and writes config.txt, metrics.csv, centroids.tensor
/// (soft mode) and checkpoint/ into config.out_dir. metrics.csv is appended one
/// row per epoch, so a divergence leaves the completed epochs on disk.
TrainResult cmd_train(const RunConfig& config, std::ostream& log);

/// Scores `pairs_file` with the checkpoint; writes eval.csv and roc.csv into config.out_dir.
VerificationReport cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint_dir,
                            const std::filesystem::path& pairs_file, std::ostream& log);

/// Prints one row per loss gradient; returns true iff every row passes.
bool cmd_gradcheck(std::ostream& log, std::size_t points = 100, std::uint64_t seed = 2024);

/// Trains every ablation variant for config.ablation_seeds training seeds
/// (config.seed, config.seed + 1, ...) on the stored dataset; writes
/// ablation.csv and summary.csv into config.out_dir.
std::vector<VariantSummary> cmd_ablate(const RunConfig& config, std::ostream& log);

}  // namespace deocc
