#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "deocc/evaluation.hpp"
#include "deocc/harness.hpp"

namespace deocc {

/// The five loss configurations compared in the ablation, in order.
enum class Variant { kCeOnly, kCePair, kCePairTriplet, kHardInstance, kSoftInstance };

inline constexpr std::array<Variant, 5> kAllVariants = {Variant::kCeOnly, Variant::kCePair, Variant::kCePairTriplet,
                                                        Variant::kHardInstance, Variant::kSoftInstance};

std::string variant_name(Variant v);

/// `base` with the loss weights and instance mode of `v`. Non-zero weights
/// keep their values from `base`.
TrainConfig variant_config(const TrainConfig& base, Variant v);

struct VariantRun {
  Variant variant;
  std::uint64_t seed;
  double accuracy;
  double threshold;
  LossReport eval_loss;
  std::vector<EpochRecord> history;
};

/// Pairs used to score verification: same-identity eval pairs plus as many negatives.
PairSet evaluation_pairs(const SyntheticIdentityDataset& dataset, std::uint64_t seed);

VariantRun run_variant(const SyntheticIdentityDataset& dataset, const TrainConfig& base, Variant v,
                       const PairSet& pairs);

struct VariantSummary {
  Variant variant;
  double mean_accuracy;
  double sd_accuracy;
  double mean_eval_loss;
};

/// Mean and sample standard deviation (0 for a single run) per variant.
std::vector<VariantSummary> summarize(const std::vector<VariantRun>& runs);

}  // namespace deocc
