#include "deocc/ablation.hpp"

#include <cmath>

namespace deocc {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kCeOnly: return "ce";
    case Variant::kCePair: return "ce+pair";
    case Variant::kCePairTriplet: return "ce+pair+triplet";
    case Variant::kHardInstance: return "ce+pair+triplet+hard";
    case Variant::kSoftInstance: return "ce+pair+triplet+soft";
  }
  return "ce";
}

TrainConfig variant_config(const TrainConfig& base, Variant v) {
  TrainConfig out = base;
  out.weights.lambda_i = 0.0;
  out.weights.lambda_p = 0.0;
  out.weights.lambda_t = 0.0;
  out.mode = InstanceMode::kHard;
  switch (v) {
    case Variant::kSoftInstance:
      out.mode = InstanceMode::kSoft;
      [[fallthrough]];
    case Variant::kHardInstance:
      out.weights.lambda_i = base.weights.lambda_i;
      [[fallthrough]];
    case Variant::kCePairTriplet:
      out.weights.lambda_t = base.weights.lambda_t;
      [[fallthrough]];
    case Variant::kCePair:
      out.weights.lambda_p = base.weights.lambda_p;
      [[fallthrough]];
    case Variant::kCeOnly:
      break;
  }
  return out;
}

PairSet evaluation_pairs(const SyntheticIdentityDataset& dataset, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(dataset.samples.size());
  for (const Sample& s : dataset.samples) labels.push_back(s.label);
  return make_pair_set(dataset.indices(false), labels, 3000, seed);
}

VariantRun run_variant(const SyntheticIdentityDataset& dataset, const TrainConfig& base, Variant v,
                       const PairSet& pairs) {
  const TrainConfig config = variant_config(base, v);
  TrainResult trained = train(config, dataset);
  const TeacherView view = build_teacher_view(dataset, config);
  const VerificationReport report = verify(trained.model, view.inputs, pairs);
  const CentroidTable* centroids = trained.centroids ? &*trained.centroids : nullptr;
  LossReport eval = evaluation_loss(trained.model, view, dataset.indices(false), config, centroids);
  return VariantRun{v, config.seed, report.accuracy, report.threshold, std::move(eval), std::move(trained.history)};
}

std::vector<VariantSummary> summarize(const std::vector<VariantRun>& runs) {
  std::vector<VariantSummary> out;
  for (Variant v : kAllVariants) {
    std::vector<double> acc;
    double loss = 0.0;
    for (const auto& r : runs) {
      if (r.variant != v) continue;
      acc.push_back(r.accuracy);
      loss += r.eval_loss.total;
    }
    if (acc.empty()) continue;
    double mean = 0.0;
    for (double a : acc) mean += a;
    mean /= static_cast<double>(acc.size());
    double var = 0.0;
    for (double a : acc) var += (a - mean) * (a - mean);
    const double sd = acc.size() > 1 ? std::sqrt(var / static_cast<double>(acc.size() - 1)) : 0.0;
    out.push_back({v, mean, sd, loss / static_cast<double>(acc.size())});
  }
  return out;
}

}  // namespace deocc
