#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "deocc/core_math.hpp"
#include "deocc/harness.hpp"

namespace deocc {

struct VerificationPair {
  std::size_t a;
  std::size_t b;
  bool same;
};

/// Pairs of sample indices with same-identity flags, balanced to within one.
struct PairSet {
  std::vector<VerificationPair> pairs;

  void validate() const;
};

/// All same-identity pairs among `samples` (up to max_positives, seeded
/// subsample) plus an equal number of seeded different-identity pairs.
PairSet make_pair_set(const std::vector<std::size_t>& samples, const std::vector<int>& labels,
                      std::size_t max_positives, std::uint64_t seed);

struct VerificationReport {
  double accuracy = 0.0;
  double threshold = 0.0;
  std::vector<std::pair<double, double>> roc;  // (fpr, tpr), fpr non-decreasing
};

double cosine_similarity(const Vector& a, const Vector& b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// A pair is predicted "same" iff similarity > threshold. Thresholds swept:
/// -1, midpoints of sorted distinct similarities, +1. Ties resolve to the
/// smallest optimal threshold.
VerificationReport verify_scores(const std::vector<double>& similarities, const std::vector<bool>& same);

/// Embeds every sample the pairs touch and runs verify_scores on cosine similarities.
VerificationReport verify(const StudentModel& model, const Matrix& inputs, const PairSet& pairs);

/// Fraction of probes whose cosine-nearest gallery row shares their label;
/// ties go to the lowest gallery index.
double rank1_accuracy(const Matrix& gallery, const std::vector<int>& gallery_labels, const Matrix& probes,
                      const std::vector<int>& probe_labels);

double rank1_identify(const StudentModel& model, const Matrix& gallery_inputs, const std::vector<int>& gallery_labels,
                      const Matrix& probe_inputs, const std::vector<int>& probe_labels);

}  // namespace deocc
