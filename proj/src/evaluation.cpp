#include "deocc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "deocc/errors.hpp"
#include "deocc/random.hpp"

namespace deocc {

void PairSet::validate() const {
  if (pairs.empty()) throw InvalidInput("PairSet: empty");
  std::size_t positives = 0;
  for (const auto& p : pairs) {
    if (p.a == p.b) throw InvalidInput("PairSet: sample paired with itself");
    positives += p.same ? 1 : 0;
  }
  const std::size_t negatives = pairs.size() - positives;
  const std::size_t gap = positives > negatives ? positives - negatives : negatives - positives;
  if (gap > 1) throw InvalidInput("PairSet: positives and negatives differ by more than one");
}

PairSet make_pair_set(const std::vector<std::size_t>& samples, const std::vector<int>& labels,
                      std::size_t max_positives, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<VerificationPair> positives;
  for (std::size_t x = 0; x < samples.size(); ++x)
    for (std::size_t y = x + 1; y < samples.size(); ++y)
      if (labels[samples[x]] == labels[samples[y]]) positives.push_back({samples[x], samples[y], true});
  if (positives.size() > max_positives) {
    rng.shuffle(positives);
    positives.resize(max_positives);
  }
  if (positives.empty()) throw InvalidInput("make_pair_set: no same-identity pairs available");

  std::set<std::pair<std::size_t, std::size_t>> taken;
  std::vector<VerificationPair> negatives;
  const std::size_t budget = 1000 * positives.size() + 1000;
  for (std::size_t attempt = 0; negatives.size() < positives.size() && attempt < budget; ++attempt) {
    std::size_t a = samples[rng.below(samples.size())];
    std::size_t b = samples[rng.below(samples.size())];
    if (labels[a] == labels[b]) continue;
    if (a > b) std::swap(a, b);
    if (!taken.insert({a, b}).second) continue;
    negatives.push_back({a, b, false});
  }
  if (negatives.size() < positives.size()) throw InvalidInput("make_pair_set: not enough different-identity pairs");

  PairSet set;
  for (std::size_t k = 0; k < positives.size(); ++k) {
    set.pairs.push_back(positives[k]);
    set.pairs.push_back(negatives[k]);
  }
  return set;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw InvalidInput("cosine_similarity: zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double cosine_similarity(const Vector& a, const Vector& b) { return cosine_similarity(a.values(), b.values()); }

VerificationReport verify_scores(const std::vector<double>& similarities, const std::vector<bool>& same) {
  if (similarities.empty()) throw InvalidInput("verify: empty pair set");
  if (similarities.size() != same.size()) throw InvalidInput("verify: scores and labels differ in length");

  // Distinct similarity values with per-value class counts.
  std::map<double, std::pair<std::size_t, std::size_t>> buckets;  // value -> (positives, negatives)
  std::size_t pos_total = 0;
  for (std::size_t k = 0; k < similarities.size(); ++k) {
    auto& bucket = buckets[similarities[k]];
    if (same[k]) {
      ++bucket.first;
      ++pos_total;
    } else {
      ++bucket.second;
    }
  }
  const std::size_t neg_total = similarities.size() - pos_total;
  std::vector<double> values;
  std::vector<std::size_t> pos_at_or_below{0}, neg_at_or_below{0};
  for (const auto& [value, counts] : buckets) {
    values.push_back(value);
    pos_at_or_below.push_back(pos_at_or_below.back() + counts.first);
    neg_at_or_below.push_back(neg_at_or_below.back() + counts.second);
  }

  std::vector<double> thresholds{-1.0};
  for (std::size_t k = 0; k + 1 < values.size(); ++k) thresholds.push_back(0.5 * (values[k] + values[k + 1]));
  thresholds.push_back(1.0);

  VerificationReport report;
  report.accuracy = -1.0;
  std::vector<std::pair<double, double>> roc;
  for (double theta : thresholds) {
    const auto below = static_cast<std::size_t>(std::upper_bound(values.begin(), values.end(), theta) - values.begin());
    const std::size_t true_pos = pos_total - pos_at_or_below[below];
    const std::size_t false_pos = neg_total - neg_at_or_below[below];
    const std::size_t true_neg = neg_at_or_below[below];
    const double accuracy = static_cast<double>(true_pos + true_neg) / static_cast<double>(similarities.size());
    if (accuracy > report.accuracy) {
      report.accuracy = accuracy;
      report.threshold = theta;
    }
    const double fpr = neg_total ? static_cast<double>(false_pos) / static_cast<double>(neg_total) : 0.0;
    const double tpr = pos_total ? static_cast<double>(true_pos) / static_cast<double>(pos_total) : 0.0;
    roc.emplace_back(fpr, tpr);
  }
  std::reverse(roc.begin(), roc.end());
  report.roc = std::move(roc);
  return report;
}

VerificationReport verify(const StudentModel& model, const Matrix& inputs, const PairSet& pairs) {
  pairs.validate();
  std::vector<std::size_t> rows;
  for (const auto& p : pairs.pairs) {
    if (p.a >= inputs.rows() || p.b >= inputs.rows()) throw InvalidInput("verify: pair index out of range");
    rows.push_back(p.a);
    rows.push_back(p.b);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  const Matrix embeddings = embed_rows(model, inputs, rows);
  auto position = [&rows](std::size_t sample) {
    return static_cast<std::size_t>(std::lower_bound(rows.begin(), rows.end(), sample) - rows.begin());
  };
  std::vector<double> scores;
  std::vector<bool> same;
  for (const auto& p : pairs.pairs) {
    scores.push_back(cosine_similarity(embeddings.row(position(p.a)), embeddings.row(position(p.b))));
    same.push_back(p.same);
  }
  return verify_scores(scores, same);
}

double rank1_accuracy(const Matrix& gallery, const std::vector<int>& gallery_labels, const Matrix& probes,
                      const std::vector<int>& probe_labels) {
  if (gallery.rows() == 0 || probes.rows() == 0) throw InvalidInput("rank1: empty gallery or probe set");
  if (gallery.rows() != gallery_labels.size() || probes.rows() != probe_labels.size()) {
    throw InvalidInput("rank1: labels do not match rows");
  }
  if (gallery.cols() != probes.cols()) throw InvalidInput("rank1: embedding dimensions differ");
  const std::set<int> known(gallery_labels.begin(), gallery_labels.end());
  std::size_t hits = 0;
  for (std::size_t p = 0; p < probes.rows(); ++p) {
    if (!known.count(probe_labels[p])) {
      throw InvalidInput("rank1: probe identity " + std::to_string(probe_labels[p]) + " missing from gallery");
    }
    std::size_t best = 0;
    double best_score = cosine_similarity(probes.row(p), gallery.row(0));
    for (std::size_t g = 1; g < gallery.rows(); ++g) {
      const double score = cosine_similarity(probes.row(p), gallery.row(g));
      if (score > best_score) {
        best_score = score;
        best = g;
      }
    }
    hits += gallery_labels[best] == probe_labels[p] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(probes.rows());
}

double rank1_identify(const StudentModel& model, const Matrix& gallery_inputs, const std::vector<int>& gallery_labels,
                      const Matrix& probe_inputs, const std::vector<int>& probe_labels) {
  return rank1_accuracy(student_forward(model, gallery_inputs).embed, gallery_labels,
                        student_forward(model, probe_inputs).embed, probe_labels);
}

}  // namespace deocc
