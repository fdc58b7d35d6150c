#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "deocc/core_math.hpp"
#include "deocc/tuples.hpp"

namespace deocc {

/// n embeddings (rows of `features`) with their identity labels.
class FeatureBatch {
 public:
  FeatureBatch(Matrix features, std::vector<int> labels);
  // Unlabelled batch; every label is 0.
  explicit FeatureBatch(Matrix features);

  std::size_t size() const { return features_.rows(); }
  std::size_t dim() const { return features_.cols(); }
  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  std::span<const double> row(std::size_t i) const { return features_.row(i); }

 private:
  Matrix features_;
  std::vector<int> labels_;
};

/// Identity label -> centroid of that identity's teacher features.
class CentroidTable {
 public:
  void set(int label, Vector centroid, std::size_t count);
  bool contains(int label) const { return centroids_.count(label) != 0; }
  // Throws InvalidInput when the label has no centroid.
  const Vector& at(int label) const;
  std::size_t count(int label) const;
  std::size_t size() const { return centroids_.size(); }
  const std::map<int, Vector>& entries() const { return centroids_; }

 private:
  std::map<int, Vector> centroids_;
  std::map<int, std::size_t> counts_;
};

struct LossWeights {
  double lambda_i = 1.0;
  double lambda_p = 1.0;
  double lambda_t = 2.0;
  double huber_delta = 1.0;

  void validate() const;
};

/// Loss value together with its gradient with respect to the student input.
struct LossGrad {
  double value = 0.0;
  Matrix grad;
  std::size_t terms = 0;    // tuples (or rows) that contributed
  std::size_t skipped = 0;  // degenerate tuples left out
};

/// Mean-over-rows cross-entropy between softmax(teacher/T) and softmax(student/T).
LossGrad ce_distill(const Matrix& teacher_logits, const Matrix& student_logits, double temperature = 1.0);

/// Sum over rows of ||t_i - s_i||_1. Subgradient is 0 at exact coordinate ties.
LossGrad instance_loss(const FeatureBatch& teacher, const FeatureBatch& student);

/// Sum over rows of ||(t_i - f_id) - (s_i - f_id)||_1 with f_id from `centroids`.
LossGrad soft_instance_loss(const FeatureBatch& teacher, const FeatureBatch& student,
                            const CentroidTable& centroids);

struct PairPotential {
  std::vector<IndexPair> pairs;   // all unordered distinct pairs
  std::vector<double> distance;   // ||row_i - row_j||_2 per pair
  std::vector<double> psi;        // distance / mu
  double mu = 0.0;                // mean distance over all pairs
};

PairPotential pair_potential(const FeatureBatch& batch);

LossGrad pair_loss(const FeatureBatch& teacher, const FeatureBatch& student, double delta,
                   const TuplePolicy& policy = {});

/// Cosine of the angle at vertex vj. Throws DegenerateInput when vi or vk
/// coincides with vj.
double triplet_potential(std::span<const double> vi, std::span<const double> vj, std::span<const double> vk);
double triplet_potential(const Vector& vi, const Vector& vj, const Vector& vk);

LossGrad triplet_loss(const FeatureBatch& teacher, const FeatureBatch& student, double delta,
                      const TuplePolicy& policy = {});

enum class Reduction {
  kSum,          // components summed over tuples
  kTupleMean,    // each component divided by its number of contributing tuples
};

struct LossReport {
  double total = 0.0;
  double ce = 0.0;
  double instance = 0.0;
  double pair = 0.0;
  double triplet = 0.0;
  Matrix grad_student;  // n x d, feature space
  Matrix grad_logits;   // n x C, logit space
  std::size_t skipped_triplets = 0;
};

struct TotalLossOptions {
  Reduction reduction = Reduction::kSum;
  double temperature = 1.0;
};

/// Weighted composition L = CE + l_i*L_i + l_p*L_p + l_t*L_t. Soft instance
/// mode is selected by passing centroids, hard mode by passing nullptr.
LossReport total_loss(const FeatureBatch& teacher, const Matrix& teacher_logits, const FeatureBatch& student,
                      const Matrix& student_logits, const LossWeights& weights, const CentroidTable* centroids,
                      const TuplePolicy& policy = {}, const TotalLossOptions& options = {});

}  // namespace deocc
