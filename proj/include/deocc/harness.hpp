#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "deocc/core_math.hpp"
#include "deocc/occlusion.hpp"
#include "deocc/relational_losses.hpp"
#include "deocc/tuples.hpp"

namespace deocc {

struct DatasetConfig {
  std::size_t num_identities = 32;
  std::size_t samples_per_identity = 24;
  std::size_t embed_dim = 16;
  std::size_t raster_side = 8;
  double noise_sigma = 0.05;
  // Empty means the four categories are cycled over samples.
  std::optional<MaskCategory> mask_category;
  double coverage = 0.2;
  bool augment_flip = true;  // each sample flips its occluder with probability 1/2
  int augment_shift = 1;
  std::uint64_t seed = 7;

  void validate() const;
};

struct Sample {
  int label = 0;
  bool train = true;
  MaskedSample masked;
  Raster inpainted;
};

/// Identities are unit anchors in R^d rendered to r x r rasters through a
/// fixed linear map: pixel = 0.5 + gain * (render_map * v).
struct SyntheticIdentityDataset {
  DatasetConfig config;
  Matrix anchors;     // identities x d, unit rows
  Matrix render_map;  // r*r x d
  Matrix unrender;    // d x r*r, pseudo-inverse of render_map
  double gain = 1.0;
  std::vector<Sample> samples;

  std::size_t train_count() const;
  std::size_t eval_count() const { return samples.size() - train_count(); }
  std::vector<std::size_t> indices(bool train) const;
};

/// Number of training samples for a 6:1 train/eval split of n samples.
std::size_t train_split_size(std::size_t n);

SyntheticIdentityDataset generate_dataset(const DatasetConfig& config);

Raster render(const SyntheticIdentityDataset& dataset, const Vector& latent);

/// Pseudo-inverse of the render map followed by unit normalisation.
Vector teacher_embed(const Raster& clean, const SyntheticIdentityDataset& dataset);

/// Teacher class logits: scale * <anchor_c, t>.
Matrix teacher_logits(const Matrix& teacher_features, const SyntheticIdentityDataset& dataset, double scale);

/// Per-identity means of teacher features.
CentroidTable compute_centroids(const Matrix& features, const std::vector<int>& labels,
                                std::size_t num_identities);

/// inputs -> tanh hidden -> embedding -> class logits.
struct StudentModel {
  Matrix w1, b1;  // hidden x inputs, 1 x hidden
  Matrix w2, b2;  // embed x hidden, 1 x embed
  Matrix wc, bc;  // classes x embed, 1 x classes
  double input_mean = 0.0;
  double input_scale = 1.0;

  static StudentModel init(std::size_t inputs, std::size_t hidden, std::size_t embed, std::size_t classes,
                           std::uint64_t seed);

  std::size_t inputs() const { return w1.cols(); }
  std::size_t hidden() const { return w1.rows(); }
  std::size_t embed_dim() const { return w2.rows(); }
  std::size_t classes() const { return wc.rows(); }
  std::size_t parameter_count() const;

  std::vector<Matrix*> tensors() { return {&w1, &b1, &w2, &b2, &wc, &bc}; }
  std::vector<const Matrix*> tensors() const { return {&w1, &b1, &w2, &b2, &wc, &bc}; }
};

struct StudentForward {
  Matrix hidden;  // n x hidden, post-tanh
  Matrix embed;   // n x d
  Matrix logits;  // n x C
};

/// Rows of `inputs` are raw pixel vectors; the model applies its own input normalisation.
StudentForward student_forward(const StudentModel& model, const Matrix& inputs);

struct StudentGradients {
  Matrix w1, b1, w2, b2, wc, bc;
  std::vector<const Matrix*> tensors() const { return {&w1, &b1, &w2, &b2, &wc, &bc}; }
};

StudentGradients student_backprop(const StudentModel& model, const Matrix& inputs, const Matrix& upstream_embed,
                                  const Matrix& upstream_logits);

enum class InstanceMode { kHard, kSoft };
enum class TeacherSource {
  kCleanOriginal,  // the unmasked original of the same sample
  kSameIdentity,   // another unmasked sample of the same identity
};

struct TrainConfig {
  std::size_t batch_size = 128;
  double lr0 = 0.1;
  double lr_decay = 0.1;
  std::size_t lr_step_epochs = 24;
  std::size_t epochs = 48;
  double momentum = 0.0;
  std::uint64_t seed = 1;
  LossWeights weights;
  InstanceMode mode = InstanceMode::kSoft;
  TuplePolicy policy;
  std::size_t hidden = 32;
  double teacher_logit_scale = 1.0;
  double temperature = 1.0;
  TeacherSource teacher_source = TeacherSource::kCleanOriginal;

  void validate() const;
  double learning_rate(std::size_t epoch) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double ce = 0.0;
  double instance = 0.0;
  double pair = 0.0;
  double triplet = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

/// Teacher-side tensors for every sample of a dataset.
struct TeacherView {
  Matrix features;  // N x d
  Matrix logits;    // N x C
  Matrix inputs;    // N x r*r, inpainted rasters seen by the student
  std::vector<int> labels;
};

TeacherView build_teacher_view(const SyntheticIdentityDataset& dataset, const TrainConfig& config);

struct TrainResult {
  StudentModel model;
  std::vector<EpochRecord> history;
  std::optional<CentroidTable> centroids;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const TrainConfig& config, const SyntheticIdentityDataset& dataset,
                  const EpochCallback& on_epoch = {}, const CentroidTable* precomputed_centroids = nullptr);

/// Loss of `model` on the given sample subset as a single batch, tuple-mean reduced.
LossReport evaluation_loss(const StudentModel& model, const TeacherView& view, const std::vector<std::size_t>& subset,
                           const TrainConfig& config, const CentroidTable* centroids);

/// Student embeddings for the given rows of `inputs`.
Matrix embed_rows(const StudentModel& model, const Matrix& inputs, const std::vector<std::size_t>& rows);

}  // namespace deocc
