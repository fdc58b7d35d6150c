#include "deocc/harness.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "deocc/errors.hpp"
#include "deocc/random.hpp"

namespace deocc {

namespace {

constexpr double kMaxAnchorCosine = 0.9;

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix out(rows, cols);
  for (double& v : out.values()) v = stddev * rng.normal();
  return out;
}

Matrix pseudo_inverse(const Matrix& m) {
  Eigen::MatrixXd dense(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) dense(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(r, c);
  const Eigen::MatrixXd pinv = dense.completeOrthogonalDecomposition().pseudoInverse();
  Matrix out(m.cols(), m.rows());
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = pinv(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return out;
}

std::vector<double> unit(std::vector<double> v) {
  const double len = l2_norm(v);
  for (double& x : v) x /= len;
  return v;
}

// out = a * b^T, a: n x k, b: m x k.
Matrix multiply_transposed(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(ar, b.row(j));
  }
  return out;
}

void add_bias(Matrix& m, const Matrix& bias) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += bias(0, j);
}

// grad_w += upstream^T * activations, grad_b += column sums of upstream.
void accumulate_affine(const Matrix& upstream, const Matrix& activations, Matrix& grad_w, Matrix& grad_b) {
  for (std::size_t n = 0; n < upstream.rows(); ++n) {
    for (std::size_t o = 0; o < upstream.cols(); ++o) {
      const double g = upstream(n, o);
      if (g == 0.0) continue;
      grad_b(0, o) += g;
      auto w_row = grad_w.row(o);
      const auto a_row = activations.row(n);
      for (std::size_t k = 0; k < a_row.size(); ++k) w_row[k] += g * a_row[k];
    }
  }
}

// upstream (n x out) times weights (out x in).
Matrix propagate(const Matrix& upstream, const Matrix& weights) {
  Matrix out(upstream.rows(), weights.cols());
  for (std::size_t n = 0; n < upstream.rows(); ++n) {
    auto o_row = out.row(n);
    for (std::size_t o = 0; o < upstream.cols(); ++o) {
      const double g = upstream(n, o);
      if (g == 0.0) continue;
      const auto w_row = weights.row(o);
      for (std::size_t k = 0; k < w_row.size(); ++k) o_row[k] += g * w_row[k];
    }
  }
  return out;
}

Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(m.row(rows[r]).begin(), m.row(rows[r]).end(), out.row(r).begin());
  return out;
}

std::vector<int> select_labels(const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels[r]);
  return out;
}

Matrix raster_rows(const std::vector<const Raster*>& rasters) {
  const std::size_t width = rasters.front()->pixels().size();
  Matrix out(rasters.size(), width);
  for (std::size_t r = 0; r < rasters.size(); ++r) {
    const auto& px = rasters[r]->pixels();
    for (std::size_t k = 0; k < width; ++k) out(r, k) = static_cast<double>(px[k]);
  }
  return out;
}

}  // namespace

void DatasetConfig::validate() const {
  if (num_identities < 2) throw InvalidInput("dataset: num_identities must be >= 2");
  if (samples_per_identity < 2) throw InvalidInput("dataset: samples_per_identity must be >= 2");
  if (embed_dim < 1) throw InvalidInput("dataset: embed_dim must be >= 1");
  if (raster_side < 8) throw InvalidInput("dataset: raster_side must be >= 8");
  if (embed_dim > raster_side * raster_side) throw InvalidInput("dataset: embed_dim exceeds pixel count");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw InvalidInput("dataset: noise_sigma must be >= 0");
  if (!(coverage > 0.0 && coverage <= kMaxMaskCoverage)) {
    throw InvalidInput("dataset: coverage " + std::to_string(coverage) + " is infeasible (allowed (0, " +
                       std::to_string(kMaxMaskCoverage) + "])");
  }
  if (augment_shift < 0) throw InvalidInput("dataset: augment_shift must be >= 0");
}

std::size_t train_split_size(std::size_t n) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * 6.0 / 7.0));
}

std::size_t SyntheticIdentityDataset::train_count() const {
  return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return s.train; }));
}

std::vector<std::size_t> SyntheticIdentityDataset::indices(bool train) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].train == train) out.push_back(i);
  return out;
}

Raster render(const SyntheticIdentityDataset& dataset, const Vector& latent) {
  const std::size_t side = dataset.config.raster_side;
  std::vector<float> pixels(side * side);
  for (std::size_t p = 0; p < pixels.size(); ++p) {
    const double v = 0.5 + dataset.gain * dot(dataset.render_map.row(p), latent.values());
    pixels[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return Raster(side, side, 1, std::move(pixels));
}

SyntheticIdentityDataset generate_dataset(const DatasetConfig& config) {
  config.validate();
  const std::size_t d = config.embed_dim;
  const std::size_t pixels = config.raster_side * config.raster_side;
  Rng rng(config.seed);

  SyntheticIdentityDataset ds;
  ds.config = config;
  ds.anchors = Matrix(config.num_identities, d);
  for (std::size_t id = 0; id < config.num_identities; ++id) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw InvalidInput("dataset: cannot draw anchors with pairwise cosine < 0.9");
      std::vector<double> v(d);
      for (double& x : v) x = rng.normal();
      if (l2_norm(v) == 0.0) continue;
      v = unit(std::move(v));
      bool separated = true;
      for (std::size_t prev = 0; prev < id && separated; ++prev) separated = dot(v, ds.anchors.row(prev)) < kMaxAnchorCosine;
      if (!separated) continue;
      std::copy(v.begin(), v.end(), ds.anchors.row(id).begin());
      break;
    }
  }

  ds.render_map = gaussian_matrix(pixels, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  double widest_row = 0.0;
  for (std::size_t p = 0; p < pixels; ++p) widest_row = std::max(widest_row, l2_norm(ds.render_map.row(p)));
  // Unit latents then land in [0, 1] without clipping.
  ds.gain = 0.5 / widest_row;
  ds.unrender = pseudo_inverse(ds.render_map);

  const std::size_t total = config.num_identities * config.samples_per_identity;
  ds.samples.reserve(total);
  for (std::size_t id = 0; id < config.num_identities; ++id) {
    for (std::size_t k = 0; k < config.samples_per_identity; ++k) {
      std::vector<double> latent(d);
      for (std::size_t c = 0; c < d; ++c) latent[c] = ds.anchors(id, c) + config.noise_sigma * rng.normal();
      const Raster clean = render(ds, Vector(unit(std::move(latent))));
      MaskSpec spec;
      spec.category = config.mask_category.value_or(static_cast<MaskCategory>(ds.samples.size() % 4));
      spec.target_coverage = config.coverage;
      spec.flip = config.augment_flip && rng.bernoulli(0.5);
      spec.shift = config.augment_shift;
      spec.seed = rng.next();
      MaskedSample masked = synthesize_mask(spec, clean);
      Raster inpainted = baseline_inpaint(masked.masked, masked.mask);
      ds.samples.push_back(Sample{static_cast<int>(id), true, std::move(masked), std::move(inpainted)});
    }
  }

  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t k = train_split_size(total); k < total; ++k) ds.samples[order[k]].train = false;

  std::vector<std::size_t> per_identity(config.num_identities, 0);
  for (const Sample& s : ds.samples)
    if (s.train) ++per_identity[static_cast<std::size_t>(s.label)];
  for (std::size_t id = 0; id < config.num_identities; ++id) {
    if (per_identity[id] == 0) {
      throw InvalidInput("dataset: identity " + std::to_string(id) + " has no training sample; change the seed");
    }
  }
  return ds;
}

Vector teacher_embed(const Raster& clean, const SyntheticIdentityDataset& dataset) {
  const std::size_t d = dataset.config.embed_dim;
  const auto& px = clean.pixels();
  if (px.size() != dataset.unrender.cols()) throw InvalidInput("teacher_embed: raster does not match render space");
  std::vector<double> centred(px.size());
  for (std::size_t p = 0; p < px.size(); ++p) centred[p] = (static_cast<double>(px[p]) - 0.5) / dataset.gain;
  std::vector<double> latent(d);
  for (std::size_t c = 0; c < d; ++c) latent[c] = dot(dataset.unrender.row(c), centred);
  if (l2_norm(latent) == 0.0) throw DegenerateInput("teacher_embed: raster maps to the zero latent");
  return Vector(unit(std::move(latent)));
}

Matrix teacher_logits(const Matrix& teacher_features, const SyntheticIdentityDataset& dataset, double scale) {
  return multiply_transposed(teacher_features, dataset.anchors) * scale;
}

CentroidTable compute_centroids(const Matrix& features, const std::vector<int>& labels, std::size_t num_identities) {
  if (labels.size() != features.rows()) throw InvalidInput("compute_centroids: labels length != rows");
  std::vector<std::vector<double>> sums(num_identities, std::vector<double>(features.cols(), 0.0));
  std::vector<std::size_t> counts(num_identities, 0);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= num_identities) {
      throw InvalidInput("compute_centroids: label " + std::to_string(label) + " out of range");
    }
    const auto row = features.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) sums[static_cast<std::size_t>(label)][c] += row[c];
    ++counts[static_cast<std::size_t>(label)];
  }
  CentroidTable table;
  for (std::size_t id = 0; id < num_identities; ++id) {
    if (counts[id] == 0) throw InvalidInput("compute_centroids: identity " + std::to_string(id) + " has no samples");
    for (double& v : sums[id]) v /= static_cast<double>(counts[id]);
    table.set(static_cast<int>(id), Vector(std::move(sums[id])), counts[id]);
  }
  return table;
}

StudentModel StudentModel::init(std::size_t inputs, std::size_t hidden, std::size_t embed, std::size_t classes,
                                std::uint64_t seed) {
  if (inputs == 0 || hidden == 0 || embed == 0 || classes == 0) throw InvalidInput("StudentModel: empty layer");
  Rng rng(seed);
  StudentModel m;
  m.w1 = gaussian_matrix(hidden, inputs, 1.0 / std::sqrt(static_cast<double>(inputs)), rng);
  m.b1 = Matrix(1, hidden);
  m.w2 = gaussian_matrix(embed, hidden, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  m.b2 = Matrix(1, embed);
  m.wc = gaussian_matrix(classes, embed, 1.0 / std::sqrt(static_cast<double>(embed)), rng);
  m.bc = Matrix(1, classes);
  return m;
}

std::size_t StudentModel::parameter_count() const {
  std::size_t total = 0;
  for (const Matrix* t : tensors()) total += t->size();
  return total;
}

StudentForward student_forward(const StudentModel& model, const Matrix& inputs) {
  if (inputs.cols() != model.inputs()) throw InvalidInput("student_forward: input width does not match model");
  Matrix normalized = inputs;
  for (double& v : normalized.values()) v = (v - model.input_mean) / model.input_scale;
  StudentForward f;
  f.hidden = multiply_transposed(normalized, model.w1);
  add_bias(f.hidden, model.b1);
  for (double& v : f.hidden.values()) v = std::tanh(v);
  f.embed = multiply_transposed(f.hidden, model.w2);
  add_bias(f.embed, model.b2);
  f.logits = multiply_transposed(f.embed, model.wc);
  add_bias(f.logits, model.bc);
  return f;
}

StudentGradients student_backprop(const StudentModel& model, const Matrix& inputs, const Matrix& upstream_embed,
                                  const Matrix& upstream_logits) {
  const std::size_t n = inputs.rows();
  if (upstream_embed.rows() != n || upstream_embed.cols() != model.embed_dim() || upstream_logits.rows() != n ||
      upstream_logits.cols() != model.classes()) {
    throw InvalidInput("student_backprop: upstream gradient shapes do not match the batch");
  }
  const StudentForward f = student_forward(model, inputs);
  Matrix normalized = inputs;
  for (double& v : normalized.values()) v = (v - model.input_mean) / model.input_scale;

  StudentGradients g{Matrix(model.w1.rows(), model.w1.cols()), Matrix(1, model.hidden()),
                     Matrix(model.w2.rows(), model.w2.cols()), Matrix(1, model.embed_dim()),
                     Matrix(model.wc.rows(), model.wc.cols()), Matrix(1, model.classes())};
  accumulate_affine(upstream_logits, f.embed, g.wc, g.bc);
  Matrix embed_grad = propagate(upstream_logits, model.wc);
  embed_grad += upstream_embed;
  accumulate_affine(embed_grad, f.hidden, g.w2, g.b2);
  Matrix hidden_grad = propagate(embed_grad, model.w2);
  for (std::size_t k = 0; k < hidden_grad.size(); ++k) {
    const double h = f.hidden.values()[k];
    hidden_grad.values()[k] *= 1.0 - h * h;
  }
  accumulate_affine(hidden_grad, normalized, g.w1, g.b1);
  return g;
}

void TrainConfig::validate() const {
  if (batch_size < 3) throw InvalidInput("train: batch_size must be >= 3");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw InvalidInput("train: lr0 must be > 0");
  if (!(lr_decay > 0.0) || !std::isfinite(lr_decay)) throw InvalidInput("train: lr_decay must be > 0");
  if (lr_step_epochs == 0) throw InvalidInput("train: lr_step_epochs must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidInput("train: momentum must lie in [0, 1)");
  if (hidden == 0) throw InvalidInput("train: hidden must be >= 1");
  if (!(teacher_logit_scale > 0.0)) throw InvalidInput("train: teacher_logit_scale must be > 0");
  if (!(temperature > 0.0)) throw InvalidInput("train: temperature must be > 0");
  weights.validate();
}

double TrainConfig::learning_rate(std::size_t epoch) const {
  const auto steps = static_cast<int>(epoch / lr_step_epochs);
  const double divisor = 1.0 / lr_decay;
  double lr = lr0;
  for (int k = 0; k < steps; ++k) lr /= divisor;
  return lr;
}

TeacherView build_teacher_view(const SyntheticIdentityDataset& dataset, const TrainConfig& config) {
  const std::size_t n = dataset.samples.size();
  TeacherView view;
  view.features = Matrix(n, dataset.config.embed_dim);
  view.labels.reserve(n);
  std::vector<const Raster*> inputs;
  inputs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = dataset.samples[i];
    const Raster* source = &s.masked.original;
    if (config.teacher_source == TeacherSource::kSameIdentity) {
      // Next sample of the same identity, cyclically.
      for (std::size_t step = 1; step < n; ++step) {
        const Sample& other = dataset.samples[(i + step) % n];
        if (other.label == s.label) {
          source = &other.masked.original;
          break;
        }
      }
    }
    const Vector t = teacher_embed(*source, dataset);
    std::copy(t.values().begin(), t.values().end(), view.features.row(i).begin());
    view.labels.push_back(s.label);
    inputs.push_back(&s.inpainted);
  }
  view.logits = teacher_logits(view.features, dataset, config.teacher_logit_scale);
  view.inputs = raster_rows(inputs);
  return view;
}

Matrix embed_rows(const StudentModel& model, const Matrix& inputs, const std::vector<std::size_t>& rows) {
  return student_forward(model, select_rows(inputs, rows)).embed;
}

LossReport evaluation_loss(const StudentModel& model, const TeacherView& view, const std::vector<std::size_t>& subset,
                           const TrainConfig& config, const CentroidTable* centroids) {
  const Matrix inputs = select_rows(view.inputs, subset);
  const std::vector<int> labels = select_labels(view.labels, subset);
  const StudentForward f = student_forward(model, inputs);
  const FeatureBatch teacher(select_rows(view.features, subset), labels);
  const FeatureBatch student(f.embed, labels);
  return total_loss(teacher, select_rows(view.logits, subset), student, f.logits, config.weights,
                    config.mode == InstanceMode::kSoft ? centroids : nullptr, config.policy,
                    {Reduction::kTupleMean, config.temperature});
}

TrainResult train(const TrainConfig& config, const SyntheticIdentityDataset& dataset, const EpochCallback& on_epoch,
                  const CentroidTable* precomputed_centroids) {
  config.validate();
  const TeacherView view = build_teacher_view(dataset, config);
  std::vector<std::size_t> train_rows = dataset.indices(true);
  if (train_rows.size() < 3) throw InvalidInput("train: need at least 3 training samples");

  TrainResult result;
  if (config.mode == InstanceMode::kSoft) {
    if (precomputed_centroids) {
      result.centroids = *precomputed_centroids;
    } else {
      result.centroids = compute_centroids(select_rows(view.features, train_rows), select_labels(view.labels, train_rows),
                                           dataset.config.num_identities);
    }
  }
  const CentroidTable* centroids = result.centroids ? &*result.centroids : nullptr;

  Rng rng(config.seed);
  result.model = StudentModel::init(view.inputs.cols(), config.hidden, dataset.config.embed_dim,
                                    dataset.config.num_identities, rng.next());
  {
    // Global input standardisation from the training inputs.
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (std::size_t r : train_rows) {
      for (double v : view.inputs.row(r)) {
        sum += v;
        sq += v * v;
        ++count;
      }
    }
    const double mean = sum / static_cast<double>(count);
    const double var = sq / static_cast<double>(count) - mean * mean;
    result.model.input_mean = mean;
    result.model.input_scale = var > 1e-12 ? std::sqrt(var) : 1.0;
  }

  StudentModel& model = result.model;
  std::vector<Matrix> velocity;
  for (const Matrix* t : model.tensors()) velocity.emplace_back(t->rows(), t->cols());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate(epoch);
    rng.shuffle(train_rows);
    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train_rows.size(); start += config.batch_size) {
      const std::size_t end = std::min(train_rows.size(), start + config.batch_size);
      if (end - start < 3) continue;
      const std::vector<std::size_t> rows(train_rows.begin() + static_cast<long>(start),
                                          train_rows.begin() + static_cast<long>(end));
      const Matrix inputs = select_rows(view.inputs, rows);
      const std::vector<int> labels = select_labels(view.labels, rows);
      const StudentForward f = student_forward(model, inputs);
      TuplePolicy policy = config.policy;
      policy.seed = config.policy.seed ^ (epoch * 1000003ULL + start);
      const LossReport report =
          total_loss(FeatureBatch(select_rows(view.features, rows), labels), select_rows(view.logits, rows),
                     FeatureBatch(f.embed, labels), f.logits, config.weights, centroids, policy,
                     {Reduction::kTupleMean, config.temperature});
      if (!std::isfinite(report.total)) {
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch starting " +
                              std::to_string(start));
      }
      const StudentGradients grads = student_backprop(model, inputs, report.grad_student, report.grad_logits);
      const auto params = model.tensors();
      const auto grad_tensors = grads.tensors();
      for (std::size_t t = 0; t < params.size(); ++t) {
        auto p = params[t]->values();
        auto g = grad_tensors[t]->values();
        auto v = velocity[t].values();
        for (std::size_t k = 0; k < p.size(); ++k) {
          v[k] = config.momentum * v[k] + g[k];
          p[k] -= lr * v[k];
        }
        if (!std::all_of(p.begin(), p.end(), [](double x) { return std::isfinite(x); })) {
          throw DivergenceError("train: non-finite parameters at epoch " + std::to_string(epoch));
        }
      }
      record.ce += report.ce;
      record.instance += report.instance;
      record.pair += report.pair;
      record.triplet += report.triplet;
      record.total += report.total;
      ++batches;
    }
    if (batches > 0) {
      const double inv = 1.0 / static_cast<double>(batches);
      record.ce *= inv;
      record.instance *= inv;
      record.pair *= inv;
      record.triplet *= inv;
      record.total *= inv;
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

}  // namespace deocc
