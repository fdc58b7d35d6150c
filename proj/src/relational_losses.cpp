#include "deocc/relational_losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deocc/errors.hpp"

namespace deocc {

namespace {

constexpr double kCoincidentTolerance = 1e-12;

void require_same_shape(const FeatureBatch& teacher, const FeatureBatch& student, const char* op) {
  if (teacher.size() != student.size() || teacher.dim() != student.dim()) {
    throw InvalidInput(std::string(op) + ": teacher and student batches differ in shape");
  }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Row-wise log-softmax of logits / temperature.
std::vector<double> log_softmax_row(std::span<const double> logits, double temperature) {
  double peak = logits[0] / temperature;
  for (double z : logits) peak = std::max(peak, z / temperature);
  double total = 0.0;
  for (double z : logits) total += std::exp(z / temperature - peak);
  const double log_total = peak + std::log(total);
  std::vector<double> out(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) out[c] = logits[c] / temperature - log_total;
  return out;
}

// Unit difference vectors (row_i - row_j)/||row_i - row_j|| for every ordered
// (vertex j, endpoint i), with the norms. Zero-norm entries are left as zeros.
struct UnitDifferences {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> unit;  // index (j * n + i) * d
  std::vector<double> norm;  // index j * n + i

  explicit UnitDifferences(const Matrix& x) : n(x.rows()), d(x.cols()), unit(n * n * d, 0.0), norm(n * n, 0.0) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        if (i == j) continue;
        double* u = &unit[(j * n + i) * d];
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          u[c] = x(i, c) - x(j, c);
          sq += u[c] * u[c];
        }
        const double len = std::sqrt(sq);
        norm[j * n + i] = len;
        if (len >= kCoincidentTolerance) {
          for (std::size_t c = 0; c < d; ++c) u[c] /= len;
        }
      }
    }
  }

  const double* u(std::size_t vertex, std::size_t end) const { return &unit[(vertex * n + end) * d]; }
  double length(std::size_t vertex, std::size_t end) const { return norm[vertex * n + end]; }
};

template <typename Visit>
void for_each_triplet(std::size_t n, const TuplePolicy& policy, Visit&& visit) {
  if (n < 3) throw InvalidInput("triplet_loss: need n >= 3");
  if (policy.max_tuples) {
    for (const IndexTriplet& t : enumerate_triplets(n, policy)) visit(t.i, t.j, t.k);
    return;
  }
  const bool all_vertices = policy.triplet_mode == TripletMode::kAllVertices;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      for (std::size_t c = b + 1; c < n; ++c) {
        visit(a, b, c);
        if (all_vertices) {
          visit(b, a, c);
          visit(a, c, b);
        }
      }
}

}  // namespace

FeatureBatch::FeatureBatch(Matrix features, std::vector<int> labels)
    : features_(std::move(features)), labels_(std::move(labels)) {
  if (features_.rows() == 0 || features_.cols() == 0) throw InvalidInput("FeatureBatch: empty batch");
  if (labels_.size() != features_.rows()) throw InvalidInput("FeatureBatch: labels length != rows");
  for (int label : labels_) {
    if (label < 0) throw InvalidInput("FeatureBatch: labels must be non-negative");
  }
  features_.check_finite();
}

FeatureBatch::FeatureBatch(Matrix features) : FeatureBatch(features, std::vector<int>(features.rows(), 0)) {}

void CentroidTable::set(int label, Vector centroid, std::size_t count) {
  if (!centroids_.empty() && centroids_.begin()->second.dim() != centroid.dim()) {
    throw InvalidInput("CentroidTable: centroid dimension mismatch");
  }
  centroids_.insert_or_assign(label, std::move(centroid));
  counts_[label] = count;
}

const Vector& CentroidTable::at(int label) const {
  auto it = centroids_.find(label);
  if (it == centroids_.end()) throw InvalidInput("CentroidTable: no centroid for label " + std::to_string(label));
  return it->second;
}

std::size_t CentroidTable::count(int label) const {
  auto it = counts_.find(label);
  return it == counts_.end() ? 0 : it->second;
}

void LossWeights::validate() const {
  for (double w : {lambda_i, lambda_p, lambda_t}) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidInput("LossWeights: weights must be finite and >= 0");
  }
  if (!std::isfinite(huber_delta) || !(huber_delta > 0.0)) {
    throw InvalidInput("LossWeights: huber_delta must be finite and > 0");
  }
}

LossGrad ce_distill(const Matrix& teacher_logits, const Matrix& student_logits, double temperature) {
  if (!teacher_logits.same_shape(student_logits) || teacher_logits.rows() == 0 || teacher_logits.cols() == 0) {
    throw InvalidInput("ce_distill: logits must share a non-empty shape");
  }
  if (!(temperature > 0.0)) throw InvalidInput("ce_distill: temperature must be > 0");
  const std::size_t n = teacher_logits.rows();
  const std::size_t classes = teacher_logits.cols();
  LossGrad out{0.0, Matrix(n, classes), n, 0};
  for (std::size_t r = 0; r < n; ++r) {
    const auto log_p = log_softmax_row(teacher_logits.row(r), temperature);
    const auto log_q = log_softmax_row(student_logits.row(r), temperature);
    double row_loss = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(log_p[c]);
      row_loss -= p * log_q[c];
      out.grad(r, c) = (std::exp(log_q[c]) - p) / (static_cast<double>(n) * temperature);
    }
    out.value += row_loss;
  }
  out.value /= static_cast<double>(n);
  return out;
}

LossGrad instance_loss(const FeatureBatch& teacher, const FeatureBatch& student) {
  require_same_shape(teacher, student, "instance_loss");
  const std::size_t n = student.size();
  const std::size_t d = student.dim();
  LossGrad out{0.0, Matrix(n, d), n, 0};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = student.features()(i, c) - teacher.features()(i, c);
      out.value += std::abs(diff);
      out.grad(i, c) = sign(diff);
    }
  }
  return out;
}

LossGrad soft_instance_loss(const FeatureBatch& teacher, const FeatureBatch& student,
                            const CentroidTable& centroids) {
  require_same_shape(teacher, student, "soft_instance_loss");
  const std::size_t n = student.size();
  const std::size_t d = student.dim();
  LossGrad out{0.0, Matrix(n, d), n, 0};
  for (std::size_t i = 0; i < n; ++i) {
    if (teacher.labels()[i] != student.labels()[i]) {
      throw InvalidInput("soft_instance_loss: teacher and student labels differ at row " + std::to_string(i));
    }
    const Vector& center = centroids.at(student.labels()[i]);
    if (center.dim() != d) throw InvalidInput("soft_instance_loss: centroid dimension mismatch");
    for (std::size_t c = 0; c < d; ++c) {
      const double teacher_centered = teacher.features()(i, c) - center[c];
      const double student_centered = student.features()(i, c) - center[c];
      const double diff = student_centered - teacher_centered;
      out.value += std::abs(diff);
      out.grad(i, c) = sign(diff);
    }
  }
  return out;
}

PairPotential pair_potential(const FeatureBatch& batch) {
  const std::size_t n = batch.size();
  if (n < 2) throw InvalidInput("pair_potential: need n >= 2");
  PairPotential out;
  out.pairs = enumerate_pairs(n);
  out.distance.reserve(out.pairs.size());
  double total = 0.0;
  for (const auto& [i, j] : out.pairs) {
    double sq = 0.0;
    for (std::size_t c = 0; c < batch.dim(); ++c) {
      const double diff = batch.features()(i, c) - batch.features()(j, c);
      sq += diff * diff;
    }
    out.distance.push_back(std::sqrt(sq));
    total += out.distance.back();
  }
  out.mu = total / static_cast<double>(out.pairs.size());
  if (out.mu < 1e-12) throw DegenerateInput("pair_potential: all rows coincide (mu < 1e-12)");
  out.psi.reserve(out.distance.size());
  for (double dist : out.distance) out.psi.push_back(dist / out.mu);
  return out;
}

LossGrad pair_loss(const FeatureBatch& teacher, const FeatureBatch& student, double delta, const TuplePolicy& policy) {
  require_same_shape(teacher, student, "pair_loss");
  if (!(delta > 0.0)) throw InvalidInput("pair_loss: delta must be > 0");
  const std::size_t n = student.size();
  const std::size_t d = student.dim();
  const PairPotential pt = pair_potential(teacher);
  const PairPotential ps = pair_potential(student);
  const double total_pairs = static_cast<double>(ps.pairs.size());

  // Pair positions selected by the policy; all pairs when uncapped.
  std::vector<std::size_t> selected;
  if (policy.max_tuples) {
    for (const IndexPair& p : enumerate_pairs(n, policy)) {
      // Lexicographic index of (i, j) among unordered pairs.
      selected.push_back(p.i * n - p.i * (p.i + 1) / 2 + (p.j - p.i - 1));
    }
  } else {
    selected.resize(ps.pairs.size());
    for (std::size_t k = 0; k < selected.size(); ++k) selected[k] = k;
  }

  // dL/dpsi_s per pair (zero for unselected pairs).
  std::vector<double> upstream(ps.pairs.size(), 0.0);
  LossGrad out{0.0, Matrix(n, d), selected.size(), 0};
  double coupling = 0.0;
  for (std::size_t k : selected) {
    out.value += huber(pt.psi[k], ps.psi[k], delta);
    upstream[k] = -huber_derivative(pt.psi[k], ps.psi[k], delta);
    coupling += upstream[k] * ps.distance[k];
  }
  // psi = dist / mu with mu = mean(dist): every distance also moves mu.
  coupling /= ps.mu * ps.mu * total_pairs;

  for (std::size_t k = 0; k < ps.pairs.size(); ++k) {
    const double dist = ps.distance[k];
    if (dist < kCoincidentTolerance) continue;
    const double coeff = (upstream[k] / ps.mu - coupling) / dist;
    if (coeff == 0.0) continue;
    const auto [i, j] = ps.pairs[k];
    for (std::size_t c = 0; c < d; ++c) {
      const double g = coeff * (student.features()(i, c) - student.features()(j, c));
      out.grad(i, c) += g;
      out.grad(j, c) -= g;
    }
  }
  return out;
}

double triplet_potential(std::span<const double> vi, std::span<const double> vj, std::span<const double> vk) {
  if (vi.size() != vj.size() || vk.size() != vj.size()) throw InvalidInput("triplet_potential: dimension mismatch");
  double ee = 0.0, ff = 0.0, ef = 0.0;
  for (std::size_t c = 0; c < vj.size(); ++c) {
    const double e = vi[c] - vj[c];
    const double f = vk[c] - vj[c];
    ee += e * e;
    ff += f * f;
    ef += e * f;
  }
  const double a = std::sqrt(ee);
  const double b = std::sqrt(ff);
  if (a < kCoincidentTolerance || b < kCoincidentTolerance) {
    throw DegenerateInput("triplet_potential: endpoint coincides with vertex");
  }
  return std::clamp(ef / (a * b), -1.0, 1.0);
}

double triplet_potential(const Vector& vi, const Vector& vj, const Vector& vk) {
  return triplet_potential(vi.values(), vj.values(), vk.values());
}

LossGrad triplet_loss(const FeatureBatch& teacher, const FeatureBatch& student, double delta,
                      const TuplePolicy& policy) {
  require_same_shape(teacher, student, "triplet_loss");
  if (!(delta > 0.0)) throw InvalidInput("triplet_loss: delta must be > 0");
  const std::size_t n = student.size();
  const std::size_t d = student.dim();
  if (n < 3) throw InvalidInput("triplet_loss: need n >= 3");
  const UnitDifferences ut(teacher.features());
  const UnitDifferences us(student.features());
  LossGrad out{0.0, Matrix(n, d), 0, 0};
  auto grad = out.grad.values();

  for_each_triplet(n, policy, [&](std::size_t i, std::size_t j, std::size_t k) {
    const double ta = ut.length(j, i), tb = ut.length(j, k);
    const double sa = us.length(j, i), sb = us.length(j, k);
    if (ta < kCoincidentTolerance || tb < kCoincidentTolerance || sa < kCoincidentTolerance ||
        sb < kCoincidentTolerance) {
      ++out.skipped;
      return;
    }
    const double* t_ji = ut.u(j, i);
    const double* t_jk = ut.u(j, k);
    const double* s_ji = us.u(j, i);
    const double* s_jk = us.u(j, k);
    double cos_t = 0.0, cos_s = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      cos_t += t_ji[c] * t_jk[c];
      cos_s += s_ji[c] * s_jk[c];
    }
    out.value += huber(cos_t, cos_s, delta);
    ++out.terms;
    const double upstream = -huber_derivative(cos_t, cos_s, delta);
    if (upstream == 0.0) return;
    // d cos / d s_i = (u_jk - cos u_ji) / |s_i - s_j|, symmetric for s_k.
    const double gi_scale = upstream / sa;
    const double gk_scale = upstream / sb;
    double* gi = &grad[i * d];
    double* gj = &grad[j * d];
    double* gk = &grad[k * d];
    for (std::size_t c = 0; c < d; ++c) {
      const double di = gi_scale * (s_jk[c] - cos_s * s_ji[c]);
      const double dk = gk_scale * (s_ji[c] - cos_s * s_jk[c]);
      gi[c] += di;
      gk[c] += dk;
      gj[c] -= di + dk;
    }
  });
  return out;
}

LossReport total_loss(const FeatureBatch& teacher, const Matrix& teacher_logits, const FeatureBatch& student,
                      const Matrix& student_logits, const LossWeights& weights, const CentroidTable* centroids,
                      const TuplePolicy& policy, const TotalLossOptions& options) {
  weights.validate();
  require_same_shape(teacher, student, "total_loss");
  if (student_logits.rows() != student.size()) throw InvalidInput("total_loss: logits rows != batch size");
  const std::size_t n = student.size();
  const bool mean = options.reduction == Reduction::kTupleMean;
  auto normalized = [mean](const LossGrad& part) {
    return mean && part.terms > 0 ? 1.0 / static_cast<double>(part.terms) : 1.0;
  };

  LossReport report;
  const LossGrad ce = ce_distill(teacher_logits, student_logits, options.temperature);
  report.ce = ce.value;
  report.grad_logits = ce.grad;
  report.grad_student = Matrix(n, student.dim());

  auto accumulate = [&](const LossGrad& part, double weight, double& slot) {
    const double scale = normalized(part);
    slot = part.value * scale;
    if (weight != 0.0) report.grad_student += part.grad * (weight * scale);
  };

  const LossGrad inst = centroids ? soft_instance_loss(teacher, student, *centroids) : instance_loss(teacher, student);
  accumulate(inst, weights.lambda_i, report.instance);

  if (n >= 2 || weights.lambda_p > 0.0) {
    accumulate(pair_loss(teacher, student, weights.huber_delta, policy), weights.lambda_p, report.pair);
  }
  if (n >= 3 || weights.lambda_t > 0.0) {
    const LossGrad trip = triplet_loss(teacher, student, weights.huber_delta, policy);
    report.skipped_triplets = trip.skipped;
    accumulate(trip, weights.lambda_t, report.triplet);
  }
  report.total = report.ce + weights.lambda_i * report.instance + weights.lambda_p * report.pair +
                 weights.lambda_t * report.triplet;
  return report;
}

}  // namespace deocc
