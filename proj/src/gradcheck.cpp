#include "deocc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deocc/errors.hpp"
#include "deocc/harness.hpp"
#include "deocc/relational_losses.hpp"

namespace deocc {

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

// Redraws student entries until every coordinate is clear of an L1 tie.
Matrix away_from_ties(Rng& rng, const Matrix& teacher, double margin) {
  Matrix s = random_matrix(rng, teacher.rows(), teacher.cols());
  for (std::size_t k = 0; k < s.size(); ++k) {
    while (std::abs(s.values()[k] - teacher.values()[k]) < margin) s.values()[k] = rng.normal();
  }
  return s;
}

std::vector<int> random_labels(Rng& rng, std::size_t n, int classes) {
  std::vector<int> labels(n);
  for (int& l : labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return labels;
}

Matrix flatten(const std::vector<const Matrix*>& parts) {
  std::size_t total = 0;
  for (const Matrix* p : parts) total += p->size();
  Matrix out(1, total);
  std::size_t offset = 0;
  for (const Matrix* p : parts) {
    std::copy(p->values().begin(), p->values().end(), out.values().begin() + static_cast<long>(offset));
    offset += p->size();
  }
  return out;
}

void unflatten(const Matrix& flat, StudentModel& model) {
  std::size_t offset = 0;
  for (Matrix* p : model.tensors()) {
    std::copy_n(flat.values().begin() + static_cast<long>(offset), p->size(), p->values().begin());
    offset += p->size();
  }
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  return dot(a.values(), b.values());
}

}  // namespace

std::vector<GradientCase> standard_gradient_cases() {
  std::vector<GradientCase> cases;

  cases.push_back({"ce_distill", [](Rng& rng) {
                     const Matrix teacher = random_matrix(rng, 5, 4, 2.0);
                     const double temperature = rng.uniform(0.5, 3.0);
                     return GradientProblem{
                         random_matrix(rng, 5, 4, 2.0),
                         [=](const Matrix& x) { return ce_distill(teacher, x, temperature).value; },
                         [=](const Matrix& x) { return ce_distill(teacher, x, temperature).grad; }};
                   }});

  cases.push_back({"instance_loss", [](Rng& rng) {
                     const FeatureBatch teacher(random_matrix(rng, 6, 4));
                     return GradientProblem{
                         away_from_ties(rng, teacher.features(), 1e-2),
                         [=](const Matrix& x) { return instance_loss(teacher, FeatureBatch(x)).value; },
                         [=](const Matrix& x) { return instance_loss(teacher, FeatureBatch(x)).grad; }};
                   }});

  cases.push_back({"soft_instance_loss", [](Rng& rng) {
                     const std::vector<int> labels = random_labels(rng, 6, 3);
                     const FeatureBatch teacher(random_matrix(rng, 6, 4), labels);
                     CentroidTable centroids;
                     for (int c = 0; c < 3; ++c) centroids.set(c, random_matrix(rng, 1, 4).row_vector(0), 1);
                     return GradientProblem{
                         away_from_ties(rng, teacher.features(), 1e-2),
                         [=](const Matrix& x) {
                           return soft_instance_loss(teacher, FeatureBatch(x, labels), centroids).value;
                         },
                         [=](const Matrix& x) {
                           return soft_instance_loss(teacher, FeatureBatch(x, labels), centroids).grad;
                         }};
                   }});

  cases.push_back({"pair_loss", [](Rng& rng) {
                     const FeatureBatch teacher(random_matrix(rng, 6, 4));
                     const double delta = rng.uniform(0.05, 1.5);
                     return GradientProblem{
                         random_matrix(rng, 6, 4),
                         [=](const Matrix& x) { return pair_loss(teacher, FeatureBatch(x), delta).value; },
                         [=](const Matrix& x) { return pair_loss(teacher, FeatureBatch(x), delta).grad; }};
                   }});

  cases.push_back({"triplet_loss", [](Rng& rng) {
                     const FeatureBatch teacher(random_matrix(rng, 5, 3));
                     const double delta = rng.uniform(0.05, 1.5);
                     TuplePolicy policy;
                     policy.triplet_mode = rng.bernoulli(0.5) ? TripletMode::kAllVertices : TripletMode::kVertexMiddle;
                     return GradientProblem{
                         random_matrix(rng, 5, 3),
                         [=](const Matrix& x) { return triplet_loss(teacher, FeatureBatch(x), delta, policy).value; },
                         [=](const Matrix& x) { return triplet_loss(teacher, FeatureBatch(x), delta, policy).grad; }};
                   }});

  cases.push_back({"student_backprop", [](Rng& rng) {
                     StudentModel model = StudentModel::init(5, 4, 3, 3, rng.next());
                     model.input_mean = rng.uniform(0.2, 0.8);
                     model.input_scale = rng.uniform(0.1, 1.0);
                     Matrix inputs(4, 5);
                     for (double& v : inputs.values()) v = rng.uniform();
                     const Matrix up_embed = random_matrix(rng, 4, 3);
                     const Matrix up_logits = random_matrix(rng, 4, 3);
                     const Matrix point = flatten(std::as_const(model).tensors());
                     return GradientProblem{
                         point,
                         [=](const Matrix& x) {
                           StudentModel m = model;
                           unflatten(x, m);
                           const StudentForward f = student_forward(m, inputs);
                           return frobenius_inner(up_embed, f.embed) + frobenius_inner(up_logits, f.logits);
                         },
                         [=](const Matrix& x) {
                           StudentModel m = model;
                           unflatten(x, m);
                           return flatten(student_backprop(m, inputs, up_embed, up_logits).tensors());
                         }};
                   }});

  return cases;
}

std::vector<GradcheckRow> run_gradcheck(const std::vector<GradientCase>& cases, std::size_t points, std::uint64_t seed,
                                        double tolerance, double step) {
  if (points == 0) throw InvalidInput("gradcheck: points must be >= 1");
  if (!(tolerance > 0.0) || !(step > 0.0)) throw InvalidInput("gradcheck: tolerance and step must be > 0");
  Rng seeds(seed);
  std::vector<GradcheckRow> rows;
  for (const GradientCase& c : cases) {
    Rng rng(seeds.next());
    GradcheckRow row{c.name, points, 0.0, true};
    for (std::size_t p = 0; p < points; ++p) {
      const GradientProblem problem = c.draw(rng);
      double error = std::numeric_limits<double>::infinity();
      try {
        const Matrix analytic = problem.gradient(problem.point);
        const Matrix numeric = finite_diff_grad(problem.value, problem.point, step);
        if (analytic.same_shape(numeric)) error = gradient_relative_error(analytic.values(), numeric.values());
      } catch (const OracleFailure&) {
      }
      if (std::isnan(error)) error = std::numeric_limits<double>::infinity();
      if (!(error < tolerance)) row.pass = false;
      row.worst_error = std::max(row.worst_error, error);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace deocc
