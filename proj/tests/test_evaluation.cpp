#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "deocc/errors.hpp"
#include "deocc/evaluation.hpp"
#include "test_util.hpp"

using namespace deocc;

namespace {

// Exhaustive sweep: every candidate threshold tried against every pair.
double brute_force_accuracy(const std::vector<double>& sims, const std::vector<bool>& same) {
  std::vector<double> thresholds{-1.0, 1.0};
  std::vector<double> sorted = sims;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (std::size_t k = 0; k + 1 < sorted.size(); ++k) thresholds.push_back(0.5 * (sorted[k] + sorted[k + 1]));
  double best = 0.0;
  for (double t : thresholds) {
    std::size_t correct = 0;
    for (std::size_t k = 0; k < sims.size(); ++k) correct += (sims[k] > t) == same[k] ? 1 : 0;
    best = std::max(best, static_cast<double>(correct) / static_cast<double>(sims.size()));
  }
  return best;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("cosine similarity examples") {
    CHECK(cosine_similarity(Vector{1, 0}, Vector{1, 0}) == doctest::Approx(1.0));
    CHECK(cosine_similarity(Vector{1, 0}, Vector{0, 1}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(cosine_similarity(Vector{0, 0}, Vector{1, 0}), InvalidInput);
    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector a = testutil::random_vector(gen, 5), b = testutil::random_vector(gen, 5);
      CHECK(cosine_similarity(a, b) == doctest::Approx(dot(a, b) / (l2_norm(a) * l2_norm(b))).epsilon(1e-12));
    }
  }

  TEST_CASE("separable scores") {
    const VerificationReport r = verify_scores({0.9, 0.8, 0.3, 0.4}, {true, true, false, false});
    CHECK(r.accuracy == 1.0);
    CHECK(r.threshold > 0.4);
    CHECK(r.threshold < 0.8);
    CHECK(r.threshold == doctest::Approx(0.6));
  }

  TEST_CASE("equal similarities give the majority fraction") {
    const VerificationReport r = verify_scores({0.2, 0.2, 0.2, 0.2, 0.2}, {true, false, false, true, false});
    CHECK(r.accuracy == doctest::Approx(0.6));
    CHECK(r.threshold == 1.0);
  }

  TEST_CASE("matches the exhaustive sweep, ROC is monotone and ties take the smallest threshold") {
    std::mt19937_64 gen(20);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 2 + 2 * (gen() % 20);
      std::vector<double> sims(n);
      std::vector<bool> same(n);
      for (std::size_t k = 0; k < n; ++k) {
        sims[k] = gen() % 4 == 0 ? std::round(u(gen) * 4) / 4 : u(gen);
        same[k] = k % 2 == 0;
      }
      const VerificationReport r = verify_scores(sims, same);
      CHECK(r.accuracy == brute_force_accuracy(sims, same));
      std::size_t correct = 0;
      for (std::size_t k = 0; k < n; ++k) correct += (sims[k] > r.threshold) == same[k] ? 1 : 0;
      CHECK(static_cast<double>(correct) / static_cast<double>(n) == r.accuracy);
      for (std::size_t k = 1; k < r.roc.size(); ++k) {
        CHECK(r.roc[k].first >= r.roc[k - 1].first);
        CHECK(r.roc[k].second >= r.roc[k - 1].second);
      }
      CHECK(r.accuracy >= 0.5);
    }
  }

  TEST_CASE("accuracy is invariant under strictly increasing transforms") {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> sims(30), squashed(30);
      std::vector<bool> same(30);
      for (std::size_t k = 0; k < 30; ++k) {
        sims[k] = u(gen);
        squashed[k] = std::tanh(3.0 * sims[k]) * 0.5;
        same[k] = gen() % 2 == 0;
      }
      CHECK(verify_scores(sims, same).accuracy == verify_scores(squashed, same).accuracy);
    }
  }

  TEST_CASE("verify_scores input checks") {
    CHECK_THROWS_AS(verify_scores({}, {}), InvalidInput);
    CHECK_THROWS_AS(verify_scores({0.1}, {true, false}), InvalidInput);
  }

  TEST_CASE("pair sets are balanced, free of self pairs and seeded") {
    std::vector<int> labels;
    std::vector<std::size_t> samples;
    for (std::size_t k = 0; k < 60; ++k) {
      labels.push_back(static_cast<int>(k % 6));
      if (k % 3 != 0) samples.push_back(k);
    }
    const PairSet a = make_pair_set(samples, labels, 50, 4);
    const PairSet b = make_pair_set(samples, labels, 50, 4);
    std::size_t pos = 0, neg = 0;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t k = 0; k < a.pairs.size(); ++k) {
      const auto& p = a.pairs[k];
      CHECK(p.a != p.b);
      CHECK(p.same == (labels[p.a] == labels[p.b]));
      CHECK(seen.insert({std::min(p.a, p.b), std::max(p.a, p.b)}).second);
      CHECK(p.a == b.pairs[k].a);
      CHECK(p.b == b.pairs[k].b);
      (p.same ? pos : neg)++;
    }
    CHECK(pos == 50);
    CHECK(neg == 50);
    CHECK_NOTHROW(a.validate());
    PairSet bad{{{1, 1, true}}};
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
    PairSet unbalanced{{{1, 2, true}, {1, 3, true}, {2, 3, true}}};
    CHECK_THROWS_AS(unbalanced.validate(), InvalidInput);
    CHECK_THROWS_AS(PairSet{}.validate(), InvalidInput);
  }

  TEST_CASE("rank-1 examples") {
    std::mt19937_64 gen(30);
    const Matrix g = testutil::random_matrix(gen, 6, 4);
    const std::vector<int> gl{0, 1, 2, 3, 4, 5};
    CHECK(rank1_accuracy(g, gl, g, gl) == 1.0);
    CHECK(rank1_accuracy(g * 3.0, gl, g, gl) == 1.0);
    const std::vector<int> one{2, 2, 2, 2, 2, 2};
    CHECK(rank1_accuracy(g, one, g, one) == 1.0);
    CHECK_THROWS_AS(rank1_accuracy(g, one, g, gl), InvalidInput);
  }

  TEST_CASE("rank-1 matches a nearest-neighbour loop and ignores global scale") {
    std::mt19937_64 gen(31);
    for (int trial = 0; trial < 30; ++trial) {
      const Matrix g = testutil::random_matrix(gen, 10, 3), p = testutil::random_matrix(gen, 7, 3);
      std::vector<int> gl(10), pl(7);
      for (std::size_t k = 0; k < 10; ++k) gl[k] = static_cast<int>(k % 4);
      for (std::size_t k = 0; k < 7; ++k) pl[k] = static_cast<int>(gen() % 4);
      std::size_t hits = 0;
      for (std::size_t q = 0; q < 7; ++q) {
        std::size_t best = 0;
        double best_sim = -2.0;
        for (std::size_t r = 0; r < 10; ++r) {
          const double s = cosine_similarity(p.row(q), g.row(r));
          if (s > best_sim) {
            best_sim = s;
            best = r;
          }
        }
        hits += gl[best] == pl[q] ? 1 : 0;
      }
      const double expected = static_cast<double>(hits) / 7.0;
      CHECK(rank1_accuracy(g, gl, p, pl) == expected);
      CHECK(rank1_accuracy(g * 0.01, gl, p * 9.0, pl) == expected);
    }
  }

  TEST_CASE("verify and rank1_identify run through the student") {
    const StudentModel model = StudentModel::init(5, 4, 3, 2, 1);
    std::mt19937_64 gen(32);
    Matrix inputs(6, 5);
    for (double& v : inputs.values()) v = std::uniform_real_distribution<double>(0, 1)(gen);
    const PairSet pairs{{{0, 1, true}, {2, 3, false}, {4, 5, true}, {0, 5, false}}};
    const VerificationReport r = verify(model, inputs, pairs);
    const Matrix e = student_forward(model, inputs).embed;
    std::vector<double> sims;
    std::vector<bool> same;
    for (const auto& p : pairs.pairs) {
      sims.push_back(cosine_similarity(e.row(p.a), e.row(p.b)));
      same.push_back(p.same);
    }
    CHECK(r.accuracy == verify_scores(sims, same).accuracy);
    CHECK(rank1_identify(model, inputs, {0, 1, 2, 3, 4, 5}, inputs, {0, 1, 2, 3, 4, 5}) == 1.0);
  }
}
