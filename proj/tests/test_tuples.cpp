#include <doctest.h>

#include <set>
#include <tuple>

#include "deocc/errors.hpp"
#include "deocc/tuples.hpp"

using namespace deocc;

namespace {

std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST_SUITE("tuple_enumeration") {
  TEST_CASE("pairs for n=3 in lexicographic order") {
    const auto pairs = enumerate_pairs(3);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0] == IndexPair{0, 1});
    CHECK(pairs[1] == IndexPair{0, 2});
    CHECK(pairs[2] == IndexPair{1, 2});
  }

  TEST_CASE("pair and triplet counts for n=128") {
    CHECK(enumerate_pairs(128).size() == 8128);
    CHECK(pair_count(128) == 8128);
    CHECK(enumerate_triplets(128).size() == 341376);
    CHECK(triplet_count(128, TripletMode::kVertexMiddle) == 341376);
  }

  TEST_CASE("vertex-middle triple for n=3") {
    const auto t = enumerate_triplets(3);
    REQUIRE(t.size() == 1);
    CHECK(t[0] == IndexTriplet{0, 1, 2});
  }

  TEST_CASE("all-vertices mode for n=4 gives 12 triples") {
    TuplePolicy policy;
    policy.triplet_mode = TripletMode::kAllVertices;
    const auto t = enumerate_triplets(4, policy);
    CHECK(t.size() == 12);
    CHECK(triplet_count(4, TripletMode::kAllVertices) == 12);
    std::set<std::size_t> vertices_of_012;
    for (const auto& x : t) {
      std::set<std::size_t> s{x.i, x.j, x.k};
      if (s == std::set<std::size_t>{0, 1, 2}) vertices_of_012.insert(x.j);
    }
    CHECK(vertices_of_012 == std::set<std::size_t>{0, 1, 2});
  }

  TEST_CASE("counts match brute force and tuples are unique with distinct indices") {
    for (std::size_t n = 3; n <= 12; ++n) {
      CHECK(enumerate_pairs(n).size() == choose(n, 2));
      for (TripletMode mode : {TripletMode::kVertexMiddle, TripletMode::kAllVertices}) {
        TuplePolicy policy;
        policy.triplet_mode = mode;
        const auto t = enumerate_triplets(n, policy);
        CHECK(t.size() == (mode == TripletMode::kVertexMiddle ? 1 : 3) * choose(n, 3));
        std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
        for (const auto& x : t) {
          CHECK(x.i != x.j);
          CHECK(x.j != x.k);
          CHECK(x.i != x.k);
          CHECK(x.i < x.k);
          if (mode == TripletMode::kVertexMiddle) {
            CHECK(x.i < x.j);
            CHECK(x.j < x.k);
          }
          CHECK(seen.insert({x.i, x.j, x.k}).second);
        }
      }
    }
  }

  TEST_CASE("capped enumeration is deterministic, unique and seed dependent") {
    TuplePolicy policy;
    policy.max_tuples = 20;
    policy.seed = 99;
    const auto a = enumerate_pairs(10, policy);
    const auto b = enumerate_pairs(10, policy);
    CHECK(a.size() == 20);
    CHECK(a == b);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& p : a) {
      CHECK(p.i < p.j);
      CHECK(seen.insert({p.i, p.j}).second);
    }
    policy.seed = 100;
    CHECK(enumerate_pairs(10, policy) != a);

    policy.max_tuples = 1000;
    CHECK(enumerate_pairs(10, policy).size() == 45);
    policy.max_tuples = 7;
    const auto t1 = enumerate_triplets(9, policy);
    CHECK(t1.size() == 7);
    CHECK(t1 == enumerate_triplets(9, policy));
  }

  TEST_CASE("small batches are rejected") {
    CHECK_THROWS_AS(enumerate_pairs(1), InvalidInput);
    CHECK_THROWS_AS(enumerate_triplets(2), InvalidInput);
    CHECK_THROWS_AS(parse_triplet_mode("sideways"), InvalidInput);
    CHECK(parse_triplet_mode(to_string(TripletMode::kAllVertices)) == TripletMode::kAllVertices);
  }
}
