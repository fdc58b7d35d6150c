#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace deocc {

enum class TripletMode {
  kVertexMiddle,  // one triple per index set, vertex = middle sorted index
  kAllVertices,   // three triples per index set, each index once as vertex
};

TripletMode parse_triplet_mode(const std::string& text);
std::string to_string(TripletMode mode);

/// How relational losses draw tuples from a mini-batch. Pairs are always the
/// unordered distinct pairs; max_tuples caps the stream by seeded sampling.
struct TuplePolicy {
  TripletMode triplet_mode = TripletMode::kVertexMiddle;
  std::optional<std::size_t> max_tuples;
  std::uint64_t seed = 0;
};

struct IndexPair {
  std::size_t i;
  std::size_t j;
  bool operator==(const IndexPair&) const = default;
};

/// (i, j, k) with j the angle vertex.
struct IndexTriplet {
  std::size_t i;
  std::size_t j;
  std::size_t k;
  bool operator==(const IndexTriplet&) const = default;
};

std::vector<IndexPair> enumerate_pairs(std::size_t n, const TuplePolicy& policy = {});
std::vector<IndexTriplet> enumerate_triplets(std::size_t n, const TuplePolicy& policy = {});

std::uint64_t pair_count(std::size_t n);
std::uint64_t triplet_count(std::size_t n, TripletMode mode);

}  // namespace deocc
