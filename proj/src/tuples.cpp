#include "deocc/tuples.hpp"

#include <algorithm>

#include "deocc/errors.hpp"
#include "deocc/random.hpp"

namespace deocc {

TripletMode parse_triplet_mode(const std::string& text) {
  if (text == "vertex-middle") return TripletMode::kVertexMiddle;
  if (text == "all-vertices") return TripletMode::kAllVertices;
  throw InvalidInput("unknown triplet mode '" + text + "' (expected vertex-middle or all-vertices)");
}

std::string to_string(TripletMode mode) {
  return mode == TripletMode::kVertexMiddle ? "vertex-middle" : "all-vertices";
}

std::uint64_t pair_count(std::size_t n) {
  const std::uint64_t m = n;
  return n < 2 ? 0 : m * (m - 1) / 2;
}

std::uint64_t triplet_count(std::size_t n, TripletMode mode) {
  const std::uint64_t m = n;
  const std::uint64_t sets = n < 3 ? 0 : m * (m - 1) * (m - 2) / 6;
  return mode == TripletMode::kVertexMiddle ? sets : 3 * sets;
}

namespace {

// Uniform subset of `cap` items from a stream, order preserved. Selection is
// a pure function of (stream length, cap, seed).
template <typename T, typename Emit>
std::vector<T> capped_stream(std::optional<std::size_t> cap, std::uint64_t seed, Emit&& emit) {
  std::vector<T> out;
  if (!cap) {
    emit([&](const T& item) { out.push_back(item); });
    return out;
  }
  if (*cap == 0) throw InvalidInput("max_tuples must be positive");
  // Reservoir of (stream position, item); positions restore stream order.
  std::vector<std::pair<std::uint64_t, T>> reservoir;
  reservoir.reserve(*cap);
  Rng rng(seed);
  std::uint64_t seen = 0;
  emit([&](const T& item) {
    if (reservoir.size() < *cap) {
      reservoir.emplace_back(seen, item);
    } else {
      const std::uint64_t slot = rng.below(seen + 1);
      if (slot < *cap) reservoir[slot] = {seen, item};
    }
    ++seen;
  });
  std::sort(reservoir.begin(), reservoir.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  out.reserve(reservoir.size());
  for (auto& [pos, item] : reservoir) out.push_back(item);
  return out;
}

}  // namespace

std::vector<IndexPair> enumerate_pairs(std::size_t n, const TuplePolicy& policy) {
  if (n < 2) throw InvalidInput("enumerate_pairs: need n >= 2");
  return capped_stream<IndexPair>(policy.max_tuples, policy.seed, [n](auto&& sink) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) sink(IndexPair{i, j});
  });
}

std::vector<IndexTriplet> enumerate_triplets(std::size_t n, const TuplePolicy& policy) {
  if (n < 3) throw InvalidInput("enumerate_triplets: need n >= 3");
  const bool all_vertices = policy.triplet_mode == TripletMode::kAllVertices;
  return capped_stream<IndexTriplet>(policy.max_tuples, policy.seed, [n, all_vertices](auto&& sink) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        for (std::size_t c = b + 1; c < n; ++c) {
          sink(IndexTriplet{a, b, c});
          if (all_vertices) {
            sink(IndexTriplet{b, a, c});
            sink(IndexTriplet{a, c, b});
          }
        }
  });
}

}  // namespace deocc
