#include <doctest.h>

#include <cmath>
#include <queue>

#include "deocc/errors.hpp"
#include "deocc/occlusion.hpp"
#include "deocc/random.hpp"

using namespace deocc;

namespace {

Raster random_raster(Rng& rng, std::size_t side) {
  std::vector<float> px(side * side);
  for (float& v : px) v = static_cast<float>(rng.uniform());
  return Raster(side, side, 1, std::move(px));
}

bool connected(const BinaryMask& m) {
  std::size_t start = m.height() * m.width();
  for (std::size_t k = 0; k < m.bits().size(); ++k) {
    if (m.bits()[k]) {
      start = k;
      break;
    }
  }
  if (start == m.bits().size()) return true;
  std::vector<bool> seen(m.bits().size(), false);
  std::queue<std::size_t> q;
  q.push(start);
  seen[start] = true;
  std::size_t reached = 0;
  while (!q.empty()) {
    const std::size_t k = q.front();
    q.pop();
    ++reached;
    const std::size_t y = k / m.width(), x = k % m.width();
    const std::pair<int, int> steps[] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    for (auto [dy, dx] : steps) {
      const long ny = static_cast<long>(y) + dy, nx = static_cast<long>(x) + dx;
      if (ny < 0 || nx < 0 || ny >= static_cast<long>(m.height()) || nx >= static_cast<long>(m.width())) continue;
      const std::size_t nk = static_cast<std::size_t>(ny) * m.width() + static_cast<std::size_t>(nx);
      if (m.bits()[nk] && !seen[nk]) {
        seen[nk] = true;
        q.push(nk);
      }
    }
  }
  return reached == m.masked_count();
}

}  // namespace

TEST_SUITE("occlusion_pipeline") {
  TEST_CASE("raster validation") {
    CHECK_THROWS_AS(Raster(2, 2, 1, {0.f, 0.5f, 1.f}), InvalidInput);
    CHECK_THROWS_AS(Raster(1, 1, 1, {1.5f}), InvalidInput);
    Raster r(2, 2);
    CHECK_THROWS_AS(r.set(0, 0, 0, -0.1f), InvalidInput);
    CHECK_THROWS_AS(BinaryMask(2, 2, {0, 1}), InvalidInput);
  }

  TEST_CASE("coverage 0.2 on 16x16 gives 51 +- 13 masked pixels for every category") {
    Rng rng(1);
    for (MaskCategory cat : {MaskCategory::kSimple, MaskCategory::kComplex, MaskCategory::kBody, MaskCategory::kHybrid}) {
      for (std::uint64_t seed = 0; seed < 50; ++seed) {
        MaskSpec spec{cat, 0.2, seed % 2 == 0, 2, seed};
        const MaskedSample s = synthesize_mask(spec, random_raster(rng, 16));
        const long count = static_cast<long>(s.mask.masked_count());
        CHECK(std::abs(count - 51) <= 13);
        CHECK(connected(s.mask));
      }
    }
  }

  TEST_CASE("mean coverage over seeded draws stays near the target") {
    Rng rng(2);
    double total = 0.0;
    const int draws = 400;
    for (int k = 0; k < draws; ++k) {
      MaskSpec spec{static_cast<MaskCategory>(k % 4), 0.2, false, 1, static_cast<std::uint64_t>(k)};
      total += synthesize_mask(spec, random_raster(rng, 8)).mask.coverage();
    }
    const double mean = total / draws;
    CHECK(mean >= 0.15);
    CHECK(mean <= 0.25);
  }

  TEST_CASE("masked sample keeps observed pixels and is a pure function of its inputs") {
    Rng rng(3);
    const Raster base = random_raster(rng, 12);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      MaskSpec spec{static_cast<MaskCategory>(seed % 4), 0.25, seed % 3 == 0, 1, seed};
      const MaskedSample a = synthesize_mask(spec, base);
      const MaskedSample b = synthesize_mask(spec, base);
      CHECK(a.mask == b.mask);
      CHECK(a.masked == b.masked);
      CHECK(a.original == base);
      for (std::size_t y = 0; y < 12; ++y) {
        for (std::size_t x = 0; x < 12; ++x) {
          if (!a.mask.masked(y, x)) CHECK(a.masked.at(y, x) == base.at(y, x));
        }
      }
    }
  }

  TEST_CASE("flip is an involution and flips the synthesized geometry") {
    Rng rng(4);
    const Raster base = random_raster(rng, 16);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      MaskSpec spec{static_cast<MaskCategory>(seed % 4), 0.2, false, 0, seed};
      const MaskedSample plain = synthesize_mask(spec, base);
      CHECK(flip_horizontal(flip_horizontal(plain.mask)) == plain.mask);
      CHECK(flip_horizontal(flip_horizontal(plain.masked)) == plain.masked);
      spec.flip = true;
      const MaskedSample flipped = synthesize_mask(spec, base);
      CHECK(flipped.mask == flip_horizontal(plain.mask));
    }
  }

  TEST_CASE("infeasible specs are rejected") {
    Rng rng(5);
    const Raster r8 = random_raster(rng, 8);
    CHECK_THROWS_AS(synthesize_mask(MaskSpec{MaskCategory::kSimple, 0.9, false, 0, 1}, r8), InvalidInput);
    CHECK_THROWS_AS(synthesize_mask(MaskSpec{MaskCategory::kSimple, 0.0, false, 0, 1}, r8), InvalidInput);
    CHECK_THROWS_AS(synthesize_mask(MaskSpec{MaskCategory::kSimple, 0.2, false, 0, 1}, random_raster(rng, 7)),
                    InvalidInput);
    CHECK_THROWS_AS(parse_mask_category("scarf"), InvalidInput);
    CHECK(parse_mask_category("hybrid") == MaskCategory::kHybrid);
  }

  TEST_CASE("attention with an empty mask is the identity") {
    Rng rng(6);
    const Raster r = random_raster(rng, 10);
    const BinaryMask empty(10, 10);
    const AttentionResult a = contextual_attention(r, empty, 3, 10.0);
    CHECK(a.completed == r);
    CHECK(a.attention.rows() == 0);
    CHECK(baseline_inpaint(r, empty) == r);
  }

  TEST_CASE("equal similarity candidates split attention evenly") {
    // Constant observed content: every candidate patch has the same cosine to the query.
    Raster r(3, 7);
    BinaryMask m(3, 7);
    for (std::size_t y = 0; y < 3; ++y) {
      for (std::size_t x = 0; x < 7; ++x) r.set(y, x, 0, x == 3 ? 0.0f : 0.5f);
      m.set(y, 3, true);
    }
    const AttentionResult a = contextual_attention(r, m, 3, 10.0);
    REQUIRE(a.candidates.size() == 2);
    for (std::size_t q = 0; q < a.attention.rows(); ++q) {
      CHECK(a.attention(q, 0) == doctest::Approx(0.5));
      CHECK(a.attention(q, 1) == doctest::Approx(0.5));
    }
  }

  TEST_CASE("attention rows sum to one and observed pixels are copied exactly") {
    Rng rng(7);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Raster base = random_raster(rng, 12);
      const MaskedSample s = synthesize_mask(MaskSpec{static_cast<MaskCategory>(seed % 4), 0.2, false, 1, seed}, base);
      const AttentionResult a = contextual_attention(s.masked, s.mask, 3, 10.0);
      for (std::size_t q = 0; q < a.attention.rows(); ++q) {
        double sum = 0.0;
        for (double v : a.attention.row(q)) sum += v;
        CHECK(std::abs(sum - 1.0) < 1e-6);
      }
      for (std::size_t y = 0; y < 12; ++y) {
        for (std::size_t x = 0; x < 12; ++x) {
          if (!s.mask.masked(y, x)) CHECK(a.completed.at(y, x) == s.masked.at(y, x));
        }
      }
    }
  }

  TEST_CASE("constant image is completed to the constant") {
    Raster r(9, 9);
    for (std::size_t y = 0; y < 9; ++y) {
      for (std::size_t x = 0; x < 9; ++x) r.set(y, x, 0, 0.3f);
    }
    BinaryMask m(9, 9);
    m.set(4, 4, true);
    m.set(4, 5, true);
    r.set(4, 4, 0, 1.0f);
    const Raster out = baseline_inpaint(r, m);
    CHECK(out.at(4, 4) == doctest::Approx(0.3f));
    CHECK(out.at(4, 5) == doctest::Approx(0.3f));
  }

  TEST_CASE("a fully masked raster has no candidates") {
    Raster r(4, 4);
    BinaryMask m(4, 4);
    m.set(1, 1, true);
    CHECK_THROWS_AS(contextual_attention(r, m, 5, 10.0), DegenerateInput);
    CHECK_THROWS_AS(contextual_attention(r, m, 2, 10.0), InvalidInput);
  }

  TEST_CASE("reconstruction loss") {
    Rng rng(8);
    const Raster a = random_raster(rng, 6), b = random_raster(rng, 6);
    CHECK(reconstruction_loss(a, a) == 0.0);
    Raster zeros(3, 3), ones(3, 3);
    for (std::size_t y = 0; y < 3; ++y) {
      for (std::size_t x = 0; x < 3; ++x) ones.set(y, x, 0, 1.0f);
    }
    CHECK(reconstruction_loss(zeros, ones) == 1.0);
    double ref = 0.0;
    for (std::size_t k = 0; k < 36; ++k) ref += std::abs(static_cast<double>(a.pixels()[k]) - b.pixels()[k]);
    CHECK(reconstruction_loss(a, b) == doctest::Approx(ref / 36.0).epsilon(1e-12));
    CHECK_THROWS_AS(reconstruction_loss(zeros, a), InvalidInput);
  }

  TEST_CASE("adversarial value") {
    CHECK(adversarial_value(Vector{0.5}, Vector{0.5}) == doctest::Approx(2.0 * std::log(0.5)));
    CHECK(adversarial_value(Vector{1 - 1e-12}, Vector{1e-12}) > -1e-10);
    const Vector real{0.9, 0.7, 0.6}, fake{0.2, 0.4, 0.1};
    double ref = 0.0;
    for (std::size_t k = 0; k < 3; ++k) ref += std::log(real[k]) + std::log(1.0 - fake[k]);
    CHECK(adversarial_value(real, fake) == doctest::Approx(ref / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(adversarial_value(Vector{1.0}, Vector{0.5}), InvalidInput);
    CHECK_THROWS_AS(adversarial_value(Vector{0.5}, Vector{0.0}), InvalidInput);
    CHECK_THROWS_AS(adversarial_value(Vector{0.5, 0.5}, Vector{0.5}), InvalidInput);
  }
}
