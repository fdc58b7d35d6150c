#include "deocc/occlusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "deocc/errors.hpp"
#include "deocc/random.hpp"

namespace deocc {

Raster::Raster(std::size_t height, std::size_t width, std::size_t channels)
    : height_(height), width_(width), channels_(channels), pixels_(height * width * channels, 0.0f) {
  if (height == 0 || width == 0 || channels == 0) throw InvalidInput("Raster: dimensions must be positive");
}

Raster::Raster(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> pixels)
    : Raster(height, width, channels) {
  if (pixels.size() != pixels_.size()) throw InvalidInput("Raster: pixel count does not match dimensions");
  for (float v : pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) throw InvalidInput("Raster: pixels must lie in [0, 1]");
  }
  pixels_ = std::move(pixels);
}

void Raster::set(std::size_t y, std::size_t x, std::size_t c, float value) {
  if (!(value >= 0.0f && value <= 1.0f)) throw InvalidInput("Raster: pixels must lie in [0, 1]");
  pixels_[index(y, x, c)] = value;
}

BinaryMask::BinaryMask(std::size_t height, std::size_t width)
    : height_(height), width_(width), bits_(height * width, 0) {
  if (height == 0 || width == 0) throw InvalidInput("BinaryMask: dimensions must be positive");
}

BinaryMask::BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
    : BinaryMask(height, width) {
  if (bits.size() != bits_.size()) throw InvalidInput("BinaryMask: bit count does not match dimensions");
  for (auto b : bits) {
    if (b > 1) throw InvalidInput("BinaryMask: bits must be 0 or 1");
  }
  bits_ = std::move(bits);
}

std::size_t BinaryMask::masked_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BinaryMask flip_horizontal(const BinaryMask& mask) {
  BinaryMask out(mask.height(), mask.width());
  for (std::size_t y = 0; y < mask.height(); ++y)
    for (std::size_t x = 0; x < mask.width(); ++x) out.set(y, mask.width() - 1 - x, mask.masked(y, x));
  return out;
}

Raster flip_horizontal(const Raster& raster) {
  Raster out(raster.height(), raster.width(), raster.channels());
  for (std::size_t y = 0; y < raster.height(); ++y)
    for (std::size_t x = 0; x < raster.width(); ++x)
      for (std::size_t c = 0; c < raster.channels(); ++c) out.set(y, raster.width() - 1 - x, c, raster.at(y, x, c));
  return out;
}

MaskCategory parse_mask_category(const std::string& text) {
  if (text == "simple") return MaskCategory::kSimple;
  if (text == "complex") return MaskCategory::kComplex;
  if (text == "body") return MaskCategory::kBody;
  if (text == "hybrid") return MaskCategory::kHybrid;
  throw InvalidInput("unknown mask category '" + text + "'");
}

std::string to_string(MaskCategory category) {
  switch (category) {
    case MaskCategory::kSimple: return "simple";
    case MaskCategory::kComplex: return "complex";
    case MaskCategory::kBody: return "body";
    case MaskCategory::kHybrid: return "hybrid";
  }
  return "simple";
}

namespace {

// Occluder under construction: which pixels it covers and what it paints there.
struct Occluder {
  BinaryMask mask;
  Raster pattern;

  Occluder(std::size_t h, std::size_t w, std::size_t channels) : mask(h, w), pattern(h, w, channels) {}
};

enum class Fill { kSolid, kTextured, kSkin };

struct Painter {
  Fill fill;
  std::vector<float> primary;
  std::vector<float> secondary;
  int period;

  static Painter draw(Fill fill, std::size_t channels, Rng& rng) {
    Painter p{fill, {}, {}, 1 + static_cast<int>(rng.below(2))};
    for (std::size_t c = 0; c < channels; ++c) {
      if (fill == Fill::kSkin) {
        p.primary.push_back(static_cast<float>(rng.uniform(0.55, 0.85)));
      } else {
        p.primary.push_back(static_cast<float>(rng.uniform()));
      }
      p.secondary.push_back(static_cast<float>(rng.uniform()));
    }
    return p;
  }

  void paint(Occluder& occ, std::size_t y, std::size_t x, Rng& rng) const {
    occ.mask.set(y, x, true);
    for (std::size_t c = 0; c < primary.size(); ++c) {
      float v = primary[c];
      if (fill == Fill::kTextured && ((y / period + x / period) % 2 == 1)) v = secondary[c];
      if (fill == Fill::kSkin) v = std::clamp(v + static_cast<float>(rng.uniform(-0.05, 0.05)), 0.0f, 1.0f);
      occ.pattern.set(y, x, c, v);
    }
  }
};

struct Box {
  std::size_t y0, x0, h, w;
};

// Bounding box of roughly `area` pixels, placed uniformly, then offset by up
// to `shift` pixels per axis and clamped inside the frame.
Box place_box(std::size_t area, bool ellipse, int shift, std::size_t height, std::size_t width, Rng& rng) {
  const double aspect = rng.uniform(0.5, 2.0);
  const double box_area = ellipse ? 4.0 * static_cast<double>(area) / std::numbers::pi : static_cast<double>(area);
  std::size_t h = std::clamp<std::size_t>(static_cast<std::size_t>(std::sqrt(box_area / aspect)), 1, height);
  std::size_t w = std::clamp<std::size_t>(static_cast<std::size_t>(box_area / static_cast<double>(h)), 1, width);
  const auto y0 = static_cast<long>(rng.below(height - h + 1));
  const auto x0 = static_cast<long>(rng.below(width - w + 1));
  long dy = 0, dx = 0;
  if (shift > 0) {
    dy = static_cast<long>(rng.below(2 * static_cast<std::uint64_t>(shift) + 1)) - shift;
    dx = static_cast<long>(rng.below(2 * static_cast<std::uint64_t>(shift) + 1)) - shift;
  }
  const long y = std::clamp<long>(y0 + dy, 0, static_cast<long>(height - h));
  const long x = std::clamp<long>(x0 + dx, 0, static_cast<long>(width - w));
  return {static_cast<std::size_t>(y), static_cast<std::size_t>(x), h, w};
}

void paint_shape(Occluder& occ, const Box& box, bool ellipse, const Painter& painter, Rng& rng) {
  const double cy = (static_cast<double>(box.h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(box.w) - 1.0) / 2.0;
  const double ry = static_cast<double>(box.h) / 2.0;
  const double rx = static_cast<double>(box.w) / 2.0;
  for (std::size_t y = 0; y < box.h; ++y) {
    for (std::size_t x = 0; x < box.w; ++x) {
      if (ellipse) {
        const double ny = (static_cast<double>(y) - cy) / ry;
        const double nx = (static_cast<double>(x) - cx) / rx;
        if (ny * ny + nx * nx > 1.0) continue;
      }
      painter.paint(occ, box.y0 + y, box.x0 + x, rng);
    }
  }
}

// Adds random 4-neighbours of the covered region until `target` pixels are covered.
void grow_to(Occluder& occ, std::size_t target, const Painter& painter, Rng& rng) {
  const std::size_t h = occ.mask.height();
  const std::size_t w = occ.mask.width();
  if (occ.mask.masked_count() == 0) painter.paint(occ, rng.below(h), rng.below(w), rng);
  std::vector<std::pair<std::size_t, std::size_t>> frontier;
  while (occ.mask.masked_count() < target) {
    frontier.clear();
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if (occ.mask.masked(y, x)) continue;
        const bool touches = (y > 0 && occ.mask.masked(y - 1, x)) || (y + 1 < h && occ.mask.masked(y + 1, x)) ||
                             (x > 0 && occ.mask.masked(y, x - 1)) || (x + 1 < w && occ.mask.masked(y, x + 1));
        if (touches) frontier.emplace_back(y, x);
      }
    }
    if (frontier.empty()) break;
    const auto [y, x] = frontier[rng.below(frontier.size())];
    painter.paint(occ, y, x, rng);
  }
}

bool has_observed_patch(const BinaryMask& mask, std::size_t radius) {
  for (std::size_t y = radius; y + radius < mask.height(); ++y) {
    for (std::size_t x = radius; x + radius < mask.width(); ++x) {
      bool clear = true;
      for (std::size_t py = y - radius; py <= y + radius && clear; ++py)
        for (std::size_t px = x - radius; px <= x + radius && clear; ++px) clear = !mask.masked(py, px);
      if (clear) return true;
    }
  }
  return false;
}

Occluder draw_occluder(const MaskSpec& spec, std::size_t h, std::size_t w, std::size_t channels, Rng& rng) {
  const double jitter = rng.uniform(0.9, 1.1);
  const auto target = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(spec.target_coverage * jitter * static_cast<double>(h * w))));
  Occluder occ(h, w, channels);
  switch (spec.category) {
    case MaskCategory::kSimple:
    case MaskCategory::kComplex: {
      const bool ellipse = rng.bernoulli(0.5);
      const Painter painter =
          Painter::draw(spec.category == MaskCategory::kSimple ? Fill::kSolid : Fill::kTextured, channels, rng);
      paint_shape(occ, place_box(target, ellipse, spec.shift, h, w, rng), ellipse, painter, rng);
      grow_to(occ, target, painter, rng);
      break;
    }
    case MaskCategory::kBody: {
      const Painter painter = Painter::draw(Fill::kSkin, channels, rng);
      const Box seed = place_box(1, false, spec.shift, h, w, rng);
      painter.paint(occ, seed.y0, seed.x0, rng);
      grow_to(occ, target, painter, rng);
      break;
    }
    case MaskCategory::kHybrid: {
      // Man-made occluder joined by a body-part blob growing out of it.
      const bool ellipse = rng.bernoulli(0.5);
      const Painter object = Painter::draw(rng.bernoulli(0.5) ? Fill::kSolid : Fill::kTextured, channels, rng);
      const Painter body = Painter::draw(Fill::kSkin, channels, rng);
      const auto primary_area = std::max<std::size_t>(1, target * 3 / 5);
      paint_shape(occ, place_box(primary_area, ellipse, spec.shift, h, w, rng), ellipse, object, rng);
      grow_to(occ, target, body, rng);
      break;
    }
  }
  return occ;
}

}  // namespace

MaskedSample synthesize_mask(const MaskSpec& spec, const Raster& sample) {
  if (sample.height() < 8 || sample.width() < 8) throw InvalidInput("synthesize_mask: sample must be at least 8x8");
  if (!(spec.target_coverage > 0.0 && spec.target_coverage < 1.0)) {
    throw InvalidInput("synthesize_mask: target_coverage must lie in (0, 1)");
  }
  if (spec.target_coverage > kMaxMaskCoverage) {
    throw InvalidInput("synthesize_mask: coverage " + std::to_string(spec.target_coverage) +
                       " leaves too little observed context (max " + std::to_string(kMaxMaskCoverage) + ")");
  }
  if (spec.shift < 0) throw InvalidInput("synthesize_mask: shift must be >= 0");

  const std::size_t h = sample.height();
  const std::size_t w = sample.width();
  Rng rng(spec.seed);
  constexpr int kAttempts = 64;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Occluder occ = draw_occluder(spec, h, w, sample.channels(), rng);
    if (!has_observed_patch(occ.mask, 1)) continue;
    if (spec.flip) {
      occ.mask = flip_horizontal(occ.mask);
      occ.pattern = flip_horizontal(occ.pattern);
    }
    Raster masked = sample;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        if (occ.mask.masked(y, x))
          for (std::size_t c = 0; c < sample.channels(); ++c) masked.set(y, x, c, occ.pattern.at(y, x, c));
    return MaskedSample{sample, std::move(masked), std::move(occ.mask)};
  }
  throw InvalidInput("synthesize_mask: could not place an occluder that leaves an observed 3x3 patch");
}

AttentionResult contextual_attention(const Raster& masked, const BinaryMask& mask, int patch, double scale) {
  if (masked.height() != mask.height() || masked.width() != mask.width()) {
    throw InvalidInput("contextual_attention: mask and raster dimensions differ");
  }
  if (patch < 1 || patch % 2 == 0) throw InvalidInput("contextual_attention: patch must be odd and >= 1");
  if (!std::isfinite(scale)) throw InvalidInput("contextual_attention: scale must be finite");

  const std::size_t h = masked.height();
  const std::size_t w = masked.width();
  const std::size_t channels = masked.channels();
  const auto radius = static_cast<std::size_t>(patch / 2);
  const std::size_t patch_len = static_cast<std::size_t>(patch * patch) * channels;

  auto observed_value = [&](long y, long x, std::size_t c) -> double {
    if (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w)) return 0.0;
    const auto uy = static_cast<std::size_t>(y);
    const auto ux = static_cast<std::size_t>(x);
    return mask.masked(uy, ux) ? 0.0 : static_cast<double>(masked.at(uy, ux, c));
  };
  auto gather = [&](std::size_t cy, std::size_t cx, std::vector<double>& out) {
    out.clear();
    const long r = static_cast<long>(radius);
    for (long dy = -r; dy <= r; ++dy)
      for (long dx = -r; dx <= r; ++dx)
        for (std::size_t c = 0; c < channels; ++c)
          out.push_back(observed_value(static_cast<long>(cy) + dy, static_cast<long>(cx) + dx, c));
  };

  AttentionResult result{masked, Matrix(), {}, {}};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (mask.masked(y, x)) result.queries.emplace_back(y, x);

  std::vector<std::vector<double>> candidate_patches;
  std::vector<double> candidate_norms;
  for (std::size_t y = radius; y + radius < h; ++y) {
    for (std::size_t x = radius; x + radius < w; ++x) {
      bool clear = true;
      for (std::size_t py = y - radius; py <= y + radius && clear; ++py)
        for (std::size_t px = x - radius; px <= x + radius && clear; ++px) clear = !mask.masked(py, px);
      if (!clear) continue;
      result.candidates.emplace_back(y, x);
      candidate_patches.emplace_back();
      gather(y, x, candidate_patches.back());
      candidate_norms.push_back(l2_norm(candidate_patches.back()));
    }
  }
  result.attention = Matrix(result.queries.size(), result.candidates.size());
  if (result.queries.empty()) return result;
  if (result.candidates.empty()) throw DegenerateInput("contextual_attention: no fully observed patch");

  std::vector<double> query;
  query.reserve(patch_len);
  std::vector<double> scores(result.candidates.size());
  for (std::size_t q = 0; q < result.queries.size(); ++q) {
    const auto [qy, qx] = result.queries[q];
    gather(qy, qx, query);
    const double query_norm = l2_norm(query);
    for (std::size_t k = 0; k < scores.size(); ++k) {
      const double denom = query_norm * candidate_norms[k];
      scores[k] = denom > 0.0 ? dot(query, candidate_patches[k]) / denom : 0.0;
    }
    const std::vector<double> weights = softmax_scaled(scores, scale);
    auto row = result.attention.row(q);
    std::copy(weights.begin(), weights.end(), row.begin());
    for (std::size_t c = 0; c < channels; ++c) {
      double value = 0.0;
      for (std::size_t k = 0; k < weights.size(); ++k) {
        const auto [cy, cx] = result.candidates[k];
        value += weights[k] * static_cast<double>(masked.at(cy, cx, c));
      }
      result.completed.set(qy, qx, c, static_cast<float>(std::clamp(value, 0.0, 1.0)));
    }
  }
  return result;
}

Raster baseline_inpaint(const Raster& masked, const BinaryMask& mask) {
  return contextual_attention(masked, mask, 3, 10.0).completed;
}

double reconstruction_loss(const Raster& completed, const Raster& original) {
  if (!completed.same_shape(original)) throw InvalidInput("reconstruction_loss: raster dimensions differ");
  double total = 0.0;
  for (std::size_t k = 0; k < completed.pixels().size(); ++k) {
    total += std::abs(static_cast<double>(completed.pixels()[k]) - static_cast<double>(original.pixels()[k]));
  }
  return total / static_cast<double>(completed.pixels().size());
}

double adversarial_value(const Vector& disc_real, const Vector& disc_fake) {
  if (disc_real.dim() != disc_fake.dim()) throw InvalidInput("adversarial_value: score vectors differ in length");
  double total = 0.0;
  for (std::size_t k = 0; k < disc_real.dim(); ++k) {
    const double real = disc_real[k];
    const double fake = disc_fake[k];
    if (!(real > 0.0 && real < 1.0) || !(fake > 0.0 && fake < 1.0)) {
      throw InvalidInput("adversarial_value: discriminator scores must lie in (0, 1)");
    }
    total += std::log(real) + std::log1p(-fake);
  }
  return total / static_cast<double>(disc_real.dim());
}

}  // namespace deocc
