#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "deocc/core_math.hpp"

namespace deocc {

/// height x width x channels image, pixels in [0, 1], stored (y, x, c) row-major.
class Raster {
 public:
  Raster(std::size_t height, std::size_t width, std::size_t channels = 1);
  Raster(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> pixels);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t pixel_count() const { return height_ * width_; }

  float at(std::size_t y, std::size_t x, std::size_t c = 0) const { return pixels_[index(y, x, c)]; }
  // Throws InvalidInput if value is outside [0, 1].
  void set(std::size_t y, std::size_t x, std::size_t c, float value);

  const std::vector<float>& pixels() const { return pixels_; }
  bool same_shape(const Raster& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool operator==(const Raster& other) const = default;

 private:
  std::size_t index(std::size_t y, std::size_t x, std::size_t c) const { return (y * width_ + x) * channels_ + c; }

  std::size_t height_;
  std::size_t width_;
  std::size_t channels_;
  std::vector<float> pixels_;
};

/// 1 marks a missing (masked) pixel, 0 an observed one.
class BinaryMask {
 public:
  BinaryMask(std::size_t height, std::size_t width);
  BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  bool masked(std::size_t y, std::size_t x) const { return bits_[y * width_ + x] != 0; }
  void set(std::size_t y, std::size_t x, bool value) { bits_[y * width_ + x] = value ? 1 : 0; }

  std::size_t masked_count() const;
  double coverage() const { return static_cast<double>(masked_count()) / static_cast<double>(bits_.size()); }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  bool operator==(const BinaryMask& other) const = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint8_t> bits_;
};

BinaryMask flip_horizontal(const BinaryMask& mask);
Raster flip_horizontal(const Raster& raster);

enum class MaskCategory { kSimple, kComplex, kBody, kHybrid };

MaskCategory parse_mask_category(const std::string& text);
std::string to_string(MaskCategory category);

struct MaskSpec {
  MaskCategory category = MaskCategory::kSimple;
  double target_coverage = 0.2;
  bool flip = false;
  int shift = 0;  // maximum placement offset in pixels, per axis
  std::uint64_t seed = 0;
};

inline constexpr double kMaxMaskCoverage = 0.5;

struct MaskedSample {
  Raster original;
  Raster masked;
  BinaryMask mask;
};

/// Pastes a procedural occluder over `sample`. Pure function of (spec, sample).
MaskedSample synthesize_mask(const MaskSpec& spec, const Raster& sample);

struct AttentionResult {
  Raster completed;
  Matrix attention;  // one row per masked pixel (raster order), one column per candidate
  std::vector<std::pair<std::size_t, std::size_t>> queries;     // (y, x) of masked pixels
  std::vector<std::pair<std::size_t, std::size_t>> candidates;  // (y, x) of fully observed patch centres
};

/// Fills every masked pixel with the attention-weighted mean of observed patch
/// centres, attention = softmax(scale * cosine(query patch, candidate patch)).
/// Query patches read the masked input with missing pixels zero-filled.
AttentionResult contextual_attention(const Raster& masked, const BinaryMask& mask, int patch, double scale);

Raster baseline_inpaint(const Raster& masked, const BinaryMask& mask);

/// Mean absolute pixel difference.
double reconstruction_loss(const Raster& completed, const Raster& original);

/// mean(log D(real) + log(1 - D(fake))) over discriminator probabilities.
double adversarial_value(const Vector& disc_real, const Vector& disc_fake);

}  // namespace deocc
