#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deocc/core_math.hpp"
#include "deocc/occlusion.hpp"

namespace deocc {

// Binary tensor file:
//   bytes 0..3   magic "DOCT"
//   bytes 4..7   uint32 version (1)
//   bytes 8..11  uint32 rank
//   bytes 12..15 uint32 dtype code (1 = float32, 2 = float64)
//   rank x uint64 dims, then prod(dims) values, row-major.
// All integers and floats little-endian.
inline constexpr char kTensorMagic[4] = {'D', 'O', 'C', 'T'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 1;
inline constexpr std::uint32_t kDtypeFloat64 = 2;

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> values;  // rounded to float32 on encode when dtype is float32
  std::uint32_t dtype = kDtypeFloat32;

  std::uint64_t element_count() const;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

Tensor to_tensor(const Matrix& m);  // float64
Matrix to_matrix(const Tensor& t);  // rank-2 only

/// Stacks equally sized single-channel rasters into [N, H, W].
Tensor stack_rasters(const std::vector<const Raster*>& rasters);
std::vector<Raster> unstack_rasters(const Tensor& t);

}  // namespace deocc
