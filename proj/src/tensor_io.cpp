#include "deocc/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "deocc/errors.hpp"

namespace deocc {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& in, std::size_t offset, int width) {
  if (offset + static_cast<std::size_t>(width) > in.size()) throw InvalidInput("tensor: truncated file");
  std::uint64_t v = 0;
  for (int k = 0; k < width; ++k) v |= static_cast<std::uint64_t>(in[offset + static_cast<std::size_t>(k)]) << (8 * k);
  return v;
}

}  // namespace

std::uint64_t Tensor::element_count() const {
  std::uint64_t total = 1;
  for (auto d : dims) total *= d;
  return total;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
  if (tensor.element_count() != tensor.values.size()) throw InvalidInput("tensor: dims do not match value count");
  std::vector<std::uint8_t> out(kTensorMagic, kTensorMagic + 4);
  put_u32(out, kTensorVersion);
  put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
  if (tensor.dtype != kDtypeFloat32 && tensor.dtype != kDtypeFloat64) throw InvalidInput("tensor: unsupported dtype");
  put_u32(out, tensor.dtype);
  for (auto d : tensor.dims) put_u64(out, d);
  const bool wide = tensor.dtype == kDtypeFloat64;
  out.reserve(out.size() + (wide ? 8 : 4) * tensor.values.size());
  for (double v : tensor.values) {
    if (wide) {
      put_u64(out, std::bit_cast<std::uint64_t>(v));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0) throw InvalidInput("tensor: bad magic");
  if (get_le(bytes, 4, 4) != kTensorVersion) throw InvalidInput("tensor: unsupported version");
  const auto rank = get_le(bytes, 8, 4);
  Tensor t;
  t.dtype = static_cast<std::uint32_t>(get_le(bytes, 12, 4));
  if (t.dtype != kDtypeFloat32 && t.dtype != kDtypeFloat64) throw InvalidInput("tensor: unsupported dtype");
  const std::size_t width = t.dtype == kDtypeFloat64 ? 8 : 4;
  std::size_t offset = 16;
  for (std::uint64_t r = 0; r < rank; ++r, offset += 8) t.dims.push_back(get_le(bytes, offset, 8));
  std::uint64_t count = 1;
  for (auto d : t.dims) {
    if (d != 0 && count > bytes.size() / d) throw InvalidInput("tensor: dims exceed payload");
    count *= d;
  }
  if (bytes.size() != offset + width * count) throw InvalidInput("tensor: payload size does not match dims");
  t.values.resize(count);
  for (std::uint64_t k = 0; k < count; ++k, offset += width) {
    if (width == 8) {
      t.values[k] = std::bit_cast<double>(get_le(bytes, offset, 8));
    } else {
      t.values[k] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, offset, 4)));
    }
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  const auto bytes = encode_tensor(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open tensor file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

Tensor to_tensor(const Matrix& m) {
  return Tensor{{m.rows(), m.cols()}, std::vector<double>(m.values().begin(), m.values().end()), kDtypeFloat64};
}

Matrix to_matrix(const Tensor& t) {
  if (t.dims.size() != 2) throw InvalidInput("tensor: expected rank 2");
  return Matrix(t.dims[0], t.dims[1], std::vector<double>(t.values.begin(), t.values.end()));
}

Tensor stack_rasters(const std::vector<const Raster*>& rasters) {
  if (rasters.empty()) throw InvalidInput("tensor: no rasters to stack");
  const auto& first = *rasters.front();
  if (first.channels() != 1) throw InvalidInput("tensor: only single-channel rasters are stacked");
  Tensor t{{rasters.size(), first.height(), first.width()}, {}, kDtypeFloat32};
  t.values.reserve(rasters.size() * first.pixel_count());
  for (const Raster* r : rasters) {
    if (!r->same_shape(first)) throw InvalidInput("tensor: rasters differ in shape");
    t.values.insert(t.values.end(), r->pixels().begin(), r->pixels().end());
  }
  return t;
}

std::vector<Raster> unstack_rasters(const Tensor& t) {
  if (t.dims.size() != 3) throw InvalidInput("tensor: expected rank 3 raster stack");
  const std::size_t h = t.dims[1], w = t.dims[2];
  std::vector<Raster> out;
  out.reserve(t.dims[0]);
  for (std::size_t n = 0; n < t.dims[0]; ++n) {
    auto begin = t.values.begin() + static_cast<long>(n * h * w);
    std::vector<float> pixels(h * w);
    std::transform(begin, begin + static_cast<long>(h * w), pixels.begin(), [](double v) { return static_cast<float>(v); });
    out.emplace_back(h, w, 1, std::move(pixels));
  }
  return out;
}

}  // namespace deocc
