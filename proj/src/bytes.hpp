#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "io_detail.hpp"

namespace lesionmetrics::detail {

template <typename T>
T load_scalar(const std::uint8_t* p, bool little_endian) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  if (little_endian != (std::endian::native == std::endian::little)) {
    std::reverse(buf, buf + sizeof(T));
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

template <typename T>
void store_scalar(std::uint8_t* p, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native != std::endian::little) std::reverse(buf, buf + sizeof(T));
  std::memcpy(p, buf, sizeof(T));
}

/// Decodes `count` voxels of `type` starting at `p`.
inline std::vector<double> decode_voxels(const std::uint8_t* p, std::size_t count, VoxelType type,
                                         bool little_endian) {
  std::vector<double> out(count);
  const std::size_t bpv = bytes_per_voxel(type);
  for (std::size_t i = 0; i < count; ++i, p += bpv) {
    switch (type) {
      case VoxelType::UInt8: out[i] = *p; break;
      case VoxelType::Int16: out[i] = load_scalar<std::int16_t>(p, little_endian); break;
      case VoxelType::Int32: out[i] = load_scalar<std::int32_t>(p, little_endian); break;
      case VoxelType::Float32: out[i] = load_scalar<float>(p, little_endian); break;
      case VoxelType::Float64: out[i] = load_scalar<double>(p, little_endian); break;
    }
  }
  return out;
}

/// Little-endian encoding; integer types require integral in-range values.
std::vector<std::uint8_t> encode_voxels(std::span<const double> values, VoxelType type);

}  // namespace lesionmetrics::detail
