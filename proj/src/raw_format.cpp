#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include <json.hpp>

#include "bytes.hpp"
#include "io_detail.hpp"

namespace lesionmetrics::detail {

namespace {

std::filesystem::path stem_of(const std::filesystem::path& path) {
  const auto ext = path.extension();
  if (ext == ".json" || ext == ".bin") {
    auto p = path;
    return p.replace_extension();
  }
  return path;
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return stem.parent_path() / (stem.filename().string() + suffix);
}

template <typename T>
void encode_integer(std::uint8_t* p, double v) {
  if (v != std::floor(v) || v < static_cast<double>(std::numeric_limits<T>::min()) ||
      v > static_cast<double>(std::numeric_limits<T>::max())) {
    throw RangeError("value " + std::to_string(v) + " does not fit the integer dtype");
  }
  store_scalar<T>(p, static_cast<T>(v));
}

}  // namespace

std::vector<std::uint8_t> encode_voxels(std::span<const double> values, VoxelType type) {
  const std::size_t bpv = bytes_per_voxel(type);
  std::vector<std::uint8_t> out(values.size() * bpv);
  std::uint8_t* p = out.data();
  for (double v : values) {
    switch (type) {
      case VoxelType::UInt8: encode_integer<std::uint8_t>(p, v); break;
      case VoxelType::Int16: encode_integer<std::int16_t>(p, v); break;
      case VoxelType::Int32: encode_integer<std::int32_t>(p, v); break;
      case VoxelType::Float32: store_scalar<float>(p, static_cast<float>(v)); break;
      case VoxelType::Float64: store_scalar<double>(p, v); break;
    }
    p += bpv;
  }
  return out;
}

RawVoxels read_raw(const std::filesystem::path& path) {
  const auto stem = stem_of(path);
  const auto header_path = with_suffix(stem, ".json");
  const auto payload_path = with_suffix(stem, ".bin");

  std::ifstream hin(header_path);
  if (!hin) throw FormatError("cannot open raw header " + header_path.string());
  nlohmann::json header;
  try {
    hin >> header;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed raw header " + header_path.string() + ": " + e.what());
  }

  RawVoxels vox;
  try {
    const auto dims = header.at("dims").get<std::vector<long long>>();
    const auto spacing = header.at("spacing").get<std::vector<double>>();
    if (dims.size() != 3 || spacing.size() != 3) {
      throw FormatError("raw header needs three dims and three spacing values");
    }
    for (auto d : dims) {
      if (d <= 0) throw FormatError("raw header has non-positive dimension");
    }
    vox.dims = {static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]),
                static_cast<std::size_t>(dims[2])};
    vox.spacing = {spacing[0], spacing[1], spacing[2]};
    vox.type = parse_voxel_type(header.at("dtype").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed raw header " + header_path.string() + ": " + e.what());
  }
  vox.spacing.validate();

  std::ifstream bin(payload_path, std::ios::binary);
  if (!bin) throw FormatError("cannot open raw payload " + payload_path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(bin)),
                                  std::istreambuf_iterator<char>());
  const std::size_t expected = vox.dims.size() * bytes_per_voxel(vox.type);
  if (bytes.size() != expected) {
    throw FormatError("dimension mismatch between header and payload: expected " +
                      std::to_string(expected) + " bytes, found " + std::to_string(bytes.size()));
  }
  vox.values = decode_voxels(bytes.data(), vox.dims.size(), vox.type, true);
  return vox;
}

void write_raw(const std::filesystem::path& path, const RawVoxels& vox) {
  const auto stem = stem_of(path);
  if (!stem.parent_path().empty()) std::filesystem::create_directories(stem.parent_path());
  const auto bytes = encode_voxels(vox.values, vox.type);

  nlohmann::json header = {
      {"dims", {vox.dims.nx, vox.dims.ny, vox.dims.nz}},
      {"spacing", {vox.spacing.dx, vox.spacing.dy, vox.spacing.dz}},
      {"dtype", to_string(vox.type)},
  };
  std::ofstream hout(with_suffix(stem, ".json"));
  hout << header.dump() << '\n';
  std::ofstream bout(with_suffix(stem, ".bin"), std::ios::binary);
  bout.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!hout || !bout) throw Error("failed writing raw volume " + stem.string());
}

}  // namespace lesionmetrics::detail
