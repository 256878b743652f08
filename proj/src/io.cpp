#include "lesionmetrics/io.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "io_detail.hpp"

namespace lesionmetrics {

namespace detail {

FileFormat detect_format(const std::filesystem::path& path) {
  const auto name = path.filename().string();
  auto ends_with = [&](std::string_view suffix) {
    return name.size() >= suffix.size() &&
           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".nii.gz")) return FileFormat::NiftiGz;
  if (ends_with(".nii")) return FileFormat::Nifti;
  return FileFormat::Raw;
}

std::size_t bytes_per_voxel(VoxelType t) {
  switch (t) {
    case VoxelType::UInt8: return 1;
    case VoxelType::Int16: return 2;
    case VoxelType::Int32: return 4;
    case VoxelType::Float32: return 4;
    case VoxelType::Float64: return 8;
  }
  return 0;
}

}  // namespace detail

bool is_floating(VoxelType t) { return t == VoxelType::Float32 || t == VoxelType::Float64; }

std::string to_string(VoxelType t) {
  switch (t) {
    case VoxelType::UInt8: return "u8";
    case VoxelType::Int16: return "i16";
    case VoxelType::Int32: return "i32";
    case VoxelType::Float32: return "f32";
    case VoxelType::Float64: return "f64";
  }
  return "?";
}

VoxelType parse_voxel_type(const std::string& s) {
  if (s == "u8") return VoxelType::UInt8;
  if (s == "i16") return VoxelType::Int16;
  if (s == "i32") return VoxelType::Int32;
  if (s == "f32") return VoxelType::Float32;
  if (s == "f64") return VoxelType::Float64;
  throw FormatError("unsupported dtype '" + s + "'");
}

namespace {

detail::RawVoxels read_any(const std::filesystem::path& path) {
  switch (detail::detect_format(path)) {
    case detail::FileFormat::Nifti: return detail::read_nifti(path, false);
    case detail::FileFormat::NiftiGz: return detail::read_nifti(path, true);
    case detail::FileFormat::Raw: return detail::read_raw(path);
  }
  throw FormatError("unreachable");
}

LabelVolume to_labels(detail::RawVoxels&& vox, const LoadOptions& opts) {
  std::vector<std::int32_t> data(vox.values.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = vox.values[i];
    if (v != std::floor(v) || v < std::numeric_limits<std::int32_t>::min() ||
        v > std::numeric_limits<std::int32_t>::max()) {
      throw FormatError("non-integral label value " + std::to_string(v));
    }
    data[i] = static_cast<std::int32_t>(v);
  }
  if (opts.any_positive_label) {
    std::set<std::int32_t> found;
    for (auto v : data) {
      if (v > 0) found.insert(v);
    }
    return {vox.dims, vox.spacing, std::move(data), {found.begin(), found.end()}};
  }
  return {vox.dims, vox.spacing, std::move(data), opts.labels};
}

}  // namespace

Volume load_volume(const std::filesystem::path& path, const LoadOptions& opts) {
  auto vox = read_any(path);
  if (is_floating(vox.type)) {
    return ProbVolume(vox.dims, vox.spacing, std::move(vox.values));
  }
  return to_labels(std::move(vox), opts);
}

LabelVolume load_label_volume(const std::filesystem::path& path, const LoadOptions& opts) {
  auto vox = read_any(path);
  if (is_floating(vox.type)) {
    throw FormatError(path.string() + ": expected an integer label volume, found " +
                      to_string(vox.type));
  }
  return to_labels(std::move(vox), opts);
}

ProbVolume load_prob_volume(const std::filesystem::path& path) {
  auto vox = read_any(path);
  return {vox.dims, vox.spacing, std::move(vox.values)};
}

void write_voxels(const std::filesystem::path& path, const Dims& dims, const Spacing& spacing,
                  VoxelType type, std::span<const double> values) {
  if (values.size() != dims.size()) {
    throw DimensionMismatch("payload size does not match dims " + to_string(dims));
  }
  detail::RawVoxels vox{dims, spacing, type, {values.begin(), values.end()}};
  switch (detail::detect_format(path)) {
    case detail::FileFormat::Nifti: detail::write_nifti(path, vox, false); break;
    case detail::FileFormat::NiftiGz: detail::write_nifti(path, vox, true); break;
    case detail::FileFormat::Raw: detail::write_raw(path, vox); break;
  }
}

void save_volume(const std::filesystem::path& path, const LabelVolume& vol) {
  std::int32_t lo = 0;
  std::int32_t hi = 0;
  for (auto v : vol.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  save_volume(path, vol, lo >= 0 && hi <= 255 ? VoxelType::UInt8 : VoxelType::Int32);
}

void save_volume(const std::filesystem::path& path, const LabelVolume& vol, VoxelType type) {
  if (is_floating(type)) throw FormatError("label volumes must be written with an integer dtype");
  std::vector<double> values(vol.data().begin(), vol.data().end());
  write_voxels(path, vol.dims(), vol.spacing(), type, values);
}

void save_volume(const std::filesystem::path& path, const ProbVolume& vol, VoxelType type) {
  if (!is_floating(type)) throw FormatError("probability volumes need a floating-point dtype");
  write_voxels(path, vol.dims(), vol.spacing(), type, vol.data());
}

void save_volume(const std::filesystem::path& path, const Volume& vol) {
  std::visit([&](const auto& v) { save_volume(path, v); }, vol);
}

}  // namespace lesionmetrics
