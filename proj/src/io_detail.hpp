#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "lesionmetrics/io.hpp"

namespace lesionmetrics::detail {

/// Voxel payload decoded to doubles in C order over (x, y, z).
struct RawVoxels {
  Dims dims;
  Spacing spacing;
  VoxelType type = VoxelType::UInt8;
  std::vector<double> values;
};

enum class FileFormat { Nifti, NiftiGz, Raw };

FileFormat detect_format(const std::filesystem::path& path);

RawVoxels read_nifti(const std::filesystem::path& path, bool gzipped);
void write_nifti(const std::filesystem::path& path, const RawVoxels& vox, bool gzipped);

RawVoxels read_raw(const std::filesystem::path& path);
void write_raw(const std::filesystem::path& path, const RawVoxels& vox);

std::size_t bytes_per_voxel(VoxelType t);

}  // namespace lesionmetrics::detail
