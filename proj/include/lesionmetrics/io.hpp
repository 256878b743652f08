#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lesionmetrics/volume.hpp"

namespace lesionmetrics {

enum class VoxelType { UInt8, Int16, Int32, Float32, Float64 };

[[nodiscard]] bool is_floating(VoxelType t);
/// "u8", "i16", "i32", "f32", "f64".
std::string to_string(VoxelType t);
VoxelType parse_voxel_type(const std::string& s);

/// Integer-typed files load as LabelVolume, floating-point files as ProbVolume.
using Volume = std::variant<LabelVolume, ProbVolume>;

struct LoadOptions {
  /// Foreground labels an integer volume may contain.
  std::vector<std::int32_t> labels = LabelVolume::default_labels();
  /// Declare every positive value present instead of checking against `labels`.
  bool any_positive_label = false;
};

/// Reads a NIfTI-1 file (.nii / .nii.gz) or the raw format (<stem>.json + <stem>.bin;
/// either file or the bare stem may be named).
Volume load_volume(const std::filesystem::path& path, const LoadOptions& opts = {});
LabelVolume load_label_volume(const std::filesystem::path& path, const LoadOptions& opts = {});
/// Integer files holding only 0/1 are accepted and converted.
ProbVolume load_prob_volume(const std::filesystem::path& path);

/// Writes in the format implied by the extension. Labels default to u8 when they fit,
/// i32 otherwise; probabilities default to f32.
void save_volume(const std::filesystem::path& path, const LabelVolume& vol);
void save_volume(const std::filesystem::path& path, const LabelVolume& vol, VoxelType type);
void save_volume(const std::filesystem::path& path, const ProbVolume& vol,
                 VoxelType type = VoxelType::Float32);
void save_volume(const std::filesystem::path& path, const Volume& vol);

/// Lowest-level writer shared by the typed overloads.
void write_voxels(const std::filesystem::path& path, const Dims& dims, const Spacing& spacing,
                  VoxelType type, std::span<const double> values);

}  // namespace lesionmetrics
