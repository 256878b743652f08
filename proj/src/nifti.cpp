// Minimal single-file NIfTI-1 reader/writer. Only voxel spacing is taken from the
// geometry; orientation is ignored.

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "bytes.hpp"
#include "io_detail.hpp"

namespace lesionmetrics::detail {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDefaultVoxOffset = 352;

// Header field offsets.
constexpr std::size_t kDim = 40;
constexpr std::size_t kDatatype = 70;
constexpr std::size_t kBitpix = 72;
constexpr std::size_t kPixdim = 76;
constexpr std::size_t kVoxOffset = 108;
constexpr std::size_t kSclSlope = 112;
constexpr std::size_t kSclInter = 116;
constexpr std::size_t kXyztUnits = 123;
constexpr std::size_t kQformCode = 252;
constexpr std::size_t kSformCode = 254;
constexpr std::size_t kSrowX = 280;
constexpr std::size_t kMagic = 344;

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtInt32 = 8;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtFloat64 = 64;

std::vector<std::uint8_t> slurp(const std::filesystem::path& path, bool gzipped) {
  if (!gzipped) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> buf{};
  int n = 0;
  while ((n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) {
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw FormatError("corrupt gzip stream in " + path.string());
  return out;
}

VoxelType from_nifti_datatype(std::int16_t code) {
  switch (code) {
    case kDtUint8: return VoxelType::UInt8;
    case kDtInt16: return VoxelType::Int16;
    case kDtInt32: return VoxelType::Int32;
    case kDtFloat32: return VoxelType::Float32;
    case kDtFloat64: return VoxelType::Float64;
    default: throw FormatError("unsupported NIfTI datatype " + std::to_string(code));
  }
}

std::int16_t to_nifti_datatype(VoxelType t) {
  switch (t) {
    case VoxelType::UInt8: return kDtUint8;
    case VoxelType::Int16: return kDtInt16;
    case VoxelType::Int32: return kDtInt32;
    case VoxelType::Float32: return kDtFloat32;
    case VoxelType::Float64: return kDtFloat64;
  }
  return 0;
}

}  // namespace

RawVoxels read_nifti(const std::filesystem::path& path, bool gzipped) {
  const auto bytes = slurp(path, gzipped);
  if (bytes.size() < kHeaderSize) throw FormatError(path.string() + ": truncated NIfTI header");
  const std::uint8_t* h = bytes.data();

  bool le = true;
  if (load_scalar<std::int32_t>(h, true) != 348) {
    if (load_scalar<std::int32_t>(h, false) != 348) {
      throw FormatError(path.string() + ": not a NIfTI-1 file (sizeof_hdr != 348)");
    }
    le = false;
  }
  if (std::memcmp(h + kMagic, "n+1", 4) != 0) {
    throw FormatError(path.string() + ": only single-file NIfTI-1 ('n+1') is supported");
  }

  const auto i16 = [&](std::size_t off) { return load_scalar<std::int16_t>(h + off, le); };
  const auto f32 = [&](std::size_t off) { return load_scalar<float>(h + off, le); };

  const int ndim = i16(kDim);
  if (ndim < 1 || ndim > 7) throw FormatError(path.string() + ": invalid dim[0]");
  std::array<std::size_t, 3> n{1, 1, 1};
  for (int d = 1; d <= ndim; ++d) {
    const int extent = i16(kDim + 2 * static_cast<std::size_t>(d));
    if (extent <= 0) throw FormatError(path.string() + ": non-positive dimension");
    if (d <= 3) {
      n[static_cast<std::size_t>(d - 1)] = static_cast<std::size_t>(extent);
    } else if (extent != 1) {
      throw FormatError(path.string() + ": only 3D volumes are supported");
    }
  }

  RawVoxels vox;
  vox.dims = {n[0], n[1], n[2]};
  vox.type = from_nifti_datatype(i16(kDatatype));
  if (static_cast<std::size_t>(i16(kBitpix)) != 8 * bytes_per_voxel(vox.type)) {
    throw FormatError(path.string() + ": bitpix disagrees with datatype");
  }

  std::array<double, 3> sp{};
  bool pixdim_ok = true;
  for (std::size_t a = 0; a < 3; ++a) {
    sp[a] = std::fabs(f32(kPixdim + 4 * (a + 1)));
    pixdim_ok = pixdim_ok && sp[a] > 0.0 && std::isfinite(sp[a]);
  }
  if (!pixdim_ok && i16(kSformCode) > 0) {
    // Column norms of the sform affine.
    for (std::size_t col = 0; col < 3; ++col) {
      double s = 0.0;
      for (std::size_t row = 0; row < 3; ++row) {
        const double v = f32(kSrowX + 16 * row + 4 * col);
        s += v * v;
      }
      sp[col] = std::sqrt(s);
    }
  }
  vox.spacing = {sp[0], sp[1], sp[2]};
  try {
    vox.spacing.validate();
  } catch (const RangeError&) {
    throw FormatError(path.string() + ": header carries no usable voxel spacing");
  }

  const double offset = f32(kVoxOffset);
  if (!(offset >= static_cast<double>(kHeaderSize)) || offset != std::floor(offset)) {
    throw FormatError(path.string() + ": invalid vox_offset");
  }
  const auto start = static_cast<std::size_t>(offset);
  const std::size_t count = vox.dims.size();
  const std::size_t need = count * bytes_per_voxel(vox.type);
  if (bytes.size() < start || bytes.size() - start != need) {
    throw FormatError(path.string() + ": dimension mismatch between header and payload");
  }
  const auto file_order = decode_voxels(h + start, count, vox.type, le);

  // NIfTI stores x fastest.
  vox.values.resize(count);
  for (std::size_t k = 0; k < n[2]; ++k) {
    for (std::size_t j = 0; j < n[1]; ++j) {
      for (std::size_t i = 0; i < n[0]; ++i) {
        vox.values[vox.dims.index(i, j, k)] = file_order[i + n[0] * (j + n[1] * k)];
      }
    }
  }

  const double slope = f32(kSclSlope);
  const double inter = f32(kSclInter);
  if (slope != 0.0 && std::isfinite(slope) && !(slope == 1.0 && inter == 0.0)) {
    for (auto& v : vox.values) v = v * slope + inter;
    if (!is_floating(vox.type)) {
      for (double v : vox.values) {
        if (v != std::floor(v)) {
          throw FormatError(path.string() + ": scaled integer data is not integral");
        }
      }
    }
  }
  return vox;
}

void write_nifti(const std::filesystem::path& path, const RawVoxels& vox, bool gzipped) {
  std::vector<std::uint8_t> out(kDefaultVoxOffset, 0);
  std::uint8_t* h = out.data();
  store_scalar<std::int32_t>(h, 348);
  const auto& d = vox.dims;
  const std::array<std::size_t, 3> n{d.nx, d.ny, d.nz};
  store_scalar<std::int16_t>(h + kDim, 3);
  for (std::size_t a = 0; a < 3; ++a) {
    if (n[a] > 32767) throw FormatError("dimension too large for NIfTI-1");
    store_scalar<std::int16_t>(h + kDim + 2 * (a + 1), static_cast<std::int16_t>(n[a]));
  }
  for (std::size_t a = 4; a < 8; ++a) store_scalar<std::int16_t>(h + kDim + 2 * a, 1);
  store_scalar<std::int16_t>(h + kDatatype, to_nifti_datatype(vox.type));
  store_scalar<std::int16_t>(h + kBitpix, static_cast<std::int16_t>(8 * bytes_per_voxel(vox.type)));
  const auto sp = vox.spacing.as_array();
  store_scalar<float>(h + kPixdim, 1.0F);
  for (std::size_t a = 0; a < 3; ++a) {
    store_scalar<float>(h + kPixdim + 4 * (a + 1), static_cast<float>(sp[a]));
  }
  store_scalar<float>(h + kVoxOffset, static_cast<float>(kDefaultVoxOffset));
  store_scalar<float>(h + kSclSlope, 1.0F);
  h[kXyztUnits] = 2;  // millimetres
  store_scalar<std::int16_t>(h + kQformCode, 0);
  store_scalar<std::int16_t>(h + kSformCode, 2);
  for (std::size_t row = 0; row < 3; ++row) {
    store_scalar<float>(h + kSrowX + 16 * row + 4 * row, static_cast<float>(sp[row]));
  }
  std::memcpy(h + kMagic, "n+1", 4);

  std::vector<double> file_order(d.size());
  for (std::size_t k = 0; k < d.nz; ++k) {
    for (std::size_t j = 0; j < d.ny; ++j) {
      for (std::size_t i = 0; i < d.nx; ++i) {
        file_order[i + d.nx * (j + d.ny * k)] = vox.values[d.index(i, j, k)];
      }
    }
  }
  const auto payload = encode_voxels(file_order, vox.type);
  out.insert(out.end(), payload.begin(), payload.end());

  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  if (gzipped) {
    gzFile f = gzopen(path.string().c_str(), "wb");
    if (f == nullptr) throw Error("cannot write " + path.string());
    const int written = gzwrite(f, out.data(), static_cast<unsigned>(out.size()));
    gzclose(f);
    if (written != static_cast<int>(out.size())) throw Error("failed writing " + path.string());
  } else {
    std::ofstream o(path, std::ios::binary);
    o.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!o) throw Error("failed writing " + path.string());
  }
}

}  // namespace lesionmetrics::detail
