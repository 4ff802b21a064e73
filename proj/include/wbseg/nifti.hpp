#pragma once

// NIfTI-1 reader and writer.
//
// Reads single-file ("n+1") and header/image pair ("ni1") volumes in either
// byte order, optionally gzip-compressed. Writes single-file little-endian
// volumes with an sform and no intensity scaling; a ".gz" suffix selects
// gzip compression. NIfTI-2 files are rejected.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "wbseg/volume.hpp"

namespace wbseg {

inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr std::int32_t kNiftiVoxOffset = 352;

namespace nifti_type {
inline constexpr std::int16_t kUInt8 = 2;
inline constexpr std::int16_t kInt16 = 4;
inline constexpr std::int16_t kInt32 = 8;
inline constexpr std::int16_t kFloat32 = 16;
inline constexpr std::int16_t kFloat64 = 64;
inline constexpr std::int16_t kUInt16 = 512;
}  // namespace nifti_type

enum class ByteOrder { Little, Big };

// The subset of the 348-byte header this library interprets. Fields not
// listed here are written as zero.
struct NiftiHeader {
  std::int32_t sizeof_hdr = 348;
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = 0.0f;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::uint8_t xyzt_units = 0;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float quatern_b = 0.0f;
  float quatern_c = 0.0f;
  float quatern_d = 0.0f;
  float qoffset_x = 0.0f;
  float qoffset_y = 0.0f;
  float qoffset_z = 0.0f;
  std::array<float, 4> srow_x{};
  std::array<float, 4> srow_y{};
  std::array<float, 4> srow_z{};
  std::array<char, 4> magic{};

  ByteOrder byte_order = ByteOrder::Little;

  bool single_file() const { return magic[0] == 'n' && magic[1] == '+' && magic[2] == '1'; }
};

// Decodes a raw header. Byte order is chosen by dim[0]: if it is outside
// 1..7 natively, the swapped order is used. Throws FormatError on bad
// sizeof_hdr, dim[0] or magic, UnsupportedError on NIfTI-2.
NiftiHeader parse_nifti_header(std::span<const std::byte> bytes);

// Encodes a header little-endian; `bytes` is exactly 348 long.
std::array<std::byte, kNiftiHeaderSize> serialize_nifti_header(const NiftiHeader& header);

// sform if sform_code > 0, else qform if qform_code > 0, else a diagonal
// pixdim affine.
Mat4 resolve_affine(const NiftiHeader& header);

DataKind data_kind_from_code(std::int16_t datatype);
std::int16_t datatype_code(DataKind kind);
int bytes_per_voxel(DataKind kind);

enum class VolumeRole {
  // Integer datatypes load as labels, float datatypes (or scaled data) as images.
  Auto,
  Image,
  Labels,
};

struct ReadOptions {
  VolumeRole role = VolumeRole::Auto;
  // Float label maps are ambiguous; loading one as labels needs this flag.
  bool allow_float_labels = false;
};

using AnyVolume = std::variant<ImageVolume, LabelVolume>;

NiftiHeader read_nifti_header(const std::filesystem::path& path);
AnyVolume read_volume(const std::filesystem::path& path, const ReadOptions& options = {});
ImageVolume read_image(const std::filesystem::path& path);
LabelVolume read_labels(const std::filesystem::path& path, bool allow_float_labels = false);

void write_volume(const ImageVolume& volume, const std::filesystem::path& path);
void write_volume(const LabelVolume& volume, const std::filesystem::path& path);

// Narrowest of the label storage hint, uint8, uint16, int32 that holds the
// largest label. Throws DataError when a label exceeds int32.
DataKind label_storage_kind(const LabelVolume& volume);

// Whole-file helpers; ".gz" files are inflated/deflated transparently.
std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace wbseg
