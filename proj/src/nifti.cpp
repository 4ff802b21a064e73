#include "wbseg/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>

#include <fmt/format.h>
#include <zlib.h>

#include "wbseg/error.hpp"

namespace wbseg {

namespace {

constexpr ByteOrder kHostOrder = std::endian::native == std::endian::little ? ByteOrder::Little : ByteOrder::Big;

template <typename T>
T load(std::span<const std::byte> bytes, std::size_t offset, ByteOrder order) {
  std::array<std::byte, sizeof(T)> raw{};
  std::memcpy(raw.data(), bytes.data() + offset, sizeof(T));
  if (order != kHostOrder) std::reverse(raw.begin(), raw.end());
  T value;
  std::memcpy(&value, raw.data(), sizeof(T));
  return value;
}

template <typename T>
void store(std::span<std::byte> bytes, std::size_t offset, T value) {
  std::array<std::byte, sizeof(T)> raw{};
  std::memcpy(raw.data(), &value, sizeof(T));
  if (kHostOrder != ByteOrder::Little) std::reverse(raw.begin(), raw.end());
  std::memcpy(bytes.data() + offset, raw.data(), sizeof(T));
}

// Field offsets in the 348-byte NIfTI-1 header.
namespace off {
constexpr std::size_t sizeof_hdr = 0;
constexpr std::size_t dim = 40;
constexpr std::size_t datatype = 70;
constexpr std::size_t bitpix = 72;
constexpr std::size_t pixdim = 76;
constexpr std::size_t vox_offset = 108;
constexpr std::size_t scl_slope = 112;
constexpr std::size_t scl_inter = 116;
constexpr std::size_t xyzt_units = 123;
constexpr std::size_t qform_code = 252;
constexpr std::size_t sform_code = 254;
constexpr std::size_t quatern_b = 256;
constexpr std::size_t srow_x = 280;
constexpr std::size_t srow_y = 296;
constexpr std::size_t srow_z = 312;
constexpr std::size_t magic = 344;
}  // namespace off

ByteOrder swapped(ByteOrder o) { return o == ByteOrder::Little ? ByteOrder::Big : ByteOrder::Little; }

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct GzFile {
  gzFile handle = nullptr;
  GzFile(const std::filesystem::path& path, const char* mode) : handle(gzopen(path.c_str(), mode)) {}
  ~GzFile() {
    if (handle) gzclose(handle);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;
};

}  // namespace

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  GzFile f(path, "rb");
  if (!f.handle) throw IoError(fmt::format("cannot open {}", path.string()));
  std::vector<std::byte> out;
  std::vector<std::byte> chunk(1 << 20);
  for (;;) {
    const int n = gzread(f.handle, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) {
      int errnum = 0;
      const char* msg = gzerror(f.handle, &errnum);
      throw CorruptionError(fmt::format("{}: {}", path.string(), msg ? msg : "read error"));
    }
    if (n == 0) break;
    out.insert(out.end(), chunk.begin(), chunk.begin() + n);
  }
  return out;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  const bool gz = ends_with(path.string(), ".gz");
  GzFile f(path, gz ? "wb6" : "wbT");
  if (!f.handle) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    if (gzwrite(f.handle, bytes.data() + done, n) != static_cast<int>(n)) {
      throw IoError(fmt::format("write to {} failed", path.string()));
    }
    done += n;
  }
  const int rc = gzclose(f.handle);
  f.handle = nullptr;
  if (rc != Z_OK) throw IoError(fmt::format("closing {} failed", path.string()));
}

NiftiHeader parse_nifti_header(std::span<const std::byte> bytes) {
  if (bytes.size() < kNiftiHeaderSize) {
    throw FormatError(fmt::format("header is {} bytes, expected 348", bytes.size()));
  }
  const auto le_size = load<std::int32_t>(bytes, off::sizeof_hdr, ByteOrder::Little);
  const auto be_size = load<std::int32_t>(bytes, off::sizeof_hdr, ByteOrder::Big);
  if (le_size == 540 || be_size == 540) throw UnsupportedError("NIfTI-2 files are not supported (sizeof_hdr = 540)");

  ByteOrder order = kHostOrder;
  const auto dim0 = load<std::int16_t>(bytes, off::dim, order);
  if (dim0 < 1 || dim0 > 7) {
    order = swapped(order);
    const auto dim0_swapped = load<std::int16_t>(bytes, off::dim, order);
    if (dim0_swapped < 1 || dim0_swapped > 7) throw FormatError("dim[0] is outside 1..7 in both byte orders");
  }

  NiftiHeader h;
  h.byte_order = order;
  h.sizeof_hdr = load<std::int32_t>(bytes, off::sizeof_hdr, order);
  if (h.sizeof_hdr != 348) throw FormatError(fmt::format("sizeof_hdr is {}, expected 348", h.sizeof_hdr));
  for (std::size_t i = 0; i < 8; ++i) {
    h.dim[i] = load<std::int16_t>(bytes, off::dim + 2 * i, order);
    h.pixdim[i] = load<float>(bytes, off::pixdim + 4 * i, order);
  }
  h.datatype = load<std::int16_t>(bytes, off::datatype, order);
  h.bitpix = load<std::int16_t>(bytes, off::bitpix, order);
  h.vox_offset = load<float>(bytes, off::vox_offset, order);
  h.scl_slope = load<float>(bytes, off::scl_slope, order);
  h.scl_inter = load<float>(bytes, off::scl_inter, order);
  h.xyzt_units = static_cast<std::uint8_t>(bytes[off::xyzt_units]);
  h.qform_code = load<std::int16_t>(bytes, off::qform_code, order);
  h.sform_code = load<std::int16_t>(bytes, off::sform_code, order);
  h.quatern_b = load<float>(bytes, off::quatern_b, order);
  h.quatern_c = load<float>(bytes, off::quatern_b + 4, order);
  h.quatern_d = load<float>(bytes, off::quatern_b + 8, order);
  h.qoffset_x = load<float>(bytes, off::quatern_b + 12, order);
  h.qoffset_y = load<float>(bytes, off::quatern_b + 16, order);
  h.qoffset_z = load<float>(bytes, off::quatern_b + 20, order);
  for (std::size_t i = 0; i < 4; ++i) {
    h.srow_x[i] = load<float>(bytes, off::srow_x + 4 * i, order);
    h.srow_y[i] = load<float>(bytes, off::srow_y + 4 * i, order);
    h.srow_z[i] = load<float>(bytes, off::srow_z + 4 * i, order);
  }
  std::memcpy(h.magic.data(), bytes.data() + off::magic, 4);

  const bool n_plus_1 = h.magic == std::array<char, 4>{'n', '+', '1', '\0'};
  const bool ni1 = h.magic == std::array<char, 4>{'n', 'i', '1', '\0'};
  if (!n_plus_1 && !ni1) {
    if (h.magic[0] == 'n' && h.magic[2] == '2') throw UnsupportedError("NIfTI-2 files are not supported");
    throw FormatError("bad NIfTI magic (expected \"n+1\" or \"ni1\")");
  }
  return h;
}

std::array<std::byte, kNiftiHeaderSize> serialize_nifti_header(const NiftiHeader& h) {
  std::array<std::byte, kNiftiHeaderSize> out{};
  std::span<std::byte> b(out);
  store<std::int32_t>(b, off::sizeof_hdr, 348);
  for (std::size_t i = 0; i < 8; ++i) {
    store<std::int16_t>(b, off::dim + 2 * i, h.dim[i]);
    store<float>(b, off::pixdim + 4 * i, h.pixdim[i]);
  }
  store<std::int16_t>(b, off::datatype, h.datatype);
  store<std::int16_t>(b, off::bitpix, h.bitpix);
  store<float>(b, off::vox_offset, h.vox_offset);
  store<float>(b, off::scl_slope, h.scl_slope);
  store<float>(b, off::scl_inter, h.scl_inter);
  out[off::xyzt_units] = static_cast<std::byte>(h.xyzt_units);
  store<std::int16_t>(b, off::qform_code, h.qform_code);
  store<std::int16_t>(b, off::sform_code, h.sform_code);
  const std::array<float, 6> quat{h.quatern_b, h.quatern_c, h.quatern_d, h.qoffset_x, h.qoffset_y, h.qoffset_z};
  for (std::size_t i = 0; i < 6; ++i) store<float>(b, off::quatern_b + 4 * i, quat[i]);
  for (std::size_t i = 0; i < 4; ++i) {
    store<float>(b, off::srow_x + 4 * i, h.srow_x[i]);
    store<float>(b, off::srow_y + 4 * i, h.srow_y[i]);
    store<float>(b, off::srow_z + 4 * i, h.srow_z[i]);
  }
  std::memcpy(out.data() + off::magic, h.magic.data(), 4);
  return out;
}

Mat4 resolve_affine(const NiftiHeader& h) {
  Mat4 a = Mat4::identity();
  if (h.sform_code > 0) {
    for (int c = 0; c < 4; ++c) {
      a(0, c) = h.srow_x[static_cast<std::size_t>(c)];
      a(1, c) = h.srow_y[static_cast<std::size_t>(c)];
      a(2, c) = h.srow_z[static_cast<std::size_t>(c)];
    }
    return a;
  }
  const double dx = std::abs(static_cast<double>(h.pixdim[1]));
  const double dy = std::abs(static_cast<double>(h.pixdim[2]));
  const double dz = std::abs(static_cast<double>(h.pixdim[3]));
  if (h.qform_code > 0) {
    const double b = h.quatern_b;
    const double c = h.quatern_c;
    const double d = h.quatern_d;
    const double a0 = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
    const double r[3][3] = {
        {a0 * a0 + b * b - c * c - d * d, 2 * (b * c - a0 * d), 2 * (b * d + a0 * c)},
        {2 * (b * c + a0 * d), a0 * a0 + c * c - b * b - d * d, 2 * (c * d - a0 * b)},
        {2 * (b * d - a0 * c), 2 * (c * d + a0 * b), a0 * a0 + d * d - c * c - b * b},
    };
    const double scale[3] = {dx, dy, dz * qfac};
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) a(row, col) = r[row][col] * scale[col];
    }
    a(0, 3) = h.qoffset_x;
    a(1, 3) = h.qoffset_y;
    a(2, 3) = h.qoffset_z;
    return a;
  }
  return Mat4::diagonal({dx, dy, dz});
}

DataKind data_kind_from_code(std::int16_t datatype) {
  switch (datatype) {
    case nifti_type::kUInt8: return DataKind::UInt8;
    case nifti_type::kInt16: return DataKind::Int16;
    case nifti_type::kInt32: return DataKind::Int32;
    case nifti_type::kFloat32: return DataKind::Float32;
    case nifti_type::kFloat64: return DataKind::Float64;
    case nifti_type::kUInt16: return DataKind::UInt16;
    default: throw UnsupportedError(fmt::format("unsupported NIfTI datatype code {}", datatype));
  }
}

std::int16_t datatype_code(DataKind kind) {
  switch (kind) {
    case DataKind::UInt8: return nifti_type::kUInt8;
    case DataKind::Int16: return nifti_type::kInt16;
    case DataKind::Int32: return nifti_type::kInt32;
    case DataKind::Float32: return nifti_type::kFloat32;
    case DataKind::Float64: return nifti_type::kFloat64;
    case DataKind::UInt16: return nifti_type::kUInt16;
  }
  return 0;
}

int bytes_per_voxel(DataKind kind) {
  switch (kind) {
    case DataKind::UInt8: return 1;
    case DataKind::Int16:
    case DataKind::UInt16: return 2;
    case DataKind::Int32:
    case DataKind::Float32: return 4;
    case DataKind::Float64: return 8;
  }
  return 0;
}

namespace {

struct RawVolume {
  NiftiHeader header;
  Grid grid;
  DataKind kind;
  bool scaled = false;
  std::vector<double> values;
};

std::filesystem::path replace_stem_suffix(const std::filesystem::path& path, std::string_view from,
                                          std::string_view to) {
  std::string s = path.string();
  const bool gz = ends_with(s, ".gz");
  if (gz) s.resize(s.size() - 3);
  if (ends_with(s, from)) s.replace(s.size() - from.size(), from.size(), to);
  if (gz) s += ".gz";
  return s;
}

Dims3 spatial_dims(const NiftiHeader& h) {
  const int ndim = h.dim[0];
  Dims3 dims{1, 1, 1};
  for (int k = 0; k < 3; ++k) {
    if (k < ndim) {
      const auto d = h.dim[static_cast<std::size_t>(k + 1)];
      if (d < 1) throw FormatError(fmt::format("dim[{}] = {} must be >= 1", k + 1, d));
      dims[static_cast<std::size_t>(k)] = d;
    }
  }
  for (int k = 4; k <= ndim; ++k) {
    if (h.dim[static_cast<std::size_t>(k)] > 1) {
      throw UnsupportedError(fmt::format("dim[{}] = {}: only 3D volumes are supported", k, h.dim[static_cast<std::size_t>(k)]));
    }
  }
  return dims;
}

template <typename T>
void decode_samples(std::span<const std::byte> data, ByteOrder order, std::vector<double>& out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(load<T>(data, i * sizeof(T), order));
}

RawVolume read_raw(const std::filesystem::path& path) {
  const std::string name = path.string();
  const bool is_pair_header = ends_with(name, ".hdr") || ends_with(name, ".hdr.gz");
  const bool is_pair_image = ends_with(name, ".img") || ends_with(name, ".img.gz");
  const auto header_path = is_pair_image ? replace_stem_suffix(path, ".img", ".hdr") : path;

  std::vector<std::byte> file = read_file_bytes(header_path);
  const NiftiHeader h = parse_nifti_header(file);

  std::vector<std::byte> image_bytes;
  std::size_t data_offset = 0;
  if (h.single_file()) {
    if (h.vox_offset < static_cast<float>(kNiftiHeaderSize)) {
      throw FormatError(fmt::format("vox_offset {} is inside the header", h.vox_offset));
    }
    data_offset = static_cast<std::size_t>(h.vox_offset);
  } else {
    if (!is_pair_header && !is_pair_image) {
      throw FormatError(fmt::format("{} has a header/image-pair magic but is not a .hdr file", name));
    }
    image_bytes = read_file_bytes(replace_stem_suffix(header_path, ".hdr", ".img"));
    data_offset = static_cast<std::size_t>(std::max(0.0f, h.vox_offset));
  }
  const std::span<const std::byte> source = h.single_file() ? std::span<const std::byte>(file)
                                                            : std::span<const std::byte>(image_bytes);

  const DataKind kind = data_kind_from_code(h.datatype);
  if (h.bitpix != 0 && h.bitpix != 8 * bytes_per_voxel(kind)) {
    throw FormatError(fmt::format("bitpix {} disagrees with datatype {}", h.bitpix, h.datatype));
  }
  const Dims3 dims = spatial_dims(h);
  const std::size_t count = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
  const std::size_t needed = count * static_cast<std::size_t>(bytes_per_voxel(kind));
  if (source.size() < data_offset || source.size() - data_offset < needed) {
    throw CorruptionError(fmt::format("{}: data section truncated ({} of {} bytes)", name,
                                      source.size() > data_offset ? source.size() - data_offset : 0, needed));
  }
  const auto data = source.subspan(data_offset, needed);

  std::vector<double> values(count);
  switch (kind) {
    case DataKind::UInt8: decode_samples<std::uint8_t>(data, h.byte_order, values); break;
    case DataKind::Int16: decode_samples<std::int16_t>(data, h.byte_order, values); break;
    case DataKind::Int32: decode_samples<std::int32_t>(data, h.byte_order, values); break;
    case DataKind::Float32: decode_samples<float>(data, h.byte_order, values); break;
    case DataKind::Float64: decode_samples<double>(data, h.byte_order, values); break;
    case DataKind::UInt16: decode_samples<std::uint16_t>(data, h.byte_order, values); break;
  }
  if (std::any_of(values.begin(), values.end(), [](double v) { return std::isnan(v); })) {
    throw DataError(fmt::format("{} contains NaN voxels", name));
  }

  double slope = h.scl_slope;
  const double inter = h.scl_inter;
  bool scaled = false;
  if (std::isfinite(slope) && std::isfinite(inter) && !((slope == 0.0 || slope == 1.0) && inter == 0.0)) {
    if (slope == 0.0) slope = 1.0;
    for (double& v : values) v = v * slope + inter;
    scaled = true;
  }

  Grid grid = [&] {
    try {
      return Grid::from_affine(dims, resolve_affine(h));
    } catch (const GeometryError& e) {
      throw FormatError(fmt::format("{}: invalid geometry: {}", name, e.what()));
    }
  }();
  return RawVolume{h, std::move(grid), scaled ? DataKind::Float64 : kind, scaled, std::move(values)};
}

LabelVolume to_labels(RawVolume&& raw, const std::filesystem::path& path, bool allow_float) {
  if (!is_integer(raw.kind) && !allow_float) {
    throw DataError(fmt::format("{} stores {} data; loading it as labels needs the float-labels flag",
                                path.string(), to_string(raw.kind)));
  }
  std::vector<std::uint32_t> labels(raw.values.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = raw.values[i];
    if (v < 0 || v != std::floor(v) || v > static_cast<double>(std::numeric_limits<std::uint32_t>::max())) {
      throw DataError(fmt::format("{}: voxel value {} is not a valid label", path.string(), v));
    }
    labels[i] = static_cast<std::uint32_t>(v);
  }
  const DataKind storage = is_integer(raw.kind) ? raw.kind : DataKind::UInt8;
  return LabelVolume(std::move(raw.grid), std::move(labels), storage);
}

template <typename T>
void encode_samples(std::span<std::byte> out, std::size_t count, const auto& value_at) {
  for (std::size_t i = 0; i < count; ++i) store<T>(out, i * sizeof(T), static_cast<T>(value_at(i)));
}

std::vector<std::byte> encode(const Grid& grid, DataKind kind, std::size_t count, const auto& value_at) {
  NiftiHeader h;
  h.dim = {3, static_cast<std::int16_t>(grid.dims()[0]), static_cast<std::int16_t>(grid.dims()[1]),
           static_cast<std::int16_t>(grid.dims()[2]), 1, 1, 1, 1};
  for (int k = 0; k < 3; ++k) {
    if (grid.dims()[k] > std::numeric_limits<std::int16_t>::max()) {
      throw UnsupportedError(fmt::format("dimension {} exceeds the NIfTI-1 limit of 32767", grid.dims()[k]));
    }
  }
  h.datatype = datatype_code(kind);
  h.bitpix = static_cast<std::int16_t>(8 * bytes_per_voxel(kind));
  h.pixdim = {1.0f,
              static_cast<float>(grid.spacing()[0]),
              static_cast<float>(grid.spacing()[1]),
              static_cast<float>(grid.spacing()[2]),
              0.0f, 0.0f, 0.0f, 0.0f};
  h.vox_offset = static_cast<float>(kNiftiVoxOffset);
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2;  // NIFTI_UNITS_MM
  h.qform_code = 0;
  h.sform_code = 1;
  const Mat4& a = grid.affine();
  for (int c = 0; c < 4; ++c) {
    h.srow_x[static_cast<std::size_t>(c)] = static_cast<float>(a(0, c));
    h.srow_y[static_cast<std::size_t>(c)] = static_cast<float>(a(1, c));
    h.srow_z[static_cast<std::size_t>(c)] = static_cast<float>(a(2, c));
  }
  h.magic = {'n', '+', '1', '\0'};

  const std::size_t data_bytes = count * static_cast<std::size_t>(bytes_per_voxel(kind));
  std::vector<std::byte> out(static_cast<std::size_t>(kNiftiVoxOffset) + data_bytes);
  const auto header = serialize_nifti_header(h);
  std::copy(header.begin(), header.end(), out.begin());
  // Bytes 348..351 stay zero: no extensions.
  std::span<std::byte> data(out.data() + kNiftiVoxOffset, data_bytes);
  switch (kind) {
    case DataKind::UInt8: encode_samples<std::uint8_t>(data, count, value_at); break;
    case DataKind::Int16: encode_samples<std::int16_t>(data, count, value_at); break;
    case DataKind::Int32: encode_samples<std::int32_t>(data, count, value_at); break;
    case DataKind::Float32: encode_samples<float>(data, count, value_at); break;
    case DataKind::Float64: encode_samples<double>(data, count, value_at); break;
    case DataKind::UInt16: encode_samples<std::uint16_t>(data, count, value_at); break;
  }
  return out;
}

}  // namespace

NiftiHeader read_nifti_header(const std::filesystem::path& path) {
  return parse_nifti_header(read_file_bytes(path));
}

AnyVolume read_volume(const std::filesystem::path& path, const ReadOptions& options) {
  RawVolume raw = read_raw(path);
  bool as_labels = false;
  switch (options.role) {
    case VolumeRole::Auto: as_labels = is_integer(raw.kind); break;
    case VolumeRole::Image: as_labels = false; break;
    case VolumeRole::Labels: as_labels = true; break;
  }
  if (as_labels) return to_labels(std::move(raw), path, options.allow_float_labels);
  return ImageVolume(std::move(raw.grid), raw.kind, std::move(raw.values));
}

ImageVolume read_image(const std::filesystem::path& path) {
  return std::get<ImageVolume>(read_volume(path, {VolumeRole::Image, false}));
}

LabelVolume read_labels(const std::filesystem::path& path, bool allow_float_labels) {
  return std::get<LabelVolume>(read_volume(path, {VolumeRole::Labels, allow_float_labels}));
}

void write_volume(const ImageVolume& volume, const std::filesystem::path& path) {
  const auto data = volume.data();
  const auto bytes = encode(volume.grid(), volume.kind(), data.size(), [&](std::size_t i) { return data[i]; });
  write_file_bytes(path, bytes);
}

DataKind label_storage_kind(const LabelVolume& volume) {
  const std::uint32_t top = volume.max_label();
  if (top > static_cast<std::uint32_t>(std::numeric_limits<std::int32_t>::max())) {
    throw DataError(fmt::format("label {} does not fit any NIfTI integer type", top));
  }
  const auto fits = [top](DataKind k) { return is_integer(k) && representable(k, static_cast<double>(top)); };
  if (fits(volume.storage())) return volume.storage();
  for (DataKind k : {DataKind::UInt8, DataKind::UInt16, DataKind::Int32}) {
    if (fits(k)) return k;
  }
  return DataKind::Int32;
}

void write_volume(const LabelVolume& volume, const std::filesystem::path& path) {
  const auto labels = volume.labels();
  const auto bytes = encode(volume.grid(), label_storage_kind(volume), labels.size(),
                            [&](std::size_t i) { return labels[i]; });
  write_file_bytes(path, bytes);
}

}  // namespace wbseg
