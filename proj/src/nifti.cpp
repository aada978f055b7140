#include "ctqa/nifti.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ctqa/error.hpp"

namespace ctqa {
namespace {

// Field offsets in the 348-byte NIfTI-1 header.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffMagic = 344;

template <typename T>
void put(std::vector<std::uint8_t>& buf, std::size_t offset, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> buf, std::size_t offset) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  return value;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::int16_t select_datatype(std::span<const float> voxels) {
  for (float v : voxels) {
    if (v != std::nearbyint(v) || v < -32768.0f || v > 32767.0f) return kNiftiFloat32;
  }
  return kNiftiInt16;
}

std::vector<std::uint8_t> write_nifti(const Volume& volume) {
  volume.validate();
  const std::int16_t datatype = select_datatype(volume.voxels);
  const std::size_t bytes_per_voxel = datatype == kNiftiInt16 ? 2 : 4;
  std::vector<std::uint8_t> buf(kNiftiVoxOffset + volume.voxel_count() * bytes_per_voxel, 0);

  put<std::int32_t>(buf, 0, kNiftiHeaderSize);
  buf[38] = 'r';
  put<std::int16_t>(buf, kOffDim, 3);
  for (int a = 0; a < 3; ++a) put<std::int16_t>(buf, kOffDim + 2 * (a + 1), static_cast<std::int16_t>(volume.dims[a]));
  for (int a = 4; a < 8; ++a) put<std::int16_t>(buf, kOffDim + 2 * a, 1);
  put<std::int16_t>(buf, kOffDatatype, datatype);
  put<std::int16_t>(buf, kOffBitpix, static_cast<std::int16_t>(bytes_per_voxel * 8));
  put<float>(buf, kOffPixdim, 1.0f);  // qfac
  for (int a = 0; a < 3; ++a) put<float>(buf, kOffPixdim + 4 * (a + 1), static_cast<float>(volume.affine.column_norm(a)));
  for (int a = 4; a < 8; ++a) put<float>(buf, kOffPixdim + 4 * a, 1.0f);
  put<float>(buf, kOffVoxOffset, static_cast<float>(kNiftiVoxOffset));
  put<float>(buf, kOffSclSlope, 1.0f);
  put<float>(buf, kOffSclInter, 0.0f);
  buf[kOffXyztUnits] = 2;  // millimetres
  std::memcpy(buf.data() + kOffDescrip, "ctqa", 4);
  put<std::int16_t>(buf, kOffQformCode, 0);
  put<std::int16_t>(buf, kOffSformCode, 1);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) put<float>(buf, kOffSrowX + 16 * r + 4 * c, static_cast<float>(volume.affine(r, c)));
  }
  std::memcpy(buf.data() + kOffMagic, "n+1\0", 4);

  std::uint8_t* data = buf.data() + kNiftiVoxOffset;
  if (datatype == kNiftiInt16) {
    for (std::size_t v = 0; v < volume.voxels.size(); ++v) {
      const auto s = static_cast<std::int16_t>(volume.voxels[v]);
      std::memcpy(data + 2 * v, &s, 2);
    }
  } else {
    std::memcpy(data, volume.voxels.data(), volume.voxels.size() * 4);
  }
  return buf;
}

Volume read_nifti(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < static_cast<std::size_t>(kNiftiHeaderSize)) throw Error(ErrorCode::BadMagic, "file shorter than header");
  if (get<std::int32_t>(bytes, 0) != kNiftiHeaderSize) throw Error(ErrorCode::BadMagic, "sizeof_hdr != 348");
  if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0) throw Error(ErrorCode::BadMagic, "magic is not n+1");

  const auto ndim = get<std::int16_t>(bytes, kOffDim);
  if (ndim < 1 || ndim > 7) throw Error(ErrorCode::HeaderDimMismatch, "dim[0] out of range");
  Volume vol;
  for (int a = 0; a < 3; ++a) {
    vol.dims[a] = a < ndim ? get<std::int16_t>(bytes, kOffDim + 2 * (a + 1)) : 1;
    if (vol.dims[a] < 1) throw Error(ErrorCode::HeaderDimMismatch, "non-positive dimension");
  }
  for (int a = 3; a < ndim; ++a) {
    if (get<std::int16_t>(bytes, kOffDim + 2 * (a + 1)) > 1) throw Error(ErrorCode::HeaderDimMismatch, "more than 3 dimensions");
  }

  const auto datatype = get<std::int16_t>(bytes, kOffDatatype);
  std::size_t bpv = 0;
  switch (datatype) {
    case 2: bpv = 1; break;    // uint8
    case 4: bpv = 2; break;    // int16
    case 8: bpv = 4; break;    // int32
    case 16: bpv = 4; break;   // float32
    case 64: bpv = 8; break;   // float64
    case 256: bpv = 1; break;  // int8
    case 512: bpv = 2; break;  // uint16
    default: throw Error(ErrorCode::UnsupportedDatatype, "datatype " + std::to_string(datatype));
  }
  const float vox_offset_f = get<float>(bytes, kOffVoxOffset);
  const auto offset = static_cast<std::size_t>(vox_offset_f < kNiftiVoxOffset ? kNiftiVoxOffset : vox_offset_f);
  const std::size_t count = vol.voxel_count();
  if (offset + count * bpv > bytes.size()) throw Error(ErrorCode::HeaderDimMismatch, "voxel data shorter than dims imply");

  float slope = get<float>(bytes, kOffSclSlope);
  float inter = get<float>(bytes, kOffSclInter);
  const bool scaled = slope != 0.0f && std::isfinite(slope) && !(slope == 1.0f && inter == 0.0f);

  vol.voxels.resize(count);
  const std::uint8_t* p = bytes.data() + offset;
  for (std::size_t v = 0; v < count; ++v) {
    double x = 0;
    switch (datatype) {
      case 2: x = p[v]; break;
      case 4: { std::int16_t s; std::memcpy(&s, p + 2 * v, 2); x = s; break; }
      case 8: { std::int32_t s; std::memcpy(&s, p + 4 * v, 4); x = s; break; }
      case 16: { float s; std::memcpy(&s, p + 4 * v, 4); vol.voxels[v] = s; break; }
      case 64: { double s; std::memcpy(&s, p + 8 * v, 8); x = s; break; }
      case 256: x = static_cast<std::int8_t>(p[v]); break;
      case 512: { std::uint16_t s; std::memcpy(&s, p + 2 * v, 2); x = s; break; }
    }
    if (datatype != 16) vol.voxels[v] = static_cast<float>(x);
    if (scaled) vol.voxels[v] = static_cast<float>(vol.voxels[v] * static_cast<double>(slope) + inter);
  }

  const auto sform = get<std::int16_t>(bytes, kOffSformCode);
  if (sform > 0) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) vol.affine(r, c) = get<float>(bytes, kOffSrowX + 16 * r + 4 * c);
    }
  } else {
    // Without an sform only pixdim scaling is recoverable (qform is not supported).
    double px[3];
    for (int a = 0; a < 3; ++a) {
      px[a] = std::abs(get<float>(bytes, kOffPixdim + 4 * (a + 1)));
      if (!(px[a] > 0)) px[a] = 1.0;
    }
    vol.affine = Affine::diagonal(px[0], px[1], px[2]);
  }
  vol.validate();
  return vol;
}

void save_nifti(const std::string& path, const Volume& volume) {
  const auto bytes = write_nifti(volume);
  if (ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "wb6");
    if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + path);
    const int written = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    const int closed = gzclose(f);
    if (written != static_cast<int>(bytes.size()) || closed != Z_OK) throw Error(ErrorCode::IoFailure, "write failed: " + path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

Volume load_nifti(const std::string& path) {
  std::vector<std::uint8_t> bytes;
  if (ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + path);
    std::uint8_t chunk[1 << 16];
    int n;
    while ((n = gzread(f, chunk, sizeof chunk)) > 0) bytes.insert(bytes.end(), chunk, chunk + n);
    const bool failed = n < 0;
    gzclose(f);
    if (failed) throw Error(ErrorCode::IoFailure, "corrupt gzip stream: " + path);
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return read_nifti(bytes);
}

}  // namespace ctqa
