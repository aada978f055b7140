#pragma once

// Test fixtures and brute-force oracles shared by the unit suites and the
// acceptance binary. The oracles deliberately avoid the library's own helpers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "ctqa/dicom_writer.hpp"
#include "ctqa/volume.hpp"

namespace ctqa::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ctqa_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// C1 by enumerating [min, max]: absent integers minus surplus copies.
inline std::int64_t oracle_c1(const std::vector<std::int64_t>& ins) {
  if (ins.empty()) return 0;
  std::int64_t lo = ins[0], hi = ins[0];
  for (auto v : ins) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::int64_t absent = 0;
  for (std::int64_t v = lo; v <= hi; ++v) {
    if (std::find(ins.begin(), ins.end(), v) == ins.end()) ++absent;
  }
  std::int64_t surplus = 0;
  for (std::size_t i = 0; i < ins.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (ins[j] == ins[i]) {
        ++surplus;
        break;
      }
    }
  }
  return absent - surplus;
}

// C2 as an O(n^2) scan over unordered pairs.
inline std::int64_t oracle_c2(const std::vector<std::int64_t>& ins) {
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < ins.size(); ++i)
    for (std::size_t j = i + 1; j < ins.size(); ++j)
      if (ins[i] == ins[j]) ++pairs;
  return pairs;
}

// Most frequent |d| at 1 um resolution; ties go to the smaller value.
inline double oracle_modal(const std::vector<double>& d) {
  if (d.empty()) return 0.0;
  long long best_key = 0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const long long key = std::llround(std::abs(d[i]) * 1000.0);
    std::size_t count = 0;
    for (double e : d) count += std::llround(std::abs(e) * 1000.0) == key;
    if (count > best || (count == best && key < best_key)) {
      best = count;
      best_key = key;
    }
  }
  return best_key / 1000.0;
}

struct C3Terms {
  std::int64_t below = 0;
  std::int64_t uneven = 0;
  std::int64_t total() const { return below + uneven; }
};

// Both C3 terms on distances oriented along the majority stacking direction.
inline C3Terms oracle_c3(const std::vector<double>& d, double eps) {
  int pos = 0, neg = 0;
  for (double x : d) {
    pos += x > 0;
    neg += x < 0;
  }
  const double sign = neg > pos ? -1.0 : 1.0;
  const double modal = oracle_modal(d);
  C3Terms t;
  for (double x : d) {
    const double sd = sign * x;
    if (sd < eps) ++t.below;
    if (std::abs(sd - modal) > eps) ++t.uneven;
  }
  return t;
}

inline double dice(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::size_t both = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    both += a[i] && b[i];
    na += a[i] != 0;
    nb += b[i] != 0;
  }
  return na + nb == 0 ? 1.0 : 2.0 * both / static_cast<double>(na + nb);
}

// Minimal CT slice with the tags parse_slice needs.
inline DicomDataset basic_slice(int rows = 4, int cols = 3, std::int64_t instance = 7, double location = -125.0) {
  DicomDataset ds;
  ds.set_string(0x0008, 0x0018, "UI", "1.2.3.4.5");
  ds.set_string(0x0020, 0x000E, "UI", "1.2.3.4");
  ds.set_string(0x0020, 0x0013, "IS", std::to_string(instance));
  ds.set_string(0x0020, 0x1041, "DS", format_decimal_string(location));
  ds.set_string(0x0020, 0x0032, "DS", "-100\\-120\\" + format_decimal_string(location));
  ds.set_string(0x0020, 0x0037, "DS", "1\\0\\0\\0\\1\\0");
  ds.set_string(0x0018, 0x0050, "DS", "2.5");
  ds.set_us(0x0028, 0x0002, 1);
  ds.set_string(0x0028, 0x0004, "CS", "MONOCHROME2");
  ds.set_us(0x0028, 0x0010, static_cast<std::uint16_t>(rows));
  ds.set_us(0x0028, 0x0011, static_cast<std::uint16_t>(cols));
  ds.set_string(0x0028, 0x0030, "DS", "0.7\\0.8");
  ds.set_us(0x0028, 0x0100, 16);
  ds.set_us(0x0028, 0x0101, 16);
  ds.set_us(0x0028, 0x0102, 15);
  ds.set_us(0x0028, 0x0103, 0);
  ds.set_string(0x0028, 0x1052, "DS", "-1024");
  ds.set_string(0x0028, 0x1053, "DS", "1");
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(rows) * cols * 2);
  for (std::size_t i = 0; i < pixels.size() / 2; ++i) {
    const auto v = static_cast<std::uint16_t>(1000 + i);
    pixels[2 * i] = v & 0xFF;
    pixels[2 * i + 1] = v >> 8;
  }
  ds.set_bytes(0x7FE0, 0x0010, "OW", std::move(pixels));
  return ds;
}

inline Volume ramp_volume(std::array<int, 3> dims, const Affine& affine) {
  Volume v;
  v.dims = dims;
  v.affine = affine;
  v.voxels.resize(v.voxel_count());
  for (std::size_t i = 0; i < v.voxels.size(); ++i) v.voxels[i] = static_cast<float>(static_cast<int>(i % 3001) - 1500);
  return v;
}

}  // namespace ctqa::testing
