#pragma once

// slicesdir-style review gallery: a 3x3 montage of orthogonal slices per scan
// and a static index page.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ctqa/series_qa.hpp"
#include "ctqa/volume.hpp"

namespace ctqa {

enum class Plane { Sagittal, Coronal, Axial };

std::string_view to_string(Plane plane);

struct MontageOptions {
  int tile_size = 160;  // pixels per tile edge
  std::array<double, 3> fractions{0.4, 0.5, 0.6};
  double window_center = -600.0;
  double window_width = 1500.0;
};

struct TileInfo {
  Plane plane = Plane::Axial;
  double fraction = 0.5;
  int slice_index = 0;
  // Drawn area inside the tile (letterbox excluded), in montage pixels.
  int x0 = 0, y0 = 0, width = 0, height = 0;
  int source_width = 0, source_height = 0;  // voxel counts along the tile's horizontal/vertical axes
};

struct Montage {
  std::string scan_id;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // 8-bit grayscale, row-major
  std::vector<TileInfo> tiles;       // sagittal x3, coronal x3, axial x3

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Renders the nine default slices. The volume should be in standard
/// orientation. Throws DegenerateDim if any dimension is below 3.
Montage render_montage(const Volume& volume, const MontageOptions& options = {});

/// Montage pixel showing voxel (i, j, k) in tile `tile_index`, or {-1,-1}
/// when the voxel is not on that tile's slice.
std::array<int, 2> montage_pixel_for_voxel(const Montage& montage, std::size_t tile_index, int i, int j, int k);

std::vector<std::uint8_t> encode_png(const Montage& montage);
void write_png(const std::string& path, const Montage& montage);

struct GalleryEntry {
  std::string scan_id;
  std::string montage_path;  // relative to the index page
  std::vector<QaFinding> findings;
  std::string disposition;
};

/// Static review page, one row per scan ordered by scan_id.
std::string build_index(std::vector<GalleryEntry> entries, bool blind = false);

std::string html_escape(std::string_view text);

}  // namespace ctqa
