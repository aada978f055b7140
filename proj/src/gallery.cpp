#include "ctqa/gallery.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ctqa/error.hpp"
#include "ctqa/kernels.hpp"

namespace ctqa {
namespace {

int slice_at(double fraction, int n) { return static_cast<int>(std::floor(fraction * (n - 1) + 0.5)); }

struct PlaneAxes {
  int fixed, horizontal, vertical;
};

// Horizontal runs along increasing voxel index; vertical is drawn with the
// highest index at the top (superior / anterior up).
PlaneAxes axes_for(Plane plane) {
  switch (plane) {
    case Plane::Sagittal: return {0, 1, 2};
    case Plane::Coronal: return {1, 0, 2};
    case Plane::Axial: return {2, 0, 1};
  }
  return {2, 0, 1};
}

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

}  // namespace

std::string_view to_string(Plane plane) {
  switch (plane) {
    case Plane::Sagittal: return "sagittal";
    case Plane::Coronal: return "coronal";
    case Plane::Axial: return "axial";
  }
  return "?";
}

Montage render_montage(const Volume& volume, const MontageOptions& options) {
  volume.validate();
  for (int a = 0; a < 3; ++a) {
    if (volume.dims[a] < 3) throw Error(ErrorCode::DegenerateDim, "montage needs every dimension >= 3");
  }
  const int t = options.tile_size;
  if (t < 1) throw Error(ErrorCode::InvalidArgument, "tile size must be positive");

  std::vector<std::uint8_t> gray(volume.voxel_count());
  kernels::window_to_u8(volume.voxels, options.window_center, options.window_width, gray);
  const std::array<double, 3> spacing{volume.affine.column_norm(0), volume.affine.column_norm(1),
                                      volume.affine.column_norm(2)};

  Montage m;
  m.width = 3 * t;
  m.height = 3 * t;
  m.pixels.assign(static_cast<std::size_t>(m.width) * m.height, 0);

  const Plane planes[3] = {Plane::Sagittal, Plane::Coronal, Plane::Axial};
  for (int row = 0; row < 3; ++row) {
    const PlaneAxes ax = axes_for(planes[row]);
    const int nh = volume.dims[ax.horizontal];
    const int nv = volume.dims[ax.vertical];
    const double w_mm = nh * spacing[ax.horizontal];
    const double h_mm = nv * spacing[ax.vertical];
    const double scale = t / std::max(w_mm, h_mm);
    const int dw = std::clamp(static_cast<int>(std::lround(w_mm * scale)), 1, t);
    const int dh = std::clamp(static_cast<int>(std::lround(h_mm * scale)), 1, t);

    for (int col = 0; col < 3; ++col) {
      TileInfo tile;
      tile.plane = planes[row];
      tile.fraction = options.fractions[col];
      tile.slice_index = slice_at(tile.fraction, volume.dims[ax.fixed]);
      tile.width = dw;
      tile.height = dh;
      tile.x0 = col * t + (t - dw) / 2;
      tile.y0 = row * t + (t - dh) / 2;
      tile.source_width = nh;
      tile.source_height = nv;

      std::array<int, 3> idx{};
      idx[ax.fixed] = tile.slice_index;
      for (int v = 0; v < dh; ++v) {
        const int from_top = std::min(nv - 1, static_cast<int>((v + 0.5) * nv / dh));
        idx[ax.vertical] = nv - 1 - from_top;
        for (int u = 0; u < dw; ++u) {
          idx[ax.horizontal] = std::min(nh - 1, static_cast<int>((u + 0.5) * nh / dw));
          m.pixels[static_cast<std::size_t>(tile.y0 + v) * m.width + tile.x0 + u] =
              gray[volume.index(idx[0], idx[1], idx[2])];
        }
      }
      m.tiles.push_back(tile);
    }
  }
  return m;
}

std::array<int, 2> montage_pixel_for_voxel(const Montage& montage, std::size_t tile_index, int i, int j, int k) {
  const TileInfo& tile = montage.tiles.at(tile_index);
  const PlaneAxes ax = axes_for(tile.plane);
  const std::array<int, 3> idx{i, j, k};
  if (idx[ax.fixed] != tile.slice_index) return {-1, -1};
  const int h = idx[ax.horizontal];
  const int from_top = tile.source_height - 1 - idx[ax.vertical];
  const int u = static_cast<int>((h + 0.5) * tile.width / tile.source_width);
  const int v = static_cast<int>((from_top + 0.5) * tile.height / tile.source_height);
  return {tile.x0 + std::min(u, tile.width - 1), tile.y0 + std::min(v, tile.height - 1)};
}

std::vector<std::uint8_t> encode_png(const Montage& montage) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorCode::IoFailure, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoFailure, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_append, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(montage.width), static_cast<png_uint_32>(montage.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < montage.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(montage.pixels.data() + static_cast<std::size_t>(y) * montage.width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::string& path, const Montage& montage) {
  const auto bytes = encode_png(montage);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
}

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string build_index(std::vector<GalleryEntry> entries, bool blind) {
  std::sort(entries.begin(), entries.end(),
            [](const GalleryEntry& a, const GalleryEntry& b) { return a.scan_id < b.scan_id; });
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>CT QA gallery</title>\n<style>\n"
     << "body{font-family:sans-serif;background:#111;color:#ddd}\n"
     << "table{border-collapse:collapse}td,th{padding:4px 8px;border-bottom:1px solid #333;vertical-align:top}\n"
     << "img{width:240px;image-rendering:pixelated}\n"
     << ".badge{display:inline-block;margin:1px;padding:1px 5px;border-radius:3px;font-size:12px}\n"
     << ".pass{background:#1f6f2f}.fail{background:#9b1c1c}.na{background:#444}\n"
     << "</style>\n</head>\n<body>\n<h1>CT QA gallery</h1>\n"
     << "<p>" << entries.size() << " scans</p>\n<table>\n<thead><tr><th>montage</th><th>scan</th>";
  if (!blind) os << "<th>objective checks</th>";
  os << "</tr></thead>\n<tbody>\n";
  for (const auto& e : entries) {
    const std::string id = html_escape(e.scan_id);
    os << "<tr id=\"" << id << "\"><td><a href=\"" << html_escape(e.montage_path) << "\"><img src=\""
       << html_escape(e.montage_path) << "\" alt=\"" << id << "\"></a></td><td>" << id;
    if (!e.disposition.empty()) os << "<br><small>" << html_escape(e.disposition) << "</small>";
    os << "</td>";
    if (!blind) {
      os << "<td>";
      for (const auto& f : e.findings) {
        const char* state = !f.applicable ? "na" : f.passed ? "pass" : "fail";
        os << "<span class=\"badge " << state << "\" title=\"" << html_escape(f.detail) << "\">" << to_string(f.check)
           << "</span>";
      }
      os << "</td>";
    }
    os << "</tr>\n";
  }
  os << "</tbody>\n</table>\n</body>\n</html>\n";
  return os.str();
}

}  // namespace ctqa
