#include "ctqa/volume.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctqa/error.hpp"

namespace ctqa {
namespace {

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 lps_to_ras(const Vec3& v) { return {-v[0], -v[1], v[2]}; }

constexpr double kSpacingTolerance = 1e-3;

}  // namespace

Affine Affine::diagonal(double sx, double sy, double sz, Vec3 origin) {
  Affine a;
  a.m = {{{sx, 0, 0, origin[0]}, {0, sy, 0, origin[1]}, {0, 0, sz, origin[2]}, {0, 0, 0, 1}}};
  return a;
}

double Affine::column_norm(int j) const { return std::sqrt(m[0][j] * m[0][j] + m[1][j] * m[1][j] + m[2][j] * m[2][j]); }

double Affine::det3() const {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Vec3 Affine::apply(double i, double j, double k) const {
  Vec3 w;
  for (int r = 0; r < 3; ++r) w[r] = m[r][0] * i + m[r][1] * j + m[r][2] * k + m[r][3];
  return w;
}

void Volume::validate() const {
  if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) throw Error(ErrorCode::InvalidArgument, "volume dims must be >= 1");
  if (voxels.size() != voxel_count()) throw Error(ErrorCode::InvalidArgument, "voxel count does not match dims");
  if (!(std::abs(affine.det3()) > 0)) throw Error(ErrorCode::InvalidArgument, "singular affine");
  if (affine(3, 0) != 0 || affine(3, 1) != 0 || affine(3, 2) != 0 || affine(3, 3) != 1) {
    throw Error(ErrorCode::InvalidArgument, "affine row 4 must be [0,0,0,1]");
  }
}

Volume assemble_volume(const SeriesManifest& manifest, std::span<const PixelSlab> slabs) {
  const auto& slices = manifest.slices;
  if (slices.empty()) throw Error(ErrorCode::EmptySeries, "no slices to assemble");
  if (slabs.size() != slices.size()) throw Error(ErrorCode::ShapeMismatch, "slab count differs from slice count");

  const int rows = slices.front().rows;
  const int cols = slices.front().columns;
  const auto spacing = slices.front().pixel_spacing;
  for (std::size_t s = 0; s < slices.size(); ++s) {
    if (slices[s].rows != rows || slices[s].columns != cols || slabs[s].height != rows || slabs[s].width != cols) {
      throw Error(ErrorCode::ShapeMismatch, "slice " + std::to_string(s) + " has a different matrix size");
    }
    for (int a = 0; a < 2; ++a) {
      if (std::abs(slices[s].pixel_spacing[a] - spacing[a]) > kSpacingTolerance) {
        throw Error(ErrorCode::InconsistentPixelSpacing, "slice " + std::to_string(s) + " spacing differs");
      }
    }
  }

  Volume vol;
  vol.series_uid = manifest.series_uid;

  std::array<double, 6> orientation{1, 0, 0, 0, 1, 0};
  if (slices.front().image_orientation) {
    orientation = *slices.front().image_orientation;
  } else {
    vol.history.push_back("assumed axial orientation");
  }
  const Vec3 row_dir{orientation[0], orientation[1], orientation[2]};  // along increasing column index
  const Vec3 col_dir{orientation[3], orientation[4], orientation[5]};  // along increasing row index
  const Vec3 normal = cross(row_dir, col_dir);

  std::vector<Vec3> positions(slices.size());
  bool fallback_position = false;
  for (std::size_t s = 0; s < slices.size(); ++s) {
    if (slices[s].image_position) {
      positions[s] = *slices[s].image_position;
    } else {
      positions[s] = {0.0, 0.0, slices[s].slice_location.value_or(0.0)};
      fallback_position = true;
    }
  }
  if (fallback_position) vol.history.push_back("positions taken from SliceLocation");

  std::vector<std::size_t> order(slices.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dot(positions[a], normal) < dot(positions[b], normal); });

  const std::size_t n = slices.size();
  Vec3 step;
  if (n > 1) {
    const Vec3& first = positions[order.front()];
    const Vec3& last = positions[order.back()];
    for (int i = 0; i < 3; ++i) step[i] = (last[i] - first[i]) / static_cast<double>(n - 1);
  } else {
    const double thickness = slices.front().slice_thickness.value_or(1.0);
    for (int i = 0; i < 3; ++i) step[i] = normal[i] * (thickness > 0 ? thickness : 1.0);
  }
  // Degenerate stacks (all slices at one position) still need an invertible affine.
  if (std::sqrt(dot(step, step)) < 1e-9) {
    for (int i = 0; i < 3; ++i) step[i] = normal[i];
    vol.history.push_back("zero through-plane step replaced by unit normal");
  }

  const double row_spacing = spacing[0];
  const double col_spacing = spacing[1];
  Vec3 origin_lps = positions[order.front()];
  for (int i = 0; i < 3; ++i) origin_lps[i] += col_dir[i] * row_spacing * (rows - 1);

  Vec3 c0 = lps_to_ras(row_dir), c1 = lps_to_ras(col_dir), c2 = lps_to_ras(step);
  for (int i = 0; i < 3; ++i) {
    c0[i] *= col_spacing;
    c1[i] *= -row_spacing;
  }
  vol.affine.set_column(0, c0);
  vol.affine.set_column(1, c1);
  vol.affine.set_column(2, c2);
  vol.affine.set_column(3, lps_to_ras(origin_lps));

  vol.dims = {cols, rows, static_cast<int>(n)};
  vol.voxels.resize(vol.voxel_count());
  for (std::size_t k = 0; k < n; ++k) {
    const PixelSlab& slab = slabs[order[k]];
    for (int j = 0; j < rows; ++j) {
      const int src_row = rows - 1 - j;
      std::copy_n(slab.values.begin() + static_cast<std::ptrdiff_t>(src_row) * cols, cols,
                  vol.voxels.begin() + static_cast<std::ptrdiff_t>(vol.index(0, j, static_cast<int>(k))));
    }
  }
  vol.history.push_back("assembled from " + std::to_string(n) + " slices");
  return vol;
}

}  // namespace ctqa
