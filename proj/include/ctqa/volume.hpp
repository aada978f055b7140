#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ctqa/dicom.hpp"
#include "ctqa/series_qa.hpp"

namespace ctqa {

using Vec3 = std::array<double, 3>;

/// 4x4 voxel-to-world (RAS+, millimetres) transform. Column j < 3 is the world
/// step of voxel axis j, column 3 the world position of voxel (0,0,0).
struct Affine {
  std::array<std::array<double, 4>, 4> m{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};

  static Affine diagonal(double sx, double sy, double sz, Vec3 origin = {0, 0, 0});

  double operator()(int row, int col) const { return m[row][col]; }
  double& operator()(int row, int col) { return m[row][col]; }

  Vec3 column(int j) const { return {m[0][j], m[1][j], m[2][j]}; }
  void set_column(int j, const Vec3& v) {
    for (int i = 0; i < 3; ++i) m[i][j] = v[i];
  }
  Vec3 origin() const { return column(3); }
  double column_norm(int j) const;
  double det3() const;
  Vec3 apply(double i, double j, double k) const;

  bool operator==(const Affine&) const = default;
};

struct Volume {
  std::array<int, 3> dims{0, 0, 0};
  std::vector<float> voxels;  // x fastest: voxels[i + nx * (j + ny * k)]
  Affine affine;
  std::string series_uid;
  std::vector<std::string> history;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
  }
  float at(int i, int j, int k) const { return voxels[index(i, j, k)]; }
  float& at(int i, int j, int k) { return voxels[index(i, j, k)]; }

  void validate() const;  // throws InvalidArgument
};

/// Stacks decoded slices (in manifest order) into a RAS+ volume. In-plane rows
/// are stored bottom-up so that a conventional axial acquisition lands in the
/// standard (-,+,+) orientation.
Volume assemble_volume(const SeriesManifest& manifest, std::span<const PixelSlab> slabs);

}  // namespace ctqa
