#include <doctest.h>

#include <cmath>

#include "ctqa/error.hpp"
#include "ctqa/roi.hpp"
#include "support.hpp"

using namespace ctqa;
using namespace ctqa::testing;

namespace {

struct Ellipsoid {
  double cx, cy, cz, a, b, c;
  bool contains(double x, double y, double z) const {
    const double u = (x - cx) / a, v = (y - cy) / b, w = (z - cz) / c;
    return u * u + v * v + w * w <= 1.0;
  }
};

// Body ellipsoid in air with up to two lungs, unit voxels.
Volume chest(std::array<int, 3> dims, const std::vector<Ellipsoid>& lungs) {
  Volume v;
  v.dims = dims;
  v.affine = Affine::diagonal(-1, 1, 1);
  v.voxels.resize(v.voxel_count());
  const Ellipsoid body{dims[0] / 2.0, dims[1] / 2.0, dims[2] / 2.0, dims[0] * 0.42, dims[1] * 0.4, dims[2] * 0.45};
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        float hu = -1000.0f;
        if (body.contains(i, j, k)) {
          hu = 40.0f;
          for (const auto& l : lungs)
            if (l.contains(i, j, k)) hu = -820.0f;
        }
        v.voxels[v.index(i, j, k)] = hu;
      }
  return v;
}

// Brute-force dilation of the analytic lungs with the voxel ball of radius r.
std::vector<std::uint8_t> dilated_truth(std::array<int, 3> dims, const std::vector<Ellipsoid>& lungs, int r) {
  const auto idx = [&](int i, int j, int k) { return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i; };
  std::vector<std::uint8_t> core(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i)
        for (const auto& l : lungs) core[idx(i, j, k)] |= l.contains(i, j, k);
  std::vector<std::uint8_t> out(core.size());
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        if (!core[idx(i, j, k)]) continue;
        for (int dz = -r; dz <= r; ++dz)
          for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
              if (dx * dx + dy * dy + dz * dz > r * r) continue;
              const int x = i + dx, y = j + dy, z = k + dz;
              if (x < 0 || y < 0 || z < 0 || x >= dims[0] || y >= dims[1] || z >= dims[2]) continue;
              out[idx(x, y, z)] = 1;
            }
      }
  return out;
}

const std::array<int, 3> kDims{48, 44, 40};
const std::vector<Ellipsoid> kLungs{{15, 22, 20, 7, 10, 12}, {33, 22, 20, 7, 10, 12}};

LungMask box_mask(std::array<int, 3> dims, std::array<int, 3> lo, std::array<int, 3> hi) {
  LungMask m;
  m.dims = dims;
  m.occupancy.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0);
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i) m.occupancy[(static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i] = 1;
  return m;
}

}  // namespace

TEST_SUITE("roi") {

TEST_CASE("two lungs match the dilated analytic ellipsoids") {
  const Volume v = chest(kDims, kLungs);
  const LungMask m = lung_mask(v);
  CHECK(m.component_count == 2);
  REQUIRE(m.component_sizes.size() >= 2);
  const auto truth = dilated_truth(kDims, kLungs, 2);
  CHECK(dice(m.occupancy, truth) > 0.95);
  CHECK(m.occupancy == truth);
}

TEST_CASE("single lung keeps one component") {
  const std::vector<Ellipsoid> one{kLungs[0]};
  const LungMask m = lung_mask(chest(kDims, one));
  CHECK(m.component_count == 1);
  CHECK(dice(m.occupancy, dilated_truth(kDims, one, 2)) > 0.95);
}

TEST_CASE("small second component is dropped") {
  const std::vector<Ellipsoid> lungs{kLungs[0], {33, 22, 20, 2, 2, 2}};
  const LungMask m = lung_mask(chest(kDims, lungs));
  CHECK(m.component_count == 1);
  CHECK(m.occupancy == dilated_truth(kDims, {kLungs[0]}, 2));
}

TEST_CASE("no lung gives EmptyMask") {
  Volume zeros;
  zeros.dims = {8, 8, 8};
  zeros.affine = Affine::diagonal(-1, 1, 1);
  zeros.voxels.assign(512, 0.0f);
  CHECK_THROWS_AS(lung_mask(zeros), Error);
  try {
    lung_mask(zeros);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyMask);
  }
  // air touching the border is not lung either
  CHECK_THROWS_AS(lung_mask(chest(kDims, {})), Error);
}

TEST_CASE("component labelling") {
  const std::array<int, 3> dims{5, 1, 1};
  const std::vector<std::uint8_t> binary{1, 1, 0, 1, 0};
  std::vector<std::int32_t> labels;
  CHECK(label_components(binary, dims, labels) == 2);
  CHECK(labels == std::vector<std::int32_t>{1, 1, 0, 2, 0});
  // diagonal neighbours are not 6-connected
  const std::array<int, 3> sq{2, 2, 1};
  CHECK(label_components({1, 0, 0, 1}, sq, labels) == 2);
}

TEST_CASE("crop box arithmetic") {
  const LungMask m = box_mask({100, 100, 100}, {10, 10, 10}, {90, 90, 90});
  const CropBox box = roi_box(m, 0.10);
  CHECK(box.lo == std::array<int, 3>{2, 2, 2});
  CHECK(box.hi == std::array<int, 3>{98, 98, 98});
  CHECK(roi_box(m, 0.0) == CropBox{{10, 10, 10}, {90, 90, 90}});
  // padding clamps at the volume edge
  const CropBox wide = roi_box(m, 0.5);
  CHECK(wide.lo == std::array<int, 3>{0, 0, 0});
  CHECK(wide.hi == std::array<int, 3>{99, 99, 99});
  // floor of a fractional pad
  const LungMask odd = box_mask({50, 50, 50}, {20, 20, 20}, {34, 29, 20});
  const CropBox b = roi_box(odd, 0.1);
  CHECK(b.lo == std::array<int, 3>{19, 20, 20});
  CHECK(b.hi == std::array<int, 3>{35, 29, 20});
}

TEST_CASE("crop keeps voxel world positions") {
  const Volume v = ramp_volume({12, 10, 8}, Affine::diagonal(-0.7, 0.8, 2.5, {4, -6, 9}));
  const CropBox box{{2, 3, 1}, {9, 7, 6}};
  const Volume c = crop_to_box(v, box);
  CHECK(c.dims == std::array<int, 3>{8, 5, 6});
  for (int k = 0; k < c.dims[2]; ++k)
    for (int j = 0; j < c.dims[1]; ++j)
      for (int i = 0; i < c.dims[0]; ++i) {
        REQUIRE(c.at(i, j, k) == v.at(i + 2, j + 3, k + 1));
        const Vec3 a = c.affine.apply(i, j, k), b = v.affine.apply(i + 2, j + 3, k + 1);
        for (int d = 0; d < 3; ++d) REQUIRE(std::abs(a[d] - b[d]) < 1e-9);
      }
}

TEST_CASE("crop_roi contains the whole mask") {
  const Volume v = chest(kDims, kLungs);
  const LungMask m = lung_mask(v);
  const Volume roi = crop_roi(v, m, 0.1);
  const CropBox box = roi_box(m, 0.1);
  CHECK(roi.dims == box.size());
  for (int k = 0; k < kDims[2]; ++k)
    for (int j = 0; j < kDims[1]; ++j)
      for (int i = 0; i < kDims[0]; ++i) {
        if (!m.occupancy[v.index(i, j, k)]) continue;
        REQUIRE(i >= box.lo[0]);
        REQUIRE(i <= box.hi[0]);
        REQUIRE(j >= box.lo[1]);
        REQUIRE(j <= box.hi[1]);
        REQUIRE(k >= box.lo[2]);
        REQUIRE(k <= box.hi[2]);
      }
}

}  // TEST_SUITE
