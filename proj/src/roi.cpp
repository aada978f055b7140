#include "ctqa/roi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctqa/error.hpp"
#include "ctqa/kernels.hpp"

namespace ctqa {

std::size_t LungMask::count() const {
  return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), std::uint8_t{1}));
}

int label_components(const std::vector<std::uint8_t>& binary, std::array<int, 3> dims,
                     std::vector<std::int32_t>& labels) {
  const std::size_t nx = dims[0], ny = dims[1], nz = dims[2];
  labels.assign(binary.size(), 0);
  std::vector<std::size_t> stack;
  std::int32_t next = 0;
  for (std::size_t seed = 0; seed < binary.size(); ++seed) {
    if (!binary[seed] || labels[seed]) continue;
    ++next;
    labels[seed] = next;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      const std::size_t i = v % nx, j = (v / nx) % ny, k = v / (nx * ny);
      auto visit = [&](std::size_t w) {
        if (binary[w] && !labels[w]) {
          labels[w] = next;
          stack.push_back(w);
        }
      };
      if (i > 0) visit(v - 1);
      if (i + 1 < nx) visit(v + 1);
      if (j > 0) visit(v - nx);
      if (j + 1 < ny) visit(v + nx);
      if (k > 0) visit(v - nx * ny);
      if (k + 1 < nz) visit(v + nx * ny);
    }
  }
  return next;
}

LungMask lung_mask(const Volume& volume, const LungMaskOptions& options) {
  volume.validate();
  const auto dims = volume.dims;
  std::vector<std::uint8_t> binary(volume.voxel_count());
  kernels::threshold_below(volume.voxels, options.hu_threshold, binary);

  std::vector<std::int32_t> labels;
  const int n = label_components(binary, dims, labels);

  std::vector<std::size_t> sizes(static_cast<std::size_t>(n) + 1, 0);
  std::vector<bool> touches_border(static_cast<std::size_t>(n) + 1, false);
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        const auto label = labels[volume.index(i, j, k)];
        if (!label) continue;
        ++sizes[label];
        if (i == 0 || j == 0 || k == 0 || i == dims[0] - 1 || j == dims[1] - 1 || k == dims[2] - 1) {
          touches_border[label] = true;
        }
      }
    }
  }

  std::vector<std::int32_t> interior;
  for (std::int32_t l = 1; l <= n; ++l) {
    if (!touches_border[l]) interior.push_back(l);
  }
  if (interior.empty()) throw Error(ErrorCode::EmptyMask, "no interior low-density component (incomplete lung coverage?)");
  std::stable_sort(interior.begin(), interior.end(), [&](std::int32_t a, std::int32_t b) { return sizes[a] > sizes[b]; });

  std::vector<std::int32_t> keep{interior[0]};
  if (interior.size() > 1 && static_cast<double>(sizes[interior[1]]) >= options.second_lung_ratio * sizes[interior[0]]) {
    keep.push_back(interior[1]);
  }

  LungMask mask;
  mask.dims = dims;
  mask.component_count = static_cast<int>(keep.size());
  for (auto l : keep) mask.component_sizes.push_back(sizes[l]);
  std::vector<std::uint8_t> selected(binary.size(), 0);
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] && std::find(keep.begin(), keep.end(), labels[v]) != keep.end()) selected[v] = 1;
  }
  mask.occupancy.resize(selected.size());
  kernels::dilate_ball(selected, dims, options.dilation_radius, mask.occupancy);
  return mask;
}

CropBox roi_box(const LungMask& mask, double margin_fraction) {
  if (!(margin_fraction >= 0.0 && margin_fraction <= 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "margin fraction must lie in [0, 0.5]");
  }
  CropBox box{{mask.dims[0], mask.dims[1], mask.dims[2]}, {-1, -1, -1}};
  for (int k = 0; k < mask.dims[2]; ++k) {
    for (int j = 0; j < mask.dims[1]; ++j) {
      for (int i = 0; i < mask.dims[0]; ++i) {
        const std::size_t v = static_cast<std::size_t>(i) + static_cast<std::size_t>(mask.dims[0]) *
                                                                (j + static_cast<std::size_t>(mask.dims[1]) * k);
        if (!mask.occupancy[v]) continue;
        const int idx[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          box.lo[a] = std::min(box.lo[a], idx[a]);
          box.hi[a] = std::max(box.hi[a], idx[a]);
        }
      }
    }
  }
  if (box.hi[0] < 0) throw Error(ErrorCode::EmptyMask, "mask has no voxels");
  for (int a = 0; a < 3; ++a) {
    const int extent = box.hi[a] - box.lo[a];
    const int pad = static_cast<int>(std::floor(margin_fraction * extent + 1e-9));
    box.lo[a] = std::max(0, box.lo[a] - pad);
    box.hi[a] = std::min(mask.dims[a] - 1, box.hi[a] + pad);
  }
  return box;
}

Volume crop_to_box(const Volume& volume, const CropBox& box) {
  volume.validate();
  for (int a = 0; a < 3; ++a) {
    if (box.lo[a] < 0 || box.hi[a] >= volume.dims[a] || box.lo[a] > box.hi[a]) {
      throw Error(ErrorCode::InvalidArgument, "crop box outside volume");
    }
  }
  Volume out;
  out.series_uid = volume.series_uid;
  out.history = volume.history;
  out.dims = box.size();
  out.voxels.resize(out.voxel_count());
  for (int k = 0; k < out.dims[2]; ++k) {
    for (int j = 0; j < out.dims[1]; ++j) {
      const auto src = volume.voxels.begin() + static_cast<std::ptrdiff_t>(volume.index(box.lo[0], box.lo[1] + j, box.lo[2] + k));
      std::copy_n(src, out.dims[0], out.voxels.begin() + static_cast<std::ptrdiff_t>(out.index(0, j, k)));
    }
  }
  out.affine = volume.affine;
  out.affine.set_column(3, volume.affine.apply(box.lo[0], box.lo[1], box.lo[2]));
  return out;
}

Volume crop_roi(const Volume& volume, const LungMask& mask, double margin_fraction) {
  if (mask.dims != volume.dims) throw Error(ErrorCode::ShapeMismatch, "mask dims differ from volume dims");
  const CropBox box = roi_box(mask, margin_fraction);
  Volume out = crop_to_box(volume, box);
  out.history.push_back("cropped to lung ROI [" + std::to_string(box.lo[0]) + ".." + std::to_string(box.hi[0]) + "]x[" +
                        std::to_string(box.lo[1]) + ".." + std::to_string(box.hi[1]) + "]x[" +
                        std::to_string(box.lo[2]) + ".." + std::to_string(box.hi[2]) + "]");
  return out;
}

}  // namespace ctqa
