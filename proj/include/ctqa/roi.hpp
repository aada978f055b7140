#pragma once

// Two-step lung ROI extraction: threshold-based lung mask, then a bounding-box
// crop with a fractional margin.

#include <array>
#include <cstdint>
#include <vector>

#include "ctqa/volume.hpp"

namespace ctqa {

struct LungMaskOptions {
  float hu_threshold = -600.0f;
  int dilation_radius = 2;  // voxels
  // A second component is kept as the other lung when it holds at least this
  // fraction of the largest component's voxels.
  double second_lung_ratio = 0.1;
};

struct LungMask {
  std::array<int, 3> dims{0, 0, 0};
  std::vector<std::uint8_t> occupancy;
  int component_count = 0;
  std::vector<std::size_t> component_sizes;  // before dilation, largest first

  std::size_t count() const;
};

/// 6-connected component labelling; label 0 is background, labels start at 1.
/// Returns the number of components.
int label_components(const std::vector<std::uint8_t>& binary, std::array<int, 3> dims, std::vector<std::int32_t>& labels);

/// Throws EmptyMask when no component survives border removal.
LungMask lung_mask(const Volume& volume, const LungMaskOptions& options = {});

struct CropBox {
  std::array<int, 3> lo{0, 0, 0};  // inclusive
  std::array<int, 3> hi{0, 0, 0};  // inclusive

  std::array<int, 3> size() const { return {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}; }
  bool operator==(const CropBox&) const = default;
};

/// Tight bounding box of the mask, each side pushed out by
/// floor(margin_fraction * (hi - lo)) and clamped to the volume.
CropBox roi_box(const LungMask& mask, double margin_fraction);

Volume crop_to_box(const Volume& volume, const CropBox& box);
Volume crop_roi(const Volume& volume, const LungMask& mask, double margin_fraction);

}  // namespace ctqa
