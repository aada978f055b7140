#pragma once

// Orientation (C6) and resolution (C7) checks on the voxel-to-world affine,
// and lossless reorientation to the standard (-,+,+) diagonal layout.

#include <array>
#include <optional>
#include <string>

#include "ctqa/kernels.hpp"
#include "ctqa/series_qa.hpp"
#include "ctqa/volume.hpp"

namespace ctqa {

/// Relative magnitude below which an affine entry counts as zero.
inline constexpr double kAxisAlignmentTolerance = 1e-3;

struct AxisAlignment {
  std::array<int, 3> world_axis{0, 1, 2};  // world axis each voxel axis steps along
  std::array<int, 3> sign{1, 1, 1};        // sign of that step
};

/// Nullopt when some voxel axis is not within tolerance of a world axis, or
/// two voxel axes share one world axis.
std::optional<AxisAlignment> axis_alignment(const Affine& affine);

/// Three-letter code of the world direction each voxel axis points to
/// (RAS+ world: "L"/"R", "P"/"A", "I"/"S"), e.g. "LAS" for the standard layout.
std::string orientation_code(const Affine& affine);

bool is_standard_orientation(const Affine& affine);

QaFinding check_orientation(const Affine& affine);
QaFinding check_resolution(const Affine& affine, const QaThresholds& thresholds);

/// Axis map taking `affine`'s voxel layout to the standard one. Throws ObliqueAffine.
kernels::AxisMap standardizing_map(const Affine& affine);

/// Permutes/flips voxel axes so check_orientation passes; world positions of
/// all voxels are preserved. Throws ObliqueAffine.
Volume reorient_to_standard(const Volume& volume);

/// Applies an arbitrary signed axis permutation, adjusting the affine so world
/// positions are preserved.
Volume apply_axis_map(const Volume& volume, const kernels::AxisMap& map);

}  // namespace ctqa
