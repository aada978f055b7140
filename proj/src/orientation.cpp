#include "ctqa/orientation.hpp"

#include <cmath>
#include <sstream>

#include "ctqa/error.hpp"

namespace ctqa {

std::optional<AxisAlignment> axis_alignment(const Affine& affine) {
  AxisAlignment out;
  std::array<bool, 3> taken{false, false, false};
  for (int j = 0; j < 3; ++j) {
    const double norm = affine.column_norm(j);
    if (!(norm > 0)) return std::nullopt;
    int dominant = 0;
    for (int i = 1; i < 3; ++i) {
      if (std::abs(affine(i, j)) > std::abs(affine(dominant, j))) dominant = i;
    }
    for (int i = 0; i < 3; ++i) {
      if (i != dominant && std::abs(affine(i, j)) >= kAxisAlignmentTolerance * norm) return std::nullopt;
    }
    if (taken[dominant]) return std::nullopt;
    taken[dominant] = true;
    out.world_axis[j] = dominant;
    out.sign[j] = affine(dominant, j) < 0 ? -1 : 1;
  }
  return out;
}

std::string orientation_code(const Affine& affine) {
  static constexpr char kPositive[] = {'R', 'A', 'S'};
  static constexpr char kNegative[] = {'L', 'P', 'I'};
  std::string code;
  for (int j = 0; j < 3; ++j) {
    int dominant = 0;
    for (int i = 1; i < 3; ++i) {
      if (std::abs(affine(i, j)) > std::abs(affine(dominant, j))) dominant = i;
    }
    code.push_back(affine(dominant, j) < 0 ? kNegative[dominant] : kPositive[dominant]);
  }
  return code;
}

bool is_standard_orientation(const Affine& affine) {
  const auto a = axis_alignment(affine);
  return a && a->world_axis == std::array<int, 3>{0, 1, 2} && a->sign == std::array<int, 3>{-1, 1, 1};
}

QaFinding check_orientation(const Affine& affine) {
  QaFinding f;
  f.check = CheckId::C6;
  const auto alignment = axis_alignment(affine);
  if (!alignment) {
    f.value = 0;
    f.passed = false;
    f.detail = "oblique";
    return f;
  }
  const bool standard = is_standard_orientation(affine);
  f.value = standard ? 1 : 0;
  f.passed = standard;
  std::ostringstream os;
  os << (standard ? "standard" : "nonstandard") << " orientation " << orientation_code(affine) << "; diag=("
     << affine(0, 0) << ", " << affine(1, 1) << ", " << affine(2, 2) << ")";
  f.detail = os.str();
  return f;
}

QaFinding check_resolution(const Affine& affine, const QaThresholds& thresholds) {
  QaFinding f;
  f.check = CheckId::C7;
  const auto alignment = axis_alignment(affine);
  std::ostringstream os;
  os << "voxel size (";
  for (int j = 0; j < 3; ++j) {
    const double size = affine.column_norm(j);
    const int axis = alignment ? alignment->world_axis[j] : j;
    const bool coarse = size > thresholds.phi[axis];
    const bool fine = thresholds.phi_min && size < (*thresholds.phi_min)[axis];
    if (coarse || fine) {
      ++f.value;
      f.indices.push_back(j);
    }
    os << (j ? ", " : "") << size;
  }
  os << ") mm vs phi (" << thresholds.phi[0] << ", " << thresholds.phi[1] << ", " << thresholds.phi[2] << ")";
  f.passed = f.value == 0;
  f.detail = os.str();
  return f;
}

kernels::AxisMap standardizing_map(const Affine& affine) {
  const auto alignment = axis_alignment(affine);
  if (!alignment) throw Error(ErrorCode::ObliqueAffine, "affine is not axis-aligned; refusing to resample");
  kernels::AxisMap map;
  for (int j = 0; j < 3; ++j) {
    const int out_axis = alignment->world_axis[j];
    const int wanted = out_axis == 0 ? -1 : 1;
    map.source[out_axis] = j;
    map.flip[out_axis] = alignment->sign[j] != wanted;
  }
  return map;
}

Volume apply_axis_map(const Volume& volume, const kernels::AxisMap& map) {
  volume.validate();
  Volume out;
  out.series_uid = volume.series_uid;
  out.history = volume.history;
  for (int a = 0; a < 3; ++a) out.dims[a] = volume.dims[map.source[a]];
  out.voxels.resize(volume.voxels.size());
  kernels::permute_flip(volume.voxels, volume.dims, map, out.voxels);

  Vec3 origin = volume.affine.origin();
  for (int a = 0; a < 3; ++a) {
    const int s = map.source[a];
    Vec3 col = volume.affine.column(s);
    if (map.flip[a]) {
      for (int i = 0; i < 3; ++i) {
        origin[i] += col[i] * (volume.dims[s] - 1);
        col[i] = -col[i];
      }
    }
    out.affine.set_column(a, col);
  }
  out.affine.set_column(3, origin);
  return out;
}

Volume reorient_to_standard(const Volume& volume) {
  const auto map = standardizing_map(volume.affine);
  const bool identity = map.source == std::array<int, 3>{0, 1, 2} && !map.flip[0] && !map.flip[1] && !map.flip[2];
  if (identity) return volume;
  const std::string from = orientation_code(volume.affine);
  Volume out = apply_axis_map(volume, map);
  out.history.push_back("reoriented " + from + " -> " + orientation_code(out.affine));
  return out;
}

}  // namespace ctqa
