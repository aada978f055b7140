#pragma once

// NIfTI-1 single-file (.nii / .nii.gz) reader and writer.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctqa/volume.hpp"

namespace ctqa {

inline constexpr std::int16_t kNiftiInt16 = 4;
inline constexpr std::int16_t kNiftiFloat32 = 16;
inline constexpr int kNiftiHeaderSize = 348;
inline constexpr int kNiftiVoxOffset = 352;

/// int16 when every voxel is an integer in [-32768, 32767], float32 otherwise.
std::int16_t select_datatype(std::span<const float> voxels);

std::vector<std::uint8_t> write_nifti(const Volume& volume);
Volume read_nifti(std::span<const std::uint8_t> bytes);

/// Writes `volume` to `path`; a ".gz" suffix selects gzip compression.
void save_nifti(const std::string& path, const Volume& volume);
Volume load_nifti(const std::string& path);

}  // namespace ctqa
