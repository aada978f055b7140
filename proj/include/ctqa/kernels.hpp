#pragma once

// Data-parallel voxel kernels. The functions in ctqa::kernels use OpenMP when
// it is available; ctqa::kernels::reference holds plain serial versions with
// identical results, kept for testing and benchmarking.

#include <array>
#include <cstdint>
#include <span>

namespace ctqa::kernels {

using Dims = std::array<int, 3>;

/// Output axis a reads input axis source[a], reversed when flip[a].
struct AxisMap {
  std::array<int, 3> source{0, 1, 2};
  std::array<bool, 3> flip{false, false, false};
};

/// out[v] = in[v] < threshold.
void threshold_below(std::span<const float> in, float threshold, std::span<std::uint8_t> out);

/// Binary dilation with the voxel-unit ball {d : |d|^2 <= radius^2}.
void dilate_ball(std::span<const std::uint8_t> in, Dims dims, int radius, std::span<std::uint8_t> out);

/// Copies `in` (dims `in_dims`) into `out` with axes permuted/flipped per `map`.
void permute_flip(std::span<const float> in, Dims in_dims, const AxisMap& map, std::span<float> out);

/// Linear window mapping to 8 bits, rounding half up, clamped to [0, 255].
void window_to_u8(std::span<const float> in, double center, double width, std::span<std::uint8_t> out);

std::uint8_t window_value(double hu, double center, double width);

/// Number of worker threads the parallel kernels will use.
int max_threads();

namespace reference {

void threshold_below(std::span<const float> in, float threshold, std::span<std::uint8_t> out);
void dilate_ball(std::span<const std::uint8_t> in, Dims dims, int radius, std::span<std::uint8_t> out);
void permute_flip(std::span<const float> in, Dims in_dims, const AxisMap& map, std::span<float> out);
void window_to_u8(std::span<const float> in, double center, double width, std::span<std::uint8_t> out);

}  // namespace reference
}  // namespace ctqa::kernels
