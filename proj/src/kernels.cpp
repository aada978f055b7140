#include "ctqa/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#ifdef CTQA_HAVE_OPENMP
#include <omp.h>
#endif

#include "ctqa/error.hpp"

namespace ctqa::kernels {
namespace {

struct Offset {
  int di, dj, dk;
};

std::vector<Offset> ball_offsets(int radius) {
  std::vector<Offset> offsets;
  for (int dk = -radius; dk <= radius; ++dk) {
    for (int dj = -radius; dj <= radius; ++dj) {
      for (int di = -radius; di <= radius; ++di) {
        if (di * di + dj * dj + dk * dk <= radius * radius) offsets.push_back({di, dj, dk});
      }
    }
  }
  return offsets;
}

std::size_t voxel_count(Dims d) {
  return static_cast<std::size_t>(d[0]) * static_cast<std::size_t>(d[1]) * static_cast<std::size_t>(d[2]);
}

void check_sizes(std::size_t in, std::size_t out) {
  if (in != out) throw Error(ErrorCode::ShapeMismatch, "kernel input/output sizes differ");
}

// The ball as x-runs: for each (dj, dk) the offsets di span [-w, w].
struct Run {
  int dj, dk, w;
};

std::vector<Run> ball_runs(int radius) {
  std::vector<Run> runs;
  for (const auto& o : ball_offsets(radius)) {
    if (o.di != 0) continue;
    int w = 0;
    while ((w + 1) * (w + 1) + o.dj * o.dj + o.dk * o.dk <= radius * radius) ++w;
    runs.push_back({o.dj, o.dk, w});
  }
  return runs;
}

// Dilation of one z-plane: each output row ORs shifted copies of the source
// rows its runs reach. Cost does not depend on mask density.
void dilate_plane(const std::uint8_t* in, Dims d, const std::vector<Run>& runs, int k, std::uint8_t* out) {
  const int nx = d[0];
  const std::size_t plane = static_cast<std::size_t>(nx) * static_cast<std::size_t>(d[1]);
  for (int j = 0; j < d[1]; ++j) {
    std::uint8_t* dst = out + plane * static_cast<std::size_t>(k) + static_cast<std::size_t>(nx) * j;
    std::fill(dst, dst + nx, std::uint8_t{0});
    for (const auto& r : runs) {
      const int jj = j + r.dj, kk = k + r.dk;
      if (jj < 0 || kk < 0 || jj >= d[1] || kk >= d[2]) continue;
      const std::uint8_t* src = in + plane * static_cast<std::size_t>(kk) + static_cast<std::size_t>(nx) * jj;
      for (int di = -r.w; di <= r.w; ++di) {
        const int lo = std::max(0, -di), hi = std::min(nx, nx - di);
        for (int i = lo; i < hi; ++i) dst[i] |= src[i + di] != 0;
      }
    }
  }
}

struct PermutePlan {
  Dims out_dims{};
  std::array<std::ptrdiff_t, 3> in_stride{};  // input stride for a unit step along each output axis
  std::ptrdiff_t base = 0;                     // input index of output voxel (0,0,0)
};

PermutePlan plan_permute(Dims in_dims, const AxisMap& map) {
  const std::array<std::ptrdiff_t, 3> stride{1, in_dims[0], static_cast<std::ptrdiff_t>(in_dims[0]) * in_dims[1]};
  PermutePlan p;
  std::array<bool, 3> used{false, false, false};
  for (int a = 0; a < 3; ++a) {
    const int s = map.source[a];
    if (s < 0 || s > 2 || used[s]) throw Error(ErrorCode::InvalidArgument, "axis map is not a permutation");
    used[s] = true;
    p.out_dims[a] = in_dims[s];
    if (map.flip[a]) {
      p.in_stride[a] = -stride[s];
      p.base += stride[s] * (in_dims[s] - 1);
    } else {
      p.in_stride[a] = stride[s];
    }
  }
  return p;
}

void permute_plane(const float* in, const PermutePlan& p, int k, float* out) {
  const std::size_t nx = static_cast<std::size_t>(p.out_dims[0]);
  const std::size_t plane = nx * static_cast<std::size_t>(p.out_dims[1]);
  for (int j = 0; j < p.out_dims[1]; ++j) {
    std::ptrdiff_t src = p.base + p.in_stride[2] * k + p.in_stride[1] * j;
    float* dst = out + plane * static_cast<std::size_t>(k) + nx * static_cast<std::size_t>(j);
    for (int i = 0; i < p.out_dims[0]; ++i, src += p.in_stride[0]) dst[i] = in[src];
  }
}

}  // namespace

std::uint8_t window_value(double hu, double center, double width) {
  const double low = center - width / 2.0;
  const double scaled = (hu - low) / width * 255.0;
  const double rounded = std::floor(scaled + 0.5);
  return static_cast<std::uint8_t>(std::clamp(rounded, 0.0, 255.0));
}

int max_threads() {
#ifdef CTQA_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void threshold_below(std::span<const float> in, float threshold, std::span<std::uint8_t> out) {
  check_sizes(in.size(), out.size());
  const auto n = static_cast<std::ptrdiff_t>(in.size());
  const float* src = in.data();
  std::uint8_t* dst = out.data();
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t v = 0; v < n; ++v) dst[v] = src[v] < threshold ? 1 : 0;
}

void dilate_ball(std::span<const std::uint8_t> in, Dims dims, int radius, std::span<std::uint8_t> out) {
  check_sizes(in.size(), voxel_count(dims));
  check_sizes(in.size(), out.size());
  const auto runs = ball_runs(std::max(radius, 0));
#pragma omp parallel for schedule(static)
  for (int k = 0; k < dims[2]; ++k) dilate_plane(in.data(), dims, runs, k, out.data());
}

void permute_flip(std::span<const float> in, Dims in_dims, const AxisMap& map, std::span<float> out) {
  check_sizes(in.size(), voxel_count(in_dims));
  check_sizes(in.size(), out.size());
  const PermutePlan plan = plan_permute(in_dims, map);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < plan.out_dims[2]; ++k) permute_plane(in.data(), plan, k, out.data());
}

void window_to_u8(std::span<const float> in, double center, double width, std::span<std::uint8_t> out) {
  check_sizes(in.size(), out.size());
  const auto n = static_cast<std::ptrdiff_t>(in.size());
  const float* src = in.data();
  std::uint8_t* dst = out.data();
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t v = 0; v < n; ++v) dst[v] = window_value(src[v], center, width);
}

namespace reference {

void threshold_below(std::span<const float> in, float threshold, std::span<std::uint8_t> out) {
  check_sizes(in.size(), out.size());
  for (std::size_t v = 0; v < in.size(); ++v) out[v] = in[v] < threshold ? 1 : 0;
}

// Scatter formulation: every set voxel paints its ball.
void dilate_ball(std::span<const std::uint8_t> in, Dims dims, int radius, std::span<std::uint8_t> out) {
  check_sizes(in.size(), voxel_count(dims));
  check_sizes(in.size(), out.size());
  std::fill(out.begin(), out.end(), 0);
  const int r = std::max(radius, 0);
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        if (!in[static_cast<std::size_t>(i) + static_cast<std::size_t>(dims[0]) * (j + static_cast<std::size_t>(dims[1]) * k)]) continue;
        for (int dk = -r; dk <= r; ++dk) {
          for (int dj = -r; dj <= r; ++dj) {
            for (int di = -r; di <= r; ++di) {
              if (di * di + dj * dj + dk * dk > r * r) continue;
              const int ii = i + di, jj = j + dj, kk = k + dk;
              if (ii < 0 || jj < 0 || kk < 0 || ii >= dims[0] || jj >= dims[1] || kk >= dims[2]) continue;
              out[static_cast<std::size_t>(ii) + static_cast<std::size_t>(dims[0]) * (jj + static_cast<std::size_t>(dims[1]) * kk)] = 1;
            }
          }
        }
      }
    }
  }
}

// Gathers each output voxel by reconstructing its input coordinates.
void permute_flip(std::span<const float> in, Dims in_dims, const AxisMap& map, std::span<float> out) {
  check_sizes(in.size(), voxel_count(in_dims));
  check_sizes(in.size(), out.size());
  const PermutePlan plan = plan_permute(in_dims, map);
  const Dims od = plan.out_dims;
  for (int k = 0; k < od[2]; ++k) {
    for (int j = 0; j < od[1]; ++j) {
      for (int i = 0; i < od[0]; ++i) {
        const std::array<int, 3> o{i, j, k};
        std::array<int, 3> src{};
        for (int a = 0; a < 3; ++a) src[map.source[a]] = map.flip[a] ? od[a] - 1 - o[a] : o[a];
        out[static_cast<std::size_t>(i) + static_cast<std::size_t>(od[0]) * (j + static_cast<std::size_t>(od[1]) * k)] =
            in[static_cast<std::size_t>(src[0]) + static_cast<std::size_t>(in_dims[0]) * (src[1] + static_cast<std::size_t>(in_dims[1]) * src[2])];
      }
    }
  }
}

void window_to_u8(std::span<const float> in, double center, double width, std::span<std::uint8_t> out) {
  check_sizes(in.size(), out.size());
  for (std::size_t v = 0; v < in.size(); ++v) out[v] = window_value(in[v], center, width);
}

}  // namespace reference
}  // namespace ctqa::kernels
