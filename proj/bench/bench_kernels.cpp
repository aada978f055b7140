// Parallel kernels against their serial references on a 512x512x120 volume.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ctqa/kernels.hpp"

namespace k = ctqa::kernels;

namespace {

const k::Dims kDims{512, 512, 120};

std::size_t voxels() { return static_cast<std::size_t>(kDims[0]) * kDims[1] * kDims[2]; }

const std::vector<float>& volume() {
  static const std::vector<float> v = [] {
    std::vector<float> out(voxels());
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> hu(-1024.0f, 1500.0f);
    for (auto& x : out) x = hu(rng);
    return out;
  }();
  return v;
}

const std::vector<std::uint8_t>& sparse_mask() {
  static const std::vector<std::uint8_t> m = [] {
    std::vector<std::uint8_t> out(voxels());
    std::mt19937 rng(2);
    for (auto& x : out) x = rng() % 50 == 0;
    return out;
  }();
  return m;
}

template <auto Fn>
void threshold(benchmark::State& state) {
  std::vector<std::uint8_t> out(voxels());
  for (auto _ : state) {
    Fn(volume(), -600.0f, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * voxels() * sizeof(float)));
}

template <auto Fn>
void dilate(benchmark::State& state) {
  std::vector<std::uint8_t> out(voxels());
  for (auto _ : state) {
    Fn(sparse_mask(), kDims, 2, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * voxels()));
}

template <auto Fn>
void permute(benchmark::State& state) {
  std::vector<float> out(voxels());
  k::AxisMap map;
  map.source = {1, 0, 2};
  map.flip = {true, false, true};
  for (auto _ : state) {
    Fn(volume(), kDims, map, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * voxels() * sizeof(float)));
}

template <auto Fn>
void window(benchmark::State& state) {
  std::vector<std::uint8_t> out(voxels());
  for (auto _ : state) {
    Fn(volume(), -600.0, 1500.0, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * voxels() * sizeof(float)));
}

}  // namespace

BENCHMARK(threshold<k::reference::threshold_below>)->Name("threshold/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(threshold<k::threshold_below>)->Name("threshold/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(dilate<k::reference::dilate_ball>)->Name("dilate_r2/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(dilate<k::dilate_ball>)->Name("dilate_r2/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(permute<k::reference::permute_flip>)->Name("permute_flip/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(permute<k::permute_flip>)->Name("permute_flip/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(window<k::reference::window_to_u8>)->Name("window/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(window<k::window_to_u8>)->Name("window/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();

int main(int argc, char** argv) {
  // build the fixtures outside the timed loops
  volume();
  sparse_mask();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
