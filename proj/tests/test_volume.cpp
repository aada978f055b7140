#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>

#include "ctqa/error.hpp"
#include "ctqa/nifti.hpp"
#include "ctqa/orientation.hpp"
#include "ctqa/synth.hpp"
#include "ctqa/volume.hpp"
#include "support.hpp"

using namespace ctqa;
using namespace ctqa::testing;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

struct Assembled {
  SeriesManifest manifest;
  std::vector<PixelSlab> slabs;
};

Assembled decode_series(const synth::Series& s) {
  std::vector<SliceHeader> hs;
  std::vector<std::vector<std::uint8_t>> files;
  for (std::size_t i = 0; i < s.slices.size(); ++i) {
    files.push_back(synth::encode_slice(s, i));
    SliceHeader h = parse_slice(files.back());
    h.source_path = std::to_string(i);
    hs.push_back(h);
  }
  Assembled a;
  a.manifest = build_manifest(hs);
  for (const auto& h : a.manifest.slices) a.slabs.push_back(decode_pixels(h, files[std::stoul(h.source_path)]));
  return a;
}

Volume assemble(const synth::Series& s) {
  auto a = decode_series(s);
  return assemble_volume(a.manifest, a.slabs);
}

synth::Geometry small_geometry() {
  synth::Geometry g;
  g.rows = 24;
  g.cols = 20;
  g.slices = 12;
  g.row_spacing = 0.8;
  g.col_spacing = 0.7;
  g.slice_step = 2.5;
  g.center = {5.0, -12.0, 40.0};
  return g;
}

std::vector<float> sorted(std::vector<float> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_SUITE("volume") {

TEST_CASE("assembly geometry of a synth series") {
  const auto g = small_geometry();
  const auto s = synth::generate_series(g, synth::chest_phantom(g), 9);
  const Volume v = assemble(s);
  CHECK(v.dims == std::array<int, 3>{20, 24, 12});
  CHECK(std::abs(v.affine(0, 0)) == doctest::Approx(0.7));
  CHECK(std::abs(v.affine(1, 1)) == doctest::Approx(0.8));
  CHECK(std::abs(v.affine(2, 2)) == doctest::Approx(2.5));
  CHECK(check_orientation(v.affine).passed);
  const Volume ref = synth::reference_volume(s);
  CHECK(v.voxels == ref.voxels);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) CHECK(v.affine(r, c) == doctest::Approx(ref.affine(r, c)).epsilon(1e-9));
}

TEST_CASE("default 512 matrix assembly") {
  synth::Geometry g;
  g.rows = g.cols = 512;
  g.slices = 6;
  const auto s = synth::generate_series(g, synth::chest_phantom(g), 1);
  const Volume v = assemble(s);
  CHECK(v.dims == std::array<int, 3>{512, 512, 6});
  CHECK(std::abs(v.affine(0, 0)) == doctest::Approx(0.7));
  CHECK(std::abs(v.affine(2, 2)) == doctest::Approx(2.5));
}

TEST_CASE("descending instance order assembles identically") {
  auto g = small_geometry();
  const auto up = synth::generate_series(g, synth::chest_phantom(g), 4);
  g.descending_instances = true;
  const auto down = synth::generate_series(g, synth::chest_phantom(g), 4);
  const Volume a = assemble(up), b = assemble(down);
  CHECK(a.voxels == b.voxels);
  CHECK(a.affine == b.affine);
}

TEST_CASE("assembly errors") {
  const auto g = small_geometry();
  const auto s = synth::generate_series(g, synth::chest_phantom(g), 2);
  auto a = decode_series(s);
  auto spacing = a;
  spacing.manifest.slices[3].pixel_spacing = {0.8, 0.8};
  CHECK(code_of([&] { assemble_volume(spacing.manifest, spacing.slabs); }) == ErrorCode::InconsistentPixelSpacing);
  auto shape = a;
  shape.slabs[2].width -= 1;
  shape.slabs[2].values.resize(static_cast<std::size_t>(shape.slabs[2].width) * shape.slabs[2].height);
  CHECK(code_of([&] { assemble_volume(shape.manifest, shape.slabs); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("every in-plane layout reorients to the clean assembly") {
  auto g = small_geometry();
  const auto clean = synth::generate_series(g, synth::chest_phantom(g), 6);
  const Volume base = assemble(clean);
  for (auto layout : {synth::Layout::FlipX, synth::Layout::FlipY, synth::Layout::SwapXY}) {
    synth::DefectSpec spec;
    spec.kind = synth::DefectKind::NonstandardOrientation;
    spec.layout = layout;
    const auto turned = synth::inject_defect(clean, spec);
    const Volume raw = assemble(turned);
    const auto c6 = check_orientation(raw.affine);
    CHECK(c6.value == 0);
    CHECK_FALSE(c6.passed);
    const Volume fixed = reorient_to_standard(raw);
    CHECK(check_orientation(fixed.affine).passed);
    CHECK(fixed.dims == base.dims);
    CHECK(fixed.voxels == base.voxels);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) CHECK(fixed.affine(r, c) == doctest::Approx(base.affine(r, c)).epsilon(1e-9));
  }
}

TEST_CASE("C6 examples") {
  const auto standard = check_orientation(Affine::diagonal(-0.7, 0.7, 2.5));
  CHECK(standard.value == 1);
  CHECK(standard.passed);
  const auto flipped = check_orientation(Affine::diagonal(0.7, 0.7, 2.5));
  CHECK(flipped.value == 0);
  CHECK_FALSE(flipped.passed);
  CHECK(check_orientation(Affine{}).value == 0);

  Affine tilted = Affine::diagonal(-0.7, 0.7, 2.5);
  tilted(1, 2) = 0.3;  // gantry tilt
  const auto oblique = check_orientation(tilted);
  CHECK_FALSE(oblique.passed);
  CHECK(oblique.detail == "oblique");
  CHECK(code_of([&] { reorient_to_standard(ramp_volume({3, 3, 3}, tilted)); }) == ErrorCode::ObliqueAffine);

  Affine tiny = Affine::diagonal(-0.7, 0.7, 2.5);
  tiny(1, 0) = 0.7 * 5e-4;  // under the 1e-3 alignment tolerance
  CHECK(check_orientation(tiny).passed);
}

TEST_CASE("C7 examples") {
  QaThresholds t;
  CHECK(check_resolution(Affine::diagonal(-0.7, 0.7, 2.5), t).value == 0);
  const auto coarse = check_resolution(Affine::diagonal(-0.7, 0.7, 7.0), t);
  CHECK(coarse.value == 1);
  CHECK_FALSE(coarse.passed);
  CHECK(check_resolution(Affine::diagonal(-1.0, 1.0, 5.0), t).passed);

  // permuted affine: thresholds follow the world axis of each column
  Affine swapped;
  swapped.set_column(0, {0, 0, 7.0});
  swapped.set_column(1, {-0.7, 0, 0});
  swapped.set_column(2, {0, 0.7, 0});
  CHECK(check_resolution(swapped, t).value == 1);

  t.phi_min = std::array<double, 3>{0.5, 0.5, 1.0};
  CHECK(check_resolution(Affine::diagonal(-0.4, 0.7, 2.5), t).value == 1);
}

TEST_CASE("standard volume is returned bit-identical") {
  const Volume v = ramp_volume({4, 5, 6}, Affine::diagonal(-0.7, 0.8, 2.5, {1, 2, 3}));
  const Volume out = reorient_to_standard(v);
  CHECK(out.voxels == v.voxels);
  CHECK(out.affine == v.affine);
  CHECK(out.history == v.history);
}

TEST_CASE("all signed permutations preserve world positions and multiset") {
  const std::array<int, 3> dims{5, 4, 3};
  const Volume standard = ramp_volume(dims, Affine::diagonal(-0.7, 0.8, 2.5, {10, -20, 30}));
  const std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  int seen = 0;
  for (const auto& perm : perms) {
    for (int flips = 0; flips < 8; ++flips) {
      kernels::AxisMap map;
      map.source = perm;
      for (int a = 0; a < 3; ++a) map.flip[a] = (flips >> a) & 1;
      const Volume v = apply_axis_map(standard, map);
      const Volume out = reorient_to_standard(v);
      ++seen;
      CHECK(is_standard_orientation(out.affine));
      CHECK(sorted(out.voxels) == sorted(v.voxels));
      const Volume twice = reorient_to_standard(out);
      CHECK(twice.voxels == out.voxels);
      CHECK(twice.affine == out.affine);
      // each voxel keeps its world position
      for (int k = 0; k < v.dims[2]; ++k)
        for (int j = 0; j < v.dims[1]; ++j)
          for (int i = 0; i < v.dims[0]; ++i) {
            const Vec3 w = v.affine.apply(i, j, k);
            // locate the same value in the output via the inverse of the diagonal affine
            const Vec3 o = out.affine.origin();
            const int oi = static_cast<int>(std::lround((w[0] - o[0]) / out.affine(0, 0)));
            const int oj = static_cast<int>(std::lround((w[1] - o[1]) / out.affine(1, 1)));
            const int ok = static_cast<int>(std::lround((w[2] - o[2]) / out.affine(2, 2)));
            REQUIRE(out.at(oi, oj, ok) == v.at(i, j, k));
            const Vec3 back = out.affine.apply(oi, oj, ok);
            for (int a = 0; a < 3; ++a) REQUIRE(std::abs(back[a] - w[a]) <= 1e-5);
          }
    }
  }
  CHECK(seen == 48);
}

TEST_CASE("nifti round trip") {
  Volume v = ramp_volume({7, 5, 3}, Affine::diagonal(-0.7, 0.7, 2.5, {10.5, -20.25, 30}));
  v.affine(0, 1) = 0.0;
  CHECK(select_datatype(v.voxels) == 4);
  const auto bytes = write_nifti(v);
  std::int32_t sizeof_hdr = 0;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  CHECK(sizeof_hdr == 348);
  CHECK(std::memcmp(bytes.data() + 344, "n+1\0", 4) == 0);
  const Volume back = read_nifti(bytes);
  CHECK(back.dims == v.dims);
  CHECK(back.voxels == v.voxels);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK(std::abs(back.affine(r, c) - v.affine(r, c)) <= 1e-5);
  for (int a = 0; a < 3; ++a) {
    float pixdim = 0;
    std::memcpy(&pixdim, bytes.data() + 80 + 4 * a, 4);
    CHECK(std::abs(pixdim - v.affine.column_norm(a)) <= 1e-5);
  }

  v.voxels[3] = 0.5f;  // forces float32
  CHECK(select_datatype(v.voxels) == 16);
  const Volume f = read_nifti(write_nifti(v));
  CHECK(std::memcmp(f.voxels.data(), v.voxels.data(), v.voxels.size() * 4) == 0);

  v.voxels[3] = 40000.0f;  // out of int16 range
  CHECK(select_datatype(v.voxels) == 16);
}

TEST_CASE("nifti gzip round trip") {
  TempDir dir("nii");
  const Volume v = ramp_volume({6, 6, 4}, Affine::diagonal(-1, 1, 2));
  for (const char* name : {"a.nii", "a.nii.gz"}) {
    const std::string path = (dir / name).string();
    save_nifti(path, v);
    const Volume back = load_nifti(path);
    CHECK(back.voxels == v.voxels);
  }
  std::ifstream gz((dir / "a.nii.gz").string(), std::ios::binary);
  unsigned char magic[2] = {};
  gz.read(reinterpret_cast<char*>(magic), 2);
  CHECK(magic[0] == 0x1f);
  CHECK(magic[1] == 0x8b);
}

TEST_CASE("nifti zeros size and errors") {
  Volume zeros;
  zeros.dims = {2, 2, 2};
  zeros.voxels.assign(8, 0.0f);
  zeros.affine = Affine::diagonal(-1, 1, 1);
  const auto bytes = write_nifti(zeros);
  CHECK(bytes.size() == 352 + 8 * 2);
  std::int16_t datatype = 0;
  std::memcpy(&datatype, bytes.data() + 70, 2);
  CHECK(datatype == 4);

  auto detached = bytes;
  std::memcpy(detached.data() + 344, "ni1\0", 4);
  CHECK(code_of([&] { read_nifti(detached); }) == ErrorCode::BadMagic);
  auto weird = bytes;
  const std::int16_t complex64 = 32;
  std::memcpy(weird.data() + 70, &complex64, 2);
  CHECK(code_of([&] { read_nifti(weird); }) == ErrorCode::UnsupportedDatatype);
  auto short_data = bytes;
  short_data.resize(360);
  CHECK(code_of([&] { read_nifti(short_data); }) == ErrorCode::HeaderDimMismatch);
}

TEST_CASE("nifti golden file") {
  Volume v;
  v.dims = {2, 2, 2};
  for (int i = 0; i < 8; ++i) v.voxels.push_back(static_cast<float>(i));
  v.affine = Affine::diagonal(-0.7, 0.7, 2.5, {10, -20, 30});
  const auto bytes = write_nifti(v);
  const auto golden = read_file_bytes(std::string(CTQA_TEST_DATA) + "/golden_2x2x2.nii");
  CHECK(bytes == golden);
  const Volume back = read_nifti(golden);
  CHECK(back.voxels == v.voxels);
}

TEST_CASE("nifti reads foreign datatypes with scaling") {
  Volume v;
  v.dims = {2, 1, 1};
  v.voxels = {1, 2};
  v.affine = Affine::diagonal(-1, 1, 1);
  auto bytes = write_nifti(v);
  // rewrite as uint8 with slope 2, intercept -1
  const std::int16_t u8 = 2, bitpix = 8;
  std::memcpy(bytes.data() + 70, &u8, 2);
  std::memcpy(bytes.data() + 72, &bitpix, 2);
  const float slope = 2.0f, inter = -1.0f;
  std::memcpy(bytes.data() + 112, &slope, 4);
  std::memcpy(bytes.data() + 116, &inter, 4);
  bytes.resize(352 + 2);
  bytes[352] = 10;
  bytes[353] = 20;
  CHECK(read_nifti(bytes).voxels == std::vector<float>{19.0f, 39.0f});
}

}  // TEST_SUITE
