#include <doctest.h>

#include <filesystem>

#include "ctqa/error.hpp"
#include "ctqa/orientation.hpp"
#include "ctqa/report.hpp"
#include "ctqa/synth.hpp"
#include "support.hpp"

using namespace ctqa;
using namespace ctqa::testing;
namespace fs = std::filesystem;

namespace {

synth::Geometry geometry(int n = 40) {
  synth::Geometry g;
  g.rows = g.cols = 48;
  g.slices = n;
  return g;
}

synth::Series clean(std::uint64_t seed = 5, int n = 100) {
  const auto g = geometry(n);
  return synth::generate_series(g, synth::chest_phantom(g), seed);
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("same seed gives identical files") {
  const auto a = clean(11), b = clean(11), c = clean(12);
  for (std::size_t i = 0; i < a.slices.size(); ++i) REQUIRE(synth::encode_slice(a, i) == synth::encode_slice(b, i));
  CHECK(a.series_uid == b.series_uid);
  CHECK(a.series_uid != c.series_uid);
  CHECK(synth::truth_json(a) == synth::truth_json(b));
}

TEST_CASE("encoded slices parse back to the generated geometry") {
  const auto s = clean();
  for (std::size_t i = 0; i < s.slices.size(); i += 7) {
    const SliceHeader h = parse_slice(synth::encode_slice(s, i));
    CHECK(h.instance_number == s.slices[i].instance_number);
    CHECK(h.series_uid == s.series_uid);
    CHECK(h.rows == 48);
    CHECK(h.columns == 48);
    for (int a = 0; a < 3; ++a) CHECK((*h.image_position)[a] == doctest::Approx(s.slices[i].position[a]).epsilon(1e-6));
  }
}

TEST_CASE("voxelised lung volume tracks the analytic volume") {
  synth::Geometry g;
  g.rows = g.cols = 160;
  g.slices = 60;
  const auto s = synth::generate_series(g, synth::chest_phantom(g), 3);
  const Volume ref = synth::reference_volume(s);
  std::size_t lung = 0;
  for (float v : ref.voxels) lung += v == static_cast<float>(s.phantom.lung_hu);
  const double voxel_mm3 = g.row_spacing * g.col_spacing * g.slice_step;
  const double analytic = s.phantom.lung_volume_mm3();
  CHECK(std::abs(lung * voxel_mm3 - analytic) / analytic < 0.02);
  CHECK(s.truth.lung_volume_voxel_mm3 == doctest::Approx(lung * voxel_mm3));
}

TEST_CASE("clean truth passes everything") {
  const auto s = clean();
  CHECK(s.truth.failing().empty());
  CHECK(s.truth.checks.at(CheckId::C1).value == 0);
  CHECK(s.truth.checks.at(CheckId::C6).value == 1);
  CHECK_FALSE(s.truth.unparseable);
}

TEST_CASE("explicit defects set the expected values") {
  const auto s = clean();
  synth::DefectSpec drop;
  drop.kind = synth::DefectKind::DropSlices;
  drop.count = 2;
  drop.indices = {5, 20};
  const auto d = synth::inject_defect(s, drop);
  CHECK(d.slices.size() == 98);
  CHECK(d.truth.checks.at(CheckId::C1).value == 2);
  CHECK(d.truth.checks.at(CheckId::C3).value == 2);
  CHECK(d.truth.failing() == std::set<CheckId>{CheckId::C1, CheckId::C3});

  synth::DefectSpec dup;
  dup.kind = synth::DefectKind::DuplicateChunk;
  dup.count = 3;
  dup.indices = {10};
  const auto u = synth::inject_defect(s, dup);
  CHECK(u.slices.size() == 103);
  CHECK(u.truth.checks.at(CheckId::C1).value == -3);
  CHECK(u.truth.checks.at(CheckId::C2).value == 3);
  CHECK(u.truth.checks.at(CheckId::C3).value == 6);

  synth::DefectSpec adjacent;
  adjacent.kind = synth::DefectKind::DropSlices;
  adjacent.count = 2;
  adjacent.indices = {5, 6};
  CHECK_THROWS_AS(synth::inject_defect(s, adjacent), Error);
}

TEST_CASE("sampled defects fail their target check") {
  const QaThresholds t;
  const std::map<synth::DefectKind, CheckId> target{
      {synth::DefectKind::DropSlices, CheckId::C1},      {synth::DefectKind::DuplicateChunk, CheckId::C2},
      {synth::DefectKind::Truncate, CheckId::C4},        {synth::DefectKind::WholeBodyLength, CheckId::C5},
      {synth::DefectKind::NonstandardOrientation, CheckId::C6}, {synth::DefectKind::CoarseResolution, CheckId::C7}};
  synth::Geometry g = geometry(100);
  const auto base = synth::generate_series(g, synth::chest_phantom(g), 1);
  for (const auto& [kind, check] : target) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto spec = synth::DefectSpec::sample(kind, g, t, seed);
      const auto s = synth::inject_defect(base, spec, t);
      INFO(to_string(kind), " seed ", seed);
      CHECK(s.truth.failing().count(check) == 1);
      CHECK_FALSE(s.truth.entailments.empty());
    }
  }
}

TEST_CASE("orientation defects reorient to the clean reference") {
  const auto s = clean(8);
  const Volume ref = synth::reference_volume(s);
  for (auto layout : {synth::Layout::FlipX, synth::Layout::FlipY, synth::Layout::SwapXY}) {
    synth::DefectSpec spec;
    spec.kind = synth::DefectKind::NonstandardOrientation;
    spec.layout = layout;
    const auto turned = synth::inject_defect(s, spec);
    CHECK(turned.truth.expect_reorientation);
    CHECK(synth::reference_volume(turned).voxels == ref.voxels);
  }
}

TEST_CASE("corpus layout on disk") {
  TempDir dir("corpus");
  const auto entries = synth::write_corpus(dir.str(), 2, 1, {synth::DefectKind::DropSlices, synth::DefectKind::UnparseableBytes},
                                           4, geometry(30));
  REQUIRE(entries.size() == 4);
  CHECK(entries[0].name == "clean_000");
  CHECK(entries[2].name == "drop_slices_000");
  for (const auto& e : entries) {
    CHECK(fs::is_directory(e.directory));
    CHECK(fs::exists(e.directory + ".truth.json"));
  }
  CHECK(entries[3].truth.unparseable);
  const auto again = synth::write_corpus((dir / "b").string(), 2, 1,
                                         {synth::DefectKind::DropSlices, synth::DefectKind::UnparseableBytes}, 4, geometry(30));
  for (std::size_t i = 0; i < entries.size(); ++i)
    CHECK(read_text_file(entries[i].directory + ".truth.json") == read_text_file(again[i].directory + ".truth.json"));
}

TEST_CASE("invalid geometry") {
  synth::Geometry g = geometry();
  g.slices = 0;
  CHECK_THROWS_AS(g.validate(), Error);
  g = geometry();
  g.slice_step = -1;
  CHECK_THROWS_AS(g.validate(), Error);
}

}  // TEST_SUITE
