#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ctqa/error.hpp"
#include "ctqa/pipeline.hpp"
#include "ctqa/synth.hpp"
#include "support.hpp"

using namespace ctqa;
using namespace ctqa::testing;
namespace fs = std::filesystem;

namespace {

synth::Geometry small() {
  synth::Geometry g;
  g.rows = g.cols = 48;
  return g;
}

// clean_000, clean_001, nonstandard_orientation_000, drop_slices_000
std::vector<synth::CorpusEntry> small_corpus(const fs::path& root) {
  return synth::write_corpus(root.string(), 2, 1,
                             {synth::DefectKind::NonstandardOrientation, synth::DefectKind::DropSlices}, 21, small());
}

PipelineConfig config_for(const TempDir& dir) {
  PipelineConfig c;
  c.input_root = (dir / "in").string();
  c.output_root = (dir / "out").string();
  c.fixed_clock = "2026-01-01T00:00:00Z";
  return c;
}

const ScanRecord& scan(const QaReport& r, const std::string& id) {
  for (const auto& s : r.scans)
    if (s.scan_id == id) return s;
  FAIL("missing scan " << id);
  return r.scans.front();
}

void write_slices(const synth::Series& s, const fs::path& dir, const std::string& prefix) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < s.slices.size(); ++i) {
    const auto bytes = synth::encode_slice(s, i);
    std::ofstream((dir / (prefix + std::to_string(i) + ".dcm")).string(), std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config parsing") {
  const PipelineConfig c = parse_config(
      "# corpus\n"
      "input = /data/in\n"
      "output=/data/out  \n"
      "epsilon = 0.2\n"
      "delta = 60\n"
      "phi_z = 3.0\n"
      "c6 = off\n"
      "crop = no\n"
      "session_policy = all\n"
      "review_sample_size = 25\n"
      "review_seed = 7\n"
      "crop_margin = 0.15\n"
      "mask_threshold_hu = -500\n"
      "\n");
  CHECK(c.input_root == "/data/in");
  CHECK(c.output_root == "/data/out");
  CHECK(c.thresholds.epsilon.value == 0.2);
  CHECK(c.thresholds.delta == 60);
  CHECK(c.thresholds.phi[2] == 3.0);
  CHECK_FALSE(c.stages.c6);
  CHECK_FALSE(c.stages.crop);
  CHECK(c.stages.c7);
  CHECK(c.session_policy == SessionPolicy::All);
  CHECK(c.review_sample_size == 25);
  CHECK(c.review_seed == 7);
  CHECK(c.crop_margin == 0.15);
  CHECK(c.mask.hu_threshold == -500.0f);

  CHECK(parse_config(config_text(c)).thresholds.delta == 60);
  CHECK(config_text(parse_config(config_text(c))) == config_text(c));

  const auto code = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code("nonsense = 1\n") == ErrorCode::ConfigInvalid);
  CHECK(code("c1 = maybe\n") == ErrorCode::ConfigInvalid);
  CHECK(code("delta = many\n") == ErrorCode::ConfigInvalid);
  CHECK(code("just words\n") == ErrorCode::ConfigInvalid);
  CHECK(code("session_policy = newest\n") == ErrorCode::ConfigInvalid);
}

TEST_CASE("config validation") {
  PipelineConfig c;
  CHECK_THROWS_AS(c.validate(), Error);  // no input/output
  c.input_root = "a";
  c.output_root = "b";
  c.validate();
  c.thresholds.sigma1 = 500;
  c.thresholds.sigma2 = 400;
  CHECK_THROWS_AS(c.validate(), Error);
  c = PipelineConfig{};
  c.input_root = "a";
  c.output_root = "b";
  c.crop_margin = -0.1;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("processing fingerprint follows output-affecting settings") {
  PipelineConfig a;
  PipelineConfig b = a;
  b.review_seed = 99;
  b.workers = 3;
  CHECK(processing_fingerprint(a) == processing_fingerprint(b));
  b.crop_margin = 0.2;
  CHECK(processing_fingerprint(a) != processing_fingerprint(b));
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("discovery groups files by directory") {
  TempDir dir("disc");
  const auto g = small();
  const auto s = synth::generate_series(g, synth::chest_phantom(g), 1);
  write_slices(s, dir / "in" / "p1" / "study", "a");
  write_slices(s, dir / "in" / "p2", "");
  std::ofstream((dir / "in" / "p2" / ".hidden").string()) << "x";
  std::ofstream((dir / "in" / "p2" / "notes.txt").string()) << "x";
  const Discovery d = discover_scans((dir / "in").string(), SessionPolicy::LargestSliceCount);
  REQUIRE(d.scans.size() == 2);
  CHECK(d.scans[0].scan_id == "p1__study");
  CHECK(d.scans[1].scan_id == "p2");
  CHECK(d.scans[0].headers.size() == 100);
  CHECK(d.scans[1].errors.empty());
  CHECK(d.scans[0].content_digest != d.scans[1].content_digest);  // names are part of the digest
  CHECK(scan_id_for("a/b/c") == "a__b__c");
  CHECK_THROWS_AS(discover_scans((dir / "missing").string(), SessionPolicy::All), Error);
}

TEST_CASE("session policy with two series in one directory") {
  TempDir dir("sess");
  auto g = small();
  const auto big = synth::generate_series(g, synth::chest_phantom(g), 1);
  g.slices = 60;
  const auto localizer = synth::generate_series(g, synth::chest_phantom(g), 2);
  write_slices(big, dir / "in" / "s", "a");
  write_slices(localizer, dir / "in" / "s", "b");
  const Discovery largest = discover_scans((dir / "in").string(), SessionPolicy::LargestSliceCount);
  REQUIRE(largest.scans.size() == 1);
  CHECK(largest.scans[0].headers.size() == 100);
  CHECK(largest.skipped_by_session_policy == 1);
  const Discovery all = discover_scans((dir / "in").string(), SessionPolicy::All);
  REQUIRE(all.scans.size() == 2);
  CHECK(all.skipped_by_session_policy == 0);
  for (const auto& sc : all.scans) CHECK(sc.scan_id.rfind("s__", 0) == 0);
}

TEST_CASE("unparseable file marks the directory scan") {
  TempDir dir("bad");
  const auto entries = synth::write_corpus((dir / "in").string(), 0, 1, {synth::DefectKind::UnparseableBytes}, 3, small());
  PipelineConfig c = config_for(dir);
  const QaReport r = run_pipeline(c);
  REQUIRE(r.scans.size() == 1);
  const ScanRecord& s = r.scans[0];
  CHECK(r.unparseable == 1);
  CHECK(s.disposition == Disposition::Fail);
  REQUIRE_FALSE(s.errors.empty());
  CHECK(s.errors[0].rfind("unparseable: ", 0) == 0);
  for (const auto& f : s.findings) CHECK_FALSE(f.applicable);
  CHECK(s.findings.size() == 7);
}

TEST_CASE("end to end on a small corpus") {
  TempDir dir("e2e");
  small_corpus(dir / "in");
  PipelineConfig c = config_for(dir);
  c.review_sample_size = 1;
  c.review_seed = 3;
  const QaReport r = run_pipeline(c);
  REQUIRE(r.scans.size() == 4);
  const fs::path out = c.output_root;
  for (const char* f : {"report.json", "rates.csv", "scans.csv", "fov_hist.csv", "spacing_hist.csv", "config.txt",
                        "gallery/index.html"})
    CHECK(fs::exists(out / f));

  const ScanRecord& clean = scan(r, "clean_000");
  for (const char* k : {"nifti", "roi", "montage"}) CHECK(fs::exists(out / clean.outputs.at(k)));
  CHECK(clean.outputs.count("nifti_std") == 0);
  CHECK(clean.axial_fov_mm.has_value());
  CHECK(*clean.z_spacing_mm == doctest::Approx(2.5));

  const ScanRecord& turned = scan(r, "nonstandard_orientation_000");
  CHECK(turned.failed(CheckId::C6));
  REQUIRE(turned.auto_fixes.size() == 1);
  CHECK(turned.auto_fixes[0].rfind("C6: reoriented ", 0) == 0);
  CHECK(fs::exists(out / turned.outputs.at("nifti_std")));
  CHECK(turned.disposition == Disposition::Warn);

  const ScanRecord& dropped = scan(r, "drop_slices_000");
  CHECK(dropped.failed(CheckId::C1));
  CHECK_FALSE(dropped.finding(CheckId::C6)->applicable);
  CHECK_FALSE(dropped.finding(CheckId::C7)->applicable);
  CHECK(dropped.outputs.empty());
  CHECK(dropped.disposition == Disposition::Fail);

  int sampled = 0;
  for (const auto& s : r.scans) sampled += s.sampled_for_review;
  CHECK(sampled == 1);
  CHECK(r.total_failed == 2);
}

TEST_CASE("stage toggles") {
  TempDir dir("tog");
  small_corpus(dir / "in");
  PipelineConfig c = config_for(dir);
  c.stages.crop = false;
  c.stages.gallery = false;
  c.stages.reorient = false;
  c.stages.dicom.c1 = false;
  c.stages.assemble_on_failure = true;
  const QaReport r = run_pipeline(c);
  for (const auto& s : r.scans) {
    CHECK(s.outputs.count("roi") == 0);
    CHECK(s.outputs.count("montage") == 0);
    CHECK_FALSE(s.finding(CheckId::C1)->applicable);
  }
  CHECK(scan(r, "nonstandard_orientation_000").disposition == Disposition::Fail);
  CHECK(scan(r, "drop_slices_000").finding(CheckId::C6)->applicable);
  CHECK(scan(r, "drop_slices_000").outputs.count("nifti") == 1);
}

TEST_CASE("reruns are byte-identical and resume skips finished scans") {
  TempDir dir("res");
  small_corpus(dir / "in");
  PipelineConfig c = config_for(dir);
  c.workers = 1;
  run_pipeline(c);
  const fs::path out = c.output_root;
  const std::string first = read_text_file((out / "report.json").string());
  const auto stamp = fs::last_write_time(out / "scans" / "clean_000.json");

  run_pipeline(c);
  CHECK(read_text_file((out / "report.json").string()) == first);
  CHECK(fs::last_write_time(out / "scans" / "clean_000.json") == stamp);

  // a removed artefact forces that scan to be redone
  fs::remove(out / "gallery" / "clean_001.png");
  run_pipeline(c);
  CHECK(fs::exists(out / "gallery" / "clean_001.png"));
  CHECK(read_text_file((out / "report.json").string()) == first);

  // a different worker count and a fresh output directory give the same report
  PipelineConfig fresh = c;
  fresh.output_root = (dir / "out2").string();
  fresh.workers = 4;
  fresh.corpus_id = "in";
  run_pipeline(fresh);
  CHECK(read_text_file((dir / "out2" / "report.json").string()) == first);
  CHECK(read_text_file((dir / "out2" / "nifti" / "clean_000.nii.gz").string()) ==
        read_text_file((out / "nifti" / "clean_000.nii.gz").string()));
}

TEST_CASE("finalize merges the verdict log") {
  TempDir dir("fin");
  small_corpus(dir / "in");
  PipelineConfig c = config_for(dir);
  run_pipeline(c);
  append_verdict(c.output_root + "/verdicts.jsonl", {"clean_000", Verdict::Fail, "", "r", "2026-01-02T00:00:00Z"});
  const QaReport merged = current_report(c.output_root);
  CHECK(scan(merged, "clean_000").disposition == Disposition::Fail);
  const QaReport written = finalize_report(c.output_root, "2026-01-03T00:00:00Z");
  CHECK(written.generated_at == "2026-01-03T00:00:00Z");
  const auto j = nlohmann::json::parse(read_text_file(c.output_root + "/report.json"));
  CHECK(j.at("summary").at("dispositions").at("fail") == 2);
}

}  // TEST_SUITE
