#include <doctest.h>

#include <httplib.h>

#include <filesystem>
#include <thread>

#include "ctqa/pipeline.hpp"
#include "ctqa/review_service.hpp"
#include "ctqa/synth.hpp"
#include "support.hpp"

using namespace ctqa;
using namespace ctqa::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Output directory of a four-scan run with three scans sampled for review.
struct RunFixture {
  TempDir dir{"svc"};
  std::string out;

  RunFixture() {
    synth::Geometry g;
    g.rows = g.cols = 48;
    synth::write_corpus((dir / "in").string(), 3, 1, {synth::DefectKind::DropSlices}, 5, g);
    PipelineConfig c;
    c.input_root = (dir / "in").string();
    c.output_root = out = (dir / "out").string();
    c.fixed_clock = "2026-01-01T00:00:00Z";
    c.review_sample_size = 3;
    run_pipeline(c);
  }
};

// Serves on an ephemeral port for the lifetime of the object.
struct Live {
  ReviewService service;
  int port = -1;
  std::thread thread;

  explicit Live(ReviewServiceOptions options) : service(std::move(options)) {
    port = service.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    thread = std::thread([this] { service.listen(); });
  }
  ~Live() {
    service.stop();
    thread.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

ReviewServiceOptions options(const std::string& root, bool blind = false) {
  return {root, blind, 50, [] { return std::string("2026-02-01T00:00:00Z"); }};
}

std::size_t line_count(const std::string& path) {
  const std::string text = read_text_file(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("verdicts over HTTP update dispositions and the log") {
  RunFixture run;
  Live live(options(run.out));
  auto cli = live.client();

  auto listing = cli.Get("/api/scans");
  REQUIRE(listing);
  CHECK(listing->status == 200);
  const json scans = json::parse(listing->body);
  CHECK(scans.at("total") == 4);
  std::vector<std::string> sampled;
  for (const auto& s : scans.at("scans")) {
    if (s.at("sampled_for_review")) {
      sampled.push_back(s.at("scan_id"));
      CHECK(s.contains("badges"));
    }
  }
  REQUIRE(sampled.size() == 3);

  const char* verdicts[3] = {"pass", "fail", "flag"};
  for (int i = 0; i < 3; ++i) {
    const json body = {{"scan_id", sampled[i]}, {"verdict", verdicts[i]}, {"reviewer", "r1"}, {"note", "n"}};
    auto res = cli.Post("/api/verdicts", body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 201);
    CHECK(json::parse(res->body).at("timestamp") == "2026-02-01T00:00:00Z");
  }
  CHECK(line_count(run.out + "/verdicts.jsonl") == 3);

  const json report = json::parse(cli.Get("/api/report")->body);
  std::map<std::string, std::string> disposition;
  for (const auto& s : report.at("scans")) disposition[s.at("scan_id")] = s.at("disposition");
  CHECK(disposition.at(sampled[1]) == "fail");
  // objective failures outrank a pass or a flag
  const auto objective = [](const std::string& id) { return id.rfind("drop", 0) == 0; };
  CHECK(disposition.at(sampled[0]) == (objective(sampled[0]) ? "fail" : "pass"));
  CHECK(disposition.at(sampled[2]) == (objective(sampled[2]) ? "fail" : "warn"));
  CHECK(report.at("summary").at("dispositions").value("needs-review", 0) == 0);

  const json unreviewed = json::parse(cli.Get("/api/scans?filter=unreviewed")->body);
  CHECK(unreviewed.at("total") == 1);
  const json failed = json::parse(cli.Get("/api/scans?filter=objective-failed")->body);
  CHECK(failed.at("total") == 1);
  CHECK(failed.at("scans")[0].at("scan_id") == "drop_slices_000");

  auto fin = cli.Post("/api/finalize", "", "application/json");
  REQUIRE(fin);
  CHECK(fin->status == 200);
  const json written = json::parse(read_text_file(run.out + "/report.json"));
  for (const auto& s : written.at("scans"))
    CHECK(s.at("disposition") == disposition.at(s.at("scan_id").get<std::string>()));
}

TEST_CASE("error statuses") {
  RunFixture run;
  Live live(options(run.out));
  auto cli = live.client();
  CHECK(cli.Post("/api/verdicts", "{not json", "application/json")->status == 400);
  CHECK(cli.Post("/api/verdicts", R"({"scan_id":"clean_000","verdict":"maybe"})", "application/json")->status == 400);
  CHECK(cli.Post("/api/verdicts", R"({"scan_id":"nobody","verdict":"pass"})", "application/json")->status == 404);
  CHECK(cli.Get("/api/scans?filter=odd")->status == 400);
  CHECK(cli.Get("/api/scans?page=-1")->status == 400);
  CHECK(cli.Get("/montages/nobody.png")->status == 404);
  CHECK(!fs::exists(run.out + "/verdicts.jsonl"));
  {
    auto lock = live.service.write_lock();
    CHECK(cli.Post("/api/finalize", "", "application/json")->status == 409);
  }
  CHECK(cli.Post("/api/finalize", "", "application/json")->status == 200);
}

TEST_CASE("montages, paging and gallery") {
  RunFixture run;
  Live live(options(run.out));
  auto cli = live.client();
  auto png = cli.Get("/montages/clean_000.png");
  REQUIRE(png);
  CHECK(png->status == 200);
  CHECK(png->get_header_value("Content-Type") == "image/png");
  CHECK(png->body == read_text_file(run.out + "/gallery/clean_000.png"));
  const json page = json::parse(cli.Get("/api/scans?page=1&page_size=3")->body);
  CHECK(page.at("total") == 4);
  CHECK(page.at("scans").size() == 1);
  CHECK(page.at("scans")[0].at("scan_id") == "drop_slices_000");
  CHECK(page.at("scans")[0].at("montage_url").is_null());
  auto index = cli.Get("/gallery/index.html");
  REQUIRE(index);
  CHECK(index->status == 200);
  CHECK(index->body.find("clean_000") != std::string::npos);
  CHECK(cli.Get("/")->status == 302);
}

TEST_CASE("blind mode hides objective results") {
  RunFixture run;
  Live live(options(run.out, true));
  const json scans = json::parse(live.client().Get("/api/scans")->body);
  CHECK(scans.at("blind") == true);
  for (const auto& s : scans.at("scans")) {
    CHECK_FALSE(s.contains("badges"));
    CHECK_FALSE(s.contains("errors"));
  }
}

TEST_CASE("handlers without a socket") {
  RunFixture run;
  ReviewService service(options(run.out));
  CHECK(service.list_scans(0, 2, "all").second.at("scans").size() == 2);
  CHECK(service.post_verdict(R"({"scan_id":"clean_001","verdict":"pass","timestamp":""})").first == 201);
  CHECK(read_verdict_log(run.out + "/verdicts.jsonl").at(0).timestamp == "2026-02-01T00:00:00Z");
  CHECK_THROWS(ReviewService(options(run.out + "/missing")));
}

}  // TEST_SUITE
