#include "ctqa/review_service.hpp"

#include <httplib.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "ctqa/error.hpp"
#include "ctqa/pipeline.hpp"
#include "ctqa/report.hpp"

namespace ctqa {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json error_body(const std::string& message) { return {{"error", message}}; }

std::string badge(const ScanRecord& r, const QaFinding& f) {
  if (!f.applicable) return "n-a";
  if (f.passed) return "pass";
  const auto prefix = std::string(to_string(f.check)) + ":";
  for (const auto& fix : r.auto_fixes) {
    if (fix.rfind(prefix, 0) == 0) return "warn";
  }
  return "fail";
}

bool objective_failed(const ScanRecord& r) {
  if (!r.errors.empty()) return true;
  for (const auto& f : r.findings) {
    if (badge(r, f) == "fail") return true;
  }
  return false;
}

void reply(httplib::Response& res, const std::pair<int, json>& out) {
  res.status = out.first;
  res.set_content(out.second.dump(), "application/json");
}

}  // namespace

ReviewService::ReviewService(ReviewServiceOptions options)
    : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  if (!options_.clock) options_.clock = utc_now_iso8601;
  if (!fs::exists(fs::path(options_.output_root) / "report.json")) {
    throw Error(ErrorCode::IoFailure, "no report.json in " + options_.output_root);
  }
  install_routes();
}

ReviewService::~ReviewService() { stop(); }

bool ReviewService::known_scan(const std::string& scan_id) const {
  const auto report = current_report(options_.output_root);
  return std::any_of(report.scans.begin(), report.scans.end(),
                     [&](const ScanRecord& r) { return r.scan_id == scan_id; });
}

std::unique_lock<std::mutex> ReviewService::write_lock() { return std::unique_lock<std::mutex>(write_mutex_); }

std::pair<int, json> ReviewService::list_scans(int page, int page_size, const std::string& filter) const {
  if (page < 0 || page_size < 1 || page_size > 1000) return {400, error_body("bad paging parameters")};
  if (filter != "all" && filter != "unreviewed" && filter != "objective-failed") {
    return {400, error_body("filter must be all, unreviewed or objective-failed")};
  }
  const QaReport report = current_report(options_.output_root);
  json items = json::array();
  std::size_t total = 0;
  const std::size_t first = static_cast<std::size_t>(page) * page_size;
  for (const auto& r : report.scans) {
    if (filter == "unreviewed" && r.verdict) continue;
    if (filter == "objective-failed" && !objective_failed(r)) continue;
    const std::size_t position = total++;
    if (position < first || position >= first + static_cast<std::size_t>(page_size)) continue;
    json item = {{"scan_id", r.scan_id},
                 {"disposition", std::string(to_string(r.disposition))},
                 {"sampled_for_review", r.sampled_for_review}};
    item["montage_url"] = r.outputs.count("montage") ? json("/montages/" + r.scan_id + ".png") : json(nullptr);
    item["verdict"] = r.verdict ? to_json(*r.verdict) : json(nullptr);
    if (!options_.blind) {
      json badges = json::object();
      for (const auto& f : r.findings) badges[std::string(to_string(f.check))] = badge(r, f);
      item["badges"] = badges;
      item["errors"] = r.errors;
      item["warnings"] = r.warnings;
    }
    items.push_back(std::move(item));
  }
  return {200, {{"page", page}, {"page_size", page_size}, {"total", total}, {"blind", options_.blind},
                {"filter", filter}, {"scans", items}}};
}

std::pair<int, json> ReviewService::post_verdict(const std::string& body) {
  ReviewVerdict verdict;
  try {
    json j = json::parse(body);
    if (j.is_object() && (!j.contains("timestamp") || j["timestamp"].is_null() ||
                          (j["timestamp"].is_string() && j["timestamp"].get<std::string>().empty()))) {
      j["timestamp"] = options_.clock();
    }
    verdict = verdict_from_json(j);
  } catch (const json::exception& e) {
    return {400, error_body(std::string("malformed JSON: ") + e.what())};
  } catch (const Error& e) {
    return {400, error_body(e.what())};
  }
  if (!known_scan(verdict.scan_id)) return {404, error_body("unknown scan " + verdict.scan_id)};
  auto lock = write_lock();
  try {
    append_verdict((fs::path(options_.output_root) / "verdicts.jsonl").string(), verdict);
  } catch (const Error& e) {
    return {500, error_body(e.what())};
  }
  return {201, to_json(verdict)};
}

std::pair<int, json> ReviewService::report() const {
  try {
    return {200, to_json(current_report(options_.output_root))};
  } catch (const std::exception& e) {
    return {500, error_body(e.what())};
  }
}

std::pair<int, json> ReviewService::finalize() {
  std::unique_lock<std::mutex> lock(write_mutex_, std::try_to_lock);
  if (!lock.owns_lock()) return {409, error_body("a write is in flight")};
  try {
    return {200, to_json(finalize_report(options_.output_root))};
  } catch (const std::exception& e) {
    return {500, error_body(e.what())};
  }
}

void ReviewService::install_routes() {
  auto& s = *server_;
  s.Get("/api/scans", [this](const httplib::Request& req, httplib::Response& res) {
    auto param = [&](const char* key, int fallback) {
      if (!req.has_param(key)) return fallback;
      try {
        return std::stoi(req.get_param_value(key));
      } catch (const std::exception&) {
        return -1;
      }
    };
    const std::string filter = req.has_param("filter") ? req.get_param_value("filter") : "all";
    reply(res, list_scans(param("page", 0), param("page_size", options_.default_page_size), filter));
  });
  s.Get(R"(/montages/(.+)\.png)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const fs::path path = fs::path(options_.output_root) / "gallery" / (id + ".png");
    if (id.find('/') != std::string::npos || id.find("..") != std::string::npos || !fs::exists(path)) {
      reply(res, {404, error_body("unknown montage " + id)});
      return;
    }
    res.set_content(read_text_file(path.string()), "image/png");
  });
  s.Post("/api/verdicts", [this](const httplib::Request& req, httplib::Response& res) {
    reply(res, post_verdict(req.body));
  });
  s.Get("/api/report", [this](const httplib::Request&, httplib::Response& res) { reply(res, report()); });
  s.Post("/api/finalize", [this](const httplib::Request&, httplib::Response& res) { reply(res, finalize()); });
  s.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_redirect("/gallery/index.html"); });
  s.set_mount_point("/gallery", (fs::path(options_.output_root) / "gallery").string());
}

int ReviewService::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool ReviewService::listen() { return server_->listen_after_bind(); }

void ReviewService::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

}  // namespace ctqa
