#include "ctqa/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ctqa/error.hpp"

namespace ctqa {
namespace {

using nlohmann::json;

struct CheckInfo {
  CheckId id;
  const char* section;
  const char* name;
};

constexpr CheckInfo kRateRows[] = {
    {CheckId::C1, "Objective QA (DICOM)", "Instance Number Check (missing)"},
    {CheckId::C2, "Objective QA (DICOM)", "Instance Number Check (duplicated)"},
    {CheckId::C3, "Objective QA (DICOM)", "Slice Distance Check"},
    {CheckId::C4, "Objective QA (DICOM)", "Filtering Few-slice Scan"},
    {CheckId::C5, "Objective QA (DICOM)", "Physical Length Filtering"},
    {CheckId::C6, "Objective QA (NIfTI)", "Orientation Check"},
    {CheckId::C7, "Objective QA (NIfTI)", "Resolution Filtering"},
    {CheckId::SUBJ, "Subjective QA (batch)", "Montage Double Check"},
};

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

bool auto_fixed(const ScanRecord& r, CheckId id) {
  const auto prefix = std::string(to_string(id)) + ":";
  return std::any_of(r.auto_fixes.begin(), r.auto_fixes.end(),
                     [&](const std::string& fix) { return fix.rfind(prefix, 0) == 0; });
}

json histogram_json(const Histogram& h) {
  json bins = json::array();
  for (const auto& [index, count] : h.counts) {
    bins.push_back({{"index", index}, {"start", index * h.bin_width}, {"end", (index + 1) * h.bin_width}, {"count", count}});
  }
  return {{"bin_width", h.bin_width}, {"missing", h.missing}, {"bins", bins}};
}

Histogram histogram_from_json(const json& j) {
  Histogram h;
  h.bin_width = j.at("bin_width").get<double>();
  h.missing = j.at("missing").get<std::int64_t>();
  for (const auto& b : j.at("bins")) h.counts[b.at("index").get<std::int64_t>()] = b.at("count").get<std::int64_t>();
  return h;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Flag: return "flag";
  }
  return "?";
}

std::optional<Verdict> parse_verdict(std::string_view text) {
  for (auto v : {Verdict::Pass, Verdict::Fail, Verdict::Flag}) {
    if (to_string(v) == text) return v;
  }
  return std::nullopt;
}

std::string_view to_string(Disposition d) {
  switch (d) {
    case Disposition::Pass: return "pass";
    case Disposition::NeedsReview: return "needs-review";
    case Disposition::Warn: return "warn";
    case Disposition::Fail: return "fail";
  }
  return "?";
}

std::optional<Disposition> parse_disposition(std::string_view text) {
  for (auto d : {Disposition::Pass, Disposition::NeedsReview, Disposition::Warn, Disposition::Fail}) {
    if (to_string(d) == text) return d;
  }
  return std::nullopt;
}

ReviewVerdict verdict_from_json(const json& j) {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidArgument, "malformed verdict: " + why); };
  if (!j.is_object()) bad("not an object");
  if (!j.contains("scan_id") || !j["scan_id"].is_string() || j["scan_id"].get<std::string>().empty()) bad("scan_id");
  if (!j.contains("verdict") || !j["verdict"].is_string()) bad("verdict");
  ReviewVerdict v;
  v.scan_id = j["scan_id"].get<std::string>();
  const auto parsed = parse_verdict(j["verdict"].get<std::string>());
  if (!parsed) bad("verdict must be pass, fail or flag");
  v.verdict = *parsed;
  for (const char* key : {"note", "reviewer", "timestamp"}) {
    if (j.contains(key) && !j[key].is_null() && !j[key].is_string()) bad(key);
  }
  v.note = j.value("note", std::string());
  v.reviewer = j.value("reviewer", std::string());
  v.timestamp = j.value("timestamp", std::string());
  return v;
}

json to_json(const ReviewVerdict& v) {
  return {{"scan_id", v.scan_id},
          {"verdict", std::string(to_string(v.verdict))},
          {"note", v.note},
          {"reviewer", v.reviewer},
          {"timestamp", v.timestamp}};
}

std::vector<ReviewVerdict> read_verdict_log(const std::string& path) {
  std::vector<ReviewVerdict> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(verdict_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void append_verdict(const std::string& path, const ReviewVerdict& verdict) {
  std::ofstream out(path, std::ios::app);
  out << to_json(verdict).dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "cannot append to " + path);
}

std::map<std::string, ReviewVerdict> latest_verdicts(std::span<const ReviewVerdict> log) {
  std::map<std::string, ReviewVerdict> latest;
  for (const auto& v : log) {
    auto it = latest.find(v.scan_id);
    if (it == latest.end() || v.timestamp >= it->second.timestamp) latest[v.scan_id] = v;
  }
  return latest;
}

const QaFinding* ScanRecord::finding(CheckId id) const {
  for (const auto& f : findings) {
    if (f.check == id) return &f;
  }
  return nullptr;
}

bool ScanRecord::failed(CheckId id) const {
  const QaFinding* f = finding(id);
  return f && f->applicable && !f->passed;
}

Disposition decide_disposition(const ScanRecord& r) {
  if (r.verdict && r.verdict->verdict == Verdict::Fail) return Disposition::Fail;
  if (!r.errors.empty()) return Disposition::Fail;
  bool fixed = false;
  for (const auto& f : r.findings) {
    if (!f.applicable || f.passed) continue;
    if (auto_fixed(r, f.check)) {
      fixed = true;
    } else {
      return Disposition::Fail;
    }
  }
  if (fixed || !r.warnings.empty() || (r.verdict && r.verdict->verdict == Verdict::Flag)) return Disposition::Warn;
  if (r.sampled_for_review && !r.verdict) return Disposition::NeedsReview;
  return Disposition::Pass;
}

std::string format_rate(std::int64_t failed, std::int64_t applicable) {
  if (applicable <= 0) return "n/a";
  // hundredths of a percent, half up
  const std::int64_t basis = (failed * 20000 + applicable) / (2 * applicable);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%lld.%02lld%%", static_cast<long long>(basis / 100), static_cast<long long>(basis % 100));
  return buf;
}

void Histogram::add(double value) {
  if (!std::isfinite(value)) {
    ++missing;
    return;
  }
  ++counts[static_cast<std::int64_t>(std::floor(value / bin_width + 1e-9))];
}

std::int64_t Histogram::total() const {
  std::int64_t n = 0;
  for (const auto& [index, count] : counts) n += count;
  return n;
}

double axial_fov(const SliceHeader& header) { return header.pixel_spacing[1] * header.columns; }

DistributionSummary summarize_distributions(std::span<const ScanQuantities> scans, double fov_bin_mm,
                                            double spacing_bin_mm) {
  if (!(fov_bin_mm > 0) || !(spacing_bin_mm > 0)) throw Error(ErrorCode::InvalidArgument, "bin widths must be > 0");
  DistributionSummary d;
  d.axial_fov.bin_width = fov_bin_mm;
  d.z_spacing.bin_width = spacing_bin_mm;
  for (const auto& s : scans) {
    if (s.axial_fov_mm) {
      d.axial_fov.add(*s.axial_fov_mm);
    } else {
      ++d.axial_fov.missing;
    }
    if (s.z_spacing_mm) {
      d.z_spacing.add(*s.z_spacing_mm);
    } else {
      ++d.z_spacing.missing;
    }
  }
  return d;
}

QaReport aggregate(std::vector<ScanRecord> records, std::span<const ReviewVerdict> verdicts,
                   const AggregateOptions& options) {
  std::sort(records.begin(), records.end(),
            [](const ScanRecord& a, const ScanRecord& b) { return a.scan_id < b.scan_id; });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].scan_id == records[i - 1].scan_id) throw Error(ErrorCode::DuplicateScanId, records[i].scan_id);
  }

  const auto latest = latest_verdicts(verdicts);
  QaReport report;
  report.corpus_id = options.corpus_id;
  report.generated_at = options.generated_at;
  report.thresholds = options.thresholds;
  report.review_seed = options.review_seed;
  report.review_sample_size = options.review_sample_size;
  report.skipped_by_session_policy = options.skipped_by_session_policy;

  for (const auto& info : kRateRows) report.rate_table.push_back({info.id, info.section, info.name, 0, 0});
  for (const char* d : {"pass", "needs-review", "warn", "fail"}) report.disposition_counts[d] = 0;

  std::vector<ScanQuantities> quantities;
  for (auto& r : records) {
    if (auto it = latest.find(r.scan_id); it != latest.end()) {
      r.verdict = it->second;
    }
    r.disposition = decide_disposition(r);
    ++report.disposition_counts[std::string(to_string(r.disposition))];

    bool any_failed = !r.errors.empty();
    for (auto& row : report.rate_table) {
      if (row.check == CheckId::SUBJ) {
        if (r.verdict) {
          ++row.applicable;
          if (r.verdict->verdict == Verdict::Fail) ++row.failed;
        }
        continue;
      }
      const QaFinding* f = r.finding(row.check);
      if (!f || !f->applicable) continue;
      ++row.applicable;
      if (!f->passed) {
        ++row.failed;
        any_failed = true;
      }
    }
    if (any_failed) ++report.total_failed;
    if (std::any_of(r.errors.begin(), r.errors.end(),
                    [](const std::string& e) { return e.rfind("unparseable", 0) == 0; })) {
      ++report.unparseable;
    }
    quantities.push_back({r.axial_fov_mm, r.z_spacing_mm});
  }
  report.distributions = summarize_distributions(quantities, options.fov_bin_mm, options.spacing_bin_mm);
  report.scans = std::move(records);
  return report;
}

json to_json(const QaFinding& f) {
  return {{"check", std::string(to_string(f.check))},
          {"applicable", f.applicable},
          {"value", f.value},
          {"passed", f.passed},
          {"detail", f.detail},
          {"indices", f.indices}};
}

QaFinding finding_from_json(const json& j) {
  QaFinding f;
  const auto id = parse_check_id(j.at("check").get<std::string>());
  if (!id) throw Error(ErrorCode::InvalidArgument, "unknown check id");
  f.check = *id;
  f.applicable = j.at("applicable").get<bool>();
  f.value = j.at("value").get<std::int64_t>();
  f.passed = j.at("passed").get<bool>();
  f.detail = j.at("detail").get<std::string>();
  f.indices = j.value("indices", std::vector<std::int64_t>{});
  return f;
}

json to_json(const QaThresholds& t) {
  return {{"epsilon", {{"mode", t.epsilon.relative ? "relative" : "absolute"}, {"value", t.epsilon.value}}},
          {"delta", t.delta},
          {"sigma1", t.sigma1},
          {"sigma2", t.sigma2},
          {"phi", t.phi},
          {"phi_min", optional_json(t.phi_min)}};
}

QaThresholds thresholds_from_json(const json& j) {
  QaThresholds t;
  t.epsilon.relative = j.at("epsilon").at("mode").get<std::string>() == "relative";
  t.epsilon.value = j.at("epsilon").at("value").get<double>();
  t.delta = j.at("delta").get<std::int64_t>();
  t.sigma1 = j.at("sigma1").get<double>();
  t.sigma2 = j.at("sigma2").get<double>();
  t.phi = j.at("phi").get<std::array<double, 3>>();
  t.phi_min = optional_from<std::array<double, 3>>(j, "phi_min");
  return t;
}

json to_json(const ScanRecord& r) {
  json findings = json::array();
  for (const auto& f : r.findings) findings.push_back(to_json(f));
  return {{"scan_id", r.scan_id},
          {"series_uid", r.series_uid},
          {"slice_count", r.slice_count},
          {"findings", findings},
          {"errors", r.errors},
          {"warnings", r.warnings},
          {"auto_fixes", r.auto_fixes},
          {"sampled_for_review", r.sampled_for_review},
          {"verdict", r.verdict ? to_json(*r.verdict) : json(nullptr)},
          {"disposition", std::string(to_string(r.disposition))},
          {"axial_fov_mm", optional_json(r.axial_fov_mm)},
          {"z_spacing_mm", optional_json(r.z_spacing_mm)},
          {"outputs", r.outputs},
          {"input_digest", r.input_digest}};
}

ScanRecord scan_record_from_json(const json& j) {
  ScanRecord r;
  r.scan_id = j.at("scan_id").get<std::string>();
  r.series_uid = j.at("series_uid").get<std::string>();
  r.slice_count = j.at("slice_count").get<std::int64_t>();
  for (const auto& f : j.at("findings")) r.findings.push_back(finding_from_json(f));
  r.errors = j.at("errors").get<std::vector<std::string>>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  r.auto_fixes = j.at("auto_fixes").get<std::vector<std::string>>();
  r.sampled_for_review = j.at("sampled_for_review").get<bool>();
  if (!j.at("verdict").is_null()) r.verdict = verdict_from_json(j.at("verdict"));
  const auto d = parse_disposition(j.at("disposition").get<std::string>());
  if (!d) throw Error(ErrorCode::InvalidArgument, "unknown disposition");
  r.disposition = *d;
  r.axial_fov_mm = optional_from<double>(j, "axial_fov_mm");
  r.z_spacing_mm = optional_from<double>(j, "z_spacing_mm");
  r.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  r.input_digest = j.at("input_digest").get<std::string>();
  return r;
}

json to_json(const QaReport& report) {
  json rates = json::array();
  for (const auto& row : report.rate_table) {
    rates.push_back({{"check", std::string(to_string(row.check))},
                     {"section", row.section},
                     {"name", row.name},
                     {"failed", row.failed},
                     {"applicable", row.applicable},
                     {"rate", format_rate(row.failed, row.applicable)}});
  }
  json scans = json::array();
  for (const auto& r : report.scans) scans.push_back(to_json(r));
  return {{"corpus_id", report.corpus_id},
          {"generated_at", report.generated_at},
          {"thresholds", to_json(report.thresholds)},
          {"review", {{"seed", report.review_seed}, {"sample_size", report.review_sample_size}}},
          {"summary",
           {{"scans", report.scans.size()},
            {"total_failed", report.total_failed},
            {"unparseable", report.unparseable},
            {"skipped_by_session_policy", report.skipped_by_session_policy},
            {"dispositions", report.disposition_counts}}},
          {"rates", rates},
          {"distributions",
           {{"axial_fov", histogram_json(report.distributions.axial_fov)},
            {"z_spacing", histogram_json(report.distributions.z_spacing)}}},
          {"scans", scans}};
}

QaReport report_from_json(const json& j) {
  QaReport report;
  report.corpus_id = j.at("corpus_id").get<std::string>();
  report.generated_at = j.at("generated_at").get<std::string>();
  report.thresholds = thresholds_from_json(j.at("thresholds"));
  report.review_seed = j.at("review").at("seed").get<std::uint64_t>();
  report.review_sample_size = j.at("review").at("sample_size").get<std::int64_t>();
  const auto& summary = j.at("summary");
  report.total_failed = summary.at("total_failed").get<std::int64_t>();
  report.unparseable = summary.at("unparseable").get<std::int64_t>();
  report.skipped_by_session_policy = summary.at("skipped_by_session_policy").get<std::int64_t>();
  report.disposition_counts = summary.at("dispositions").get<std::map<std::string, std::int64_t>>();
  for (const auto& row : j.at("rates")) {
    const auto id = parse_check_id(row.at("check").get<std::string>());
    if (!id) throw Error(ErrorCode::InvalidArgument, "unknown check in rates");
    report.rate_table.push_back({*id, row.at("section").get<std::string>(), row.at("name").get<std::string>(),
                                 row.at("failed").get<std::int64_t>(), row.at("applicable").get<std::int64_t>()});
  }
  report.distributions.axial_fov = histogram_from_json(j.at("distributions").at("axial_fov"));
  report.distributions.z_spacing = histogram_from_json(j.at("distributions").at("z_spacing"));
  for (const auto& s : j.at("scans")) report.scans.push_back(scan_record_from_json(s));
  return report;
}

std::string rates_csv(const QaReport& report) {
  std::ostringstream os;
  os << "section,check,name,failed,applicable,failure_rate\n";
  for (const auto& row : report.rate_table) {
    os << csv_field(row.section) << ',' << to_string(row.check) << ',' << csv_field(row.name) << ',' << row.failed
       << ',' << row.applicable << ',' << format_rate(row.failed, row.applicable) << '\n';
  }
  return os.str();
}

std::string scans_csv(const QaReport& report) {
  std::ostringstream os;
  os << "scan_id,series_uid,slice_count";
  for (auto id : kObjectiveChecks) os << ',' << to_string(id);
  os << ",SUBJ,failed_checks,disposition,errors,warnings,auto_fixes\n";
  for (const auto& r : report.scans) {
    os << csv_field(r.scan_id) << ',' << csv_field(r.series_uid) << ',' << r.slice_count;
    std::vector<std::string> failed;
    for (auto id : kObjectiveChecks) {
      const QaFinding* f = r.finding(id);
      os << ',';
      if (f && f->applicable) {
        os << f->value;
        if (!f->passed) failed.emplace_back(to_string(id));
      } else {
        os << "na";
      }
    }
    os << ',' << (r.verdict ? std::string(to_string(r.verdict->verdict)) : std::string());
    os << ',' << csv_field(join(failed, ";")) << ',' << to_string(r.disposition) << ',' << csv_field(join(r.errors, "; "))
       << ',' << csv_field(join(r.warnings, "; ")) << ',' << csv_field(join(r.auto_fixes, "; ")) << '\n';
  }
  return os.str();
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream os;
  os << "bin_start_mm,bin_end_mm,count\n";
  for (const auto& [index, count] : h.counts) {
    os << number(index * h.bin_width) << ',' << number((index + 1) * h.bin_width) << ',' << count << '\n';
  }
  return os.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot rename " + tmp + ": " + ec.message());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void export_report(const QaReport& report, const std::string& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + directory + ": " + ec.message());
  const std::filesystem::path dir(directory);
  write_text_file((dir / "report.json").string(), to_json(report).dump(2) + "\n");
  write_text_file((dir / "rates.csv").string(), rates_csv(report));
  write_text_file((dir / "scans.csv").string(), scans_csv(report));
  write_text_file((dir / "fov_hist.csv").string(), histogram_csv(report.distributions.axial_fov));
  write_text_file((dir / "spacing_hist.csv").string(), histogram_csv(report.distributions.z_spacing));
}

}  // namespace ctqa
