#pragma once

// Corpus-level aggregation: per-scan dispositions, the per-check failure-rate
// table, FOV / slice-spacing distributions, and their file exports.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctqa/series_qa.hpp"

namespace ctqa {

enum class Verdict { Pass, Fail, Flag };

std::string_view to_string(Verdict v);
std::optional<Verdict> parse_verdict(std::string_view text);

struct ReviewVerdict {
  std::string scan_id;
  Verdict verdict = Verdict::Pass;
  std::string note;
  std::string reviewer;
  std::string timestamp;  // ISO-8601 UTC, compared lexicographically

  bool operator==(const ReviewVerdict&) const = default;
};

/// Throws InvalidArgument on missing/invalid fields.
ReviewVerdict verdict_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ReviewVerdict& v);

/// One JSON object per line. Blank lines are skipped; malformed lines throw.
std::vector<ReviewVerdict> read_verdict_log(const std::string& path);
void append_verdict(const std::string& path, const ReviewVerdict& verdict);

/// Latest timestamp per scan; equal timestamps resolve to the later entry.
std::map<std::string, ReviewVerdict> latest_verdicts(std::span<const ReviewVerdict> log);

enum class Disposition { Pass, NeedsReview, Warn, Fail };

std::string_view to_string(Disposition d);
std::optional<Disposition> parse_disposition(std::string_view text);

struct ScanRecord {
  std::string scan_id;
  std::string series_uid;
  std::int64_t slice_count = 0;
  std::vector<QaFinding> findings;   // C1..C7 in order once processed
  std::vector<std::string> errors;   // e.g. "unparseable: <file>: <reason>"
  std::vector<std::string> warnings;
  std::vector<std::string> auto_fixes;
  bool sampled_for_review = false;
  std::optional<ReviewVerdict> verdict;
  Disposition disposition = Disposition::Pass;
  std::optional<double> axial_fov_mm;
  std::optional<double> z_spacing_mm;
  std::map<std::string, std::string> outputs;  // artefact kind -> path relative to the output root
  std::string input_digest;

  const QaFinding* finding(CheckId id) const;
  bool failed(CheckId id) const;
};

/// Disposition lattice fail > warn > needs-review > pass:
///  - reviewer fail, a processing error, or any failed objective check that
///    was not auto-fixed -> fail
///  - an auto-fixed check, a warning, or a reviewer flag -> warn
///  - sampled for review without a verdict -> needs-review
Disposition decide_disposition(const ScanRecord& record);

struct RateRow {
  CheckId check = CheckId::C1;
  std::string section;
  std::string name;
  std::int64_t failed = 0;
  std::int64_t applicable = 0;
};

/// Percentage with two decimals, rounded half up in exact integer arithmetic
/// ("0.40%"); "n/a" when nothing was applicable.
std::string format_rate(std::int64_t failed, std::int64_t applicable);

struct Histogram {
  double bin_width = 1.0;
  std::map<std::int64_t, std::int64_t> counts;  // bin index -> count, bin = [index*w, (index+1)*w)
  std::int64_t missing = 0;

  void add(double value);
  std::int64_t total() const;
};

struct DistributionSummary {
  Histogram axial_fov{10.0, {}, 0};
  Histogram z_spacing{0.25, {}, 0};
};

struct ScanQuantities {
  std::optional<double> axial_fov_mm;
  std::optional<double> z_spacing_mm;
};

/// FOV = column pixel spacing x columns.
double axial_fov(const SliceHeader& header);

DistributionSummary summarize_distributions(std::span<const ScanQuantities> scans, double fov_bin_mm = 10.0,
                                            double spacing_bin_mm = 0.25);

struct QaReport {
  std::string corpus_id;
  std::string generated_at;
  QaThresholds thresholds;
  std::uint64_t review_seed = 0;
  std::int64_t review_sample_size = 0;
  std::int64_t skipped_by_session_policy = 0;
  std::vector<ScanRecord> scans;  // sorted by scan_id
  std::vector<RateRow> rate_table;
  std::int64_t total_failed = 0;   // scans with any failed objective check or error, counted once
  std::int64_t unparseable = 0;
  std::map<std::string, std::int64_t> disposition_counts;
  DistributionSummary distributions;
};

struct AggregateOptions {
  std::string corpus_id;
  std::string generated_at;
  QaThresholds thresholds;
  std::uint64_t review_seed = 0;
  std::int64_t review_sample_size = 0;
  std::int64_t skipped_by_session_policy = 0;
  double fov_bin_mm = 10.0;
  double spacing_bin_mm = 0.25;
};

/// Merges verdicts (latest per scan) into the records, assigns dispositions
/// and builds the rate table. Throws DuplicateScanId.
QaReport aggregate(std::vector<ScanRecord> records, std::span<const ReviewVerdict> verdicts,
                   const AggregateOptions& options);

nlohmann::json to_json(const QaReport& report);
QaReport report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScanRecord& record);
ScanRecord scan_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const QaFinding& f);
QaFinding finding_from_json(const nlohmann::json& j);
nlohmann::json to_json(const QaThresholds& t);
QaThresholds thresholds_from_json(const nlohmann::json& j);

std::string rates_csv(const QaReport& report);
std::string scans_csv(const QaReport& report);
std::string histogram_csv(const Histogram& h);

/// Writes report.json, rates.csv, scans.csv, fov_hist.csv and spacing_hist.csv
/// into `directory`. Throws IoFailure.
void export_report(const QaReport& report, const std::string& directory);

/// Writes `contents` through a temporary file and rename.
void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

}  // namespace ctqa
