#pragma once

// Corpus driver: discovery, per-scan stage chain, resume bookkeeping,
// aggregation and export.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctqa/dicom.hpp"
#include "ctqa/gallery.hpp"
#include "ctqa/report.hpp"
#include "ctqa/roi.hpp"
#include "ctqa/series_qa.hpp"

namespace ctqa {

enum class SessionPolicy { LargestSliceCount, All };

std::string_view to_string(SessionPolicy p);
std::optional<SessionPolicy> parse_session_policy(std::string_view text);

struct StageToggles {
  DicomQaToggles dicom;
  bool c6 = true;
  bool c7 = true;
  bool reorient = true;             // auto-fix a C6 failure
  bool crop = true;
  bool gallery = true;
  bool assemble_on_failure = false;  // assemble even when C1-C4 fail
};

struct PipelineConfig {
  std::string input_root;
  std::string output_root;
  QaThresholds thresholds;
  StageToggles stages;
  SessionPolicy session_policy = SessionPolicy::LargestSliceCount;
  std::int64_t review_sample_size = 0;
  std::uint64_t review_seed = 0;
  int workers = 0;  // 0: logical core count
  double crop_margin = 0.10;
  LungMaskOptions mask;
  MontageOptions montage;
  bool blind_review = false;
  bool resume = true;
  std::string fixed_clock;  // non-empty: used verbatim as generated_at
  std::string corpus_id;    // default: input root directory name

  void validate() const;  // throws ConfigInvalid
};

/// key = value lines, '#' comments. Keys are listed in README.md. Unknown
/// keys and malformed values throw ConfigInvalid.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::string& path, PipelineConfig base = {});
void apply_config_value(PipelineConfig& config, std::string_view key, std::string_view value);
std::string config_text(const PipelineConfig& config);

/// Settings that change per-scan outputs; part of every scan's input digest.
std::string processing_fingerprint(const PipelineConfig& config);

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string fnv1a_hex(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull);

struct ScanInput {
  std::string scan_id;
  std::string directory;
  std::vector<SliceHeader> headers;  // parseable files of this series
  std::vector<std::string> errors;   // "unparseable: <file>: <reason>" for the whole directory
  std::string content_digest;
};

struct Discovery {
  std::vector<ScanInput> scans;  // sorted by scan_id
  std::int64_t skipped_by_session_policy = 0;
};

/// Candidate DICOM files are regular files named *.dcm, *.ima or without an
/// extension; each directory holding candidates is a session.
Discovery discover_scans(const std::string& input_root, SessionPolicy policy, int workers = 0);

/// Runs the stage chain for one scan and writes its artefacts below
/// config.output_root. Never throws on per-scan problems.
ScanRecord process_scan(const ScanInput& scan, const PipelineConfig& config);

/// Full run: discovery, per-scan processing (resuming where possible),
/// aggregation, export and the gallery index.
QaReport run_pipeline(const PipelineConfig& config);

/// Re-aggregates an existing report with the verdict log and rewrites the
/// report files and gallery index.
QaReport finalize_report(const std::string& output_root, const std::string& generated_at = {});

/// Merged view of report.json and verdicts.jsonl without writing anything.
QaReport current_report(const std::string& output_root);

std::string utc_now_iso8601();

std::string scan_id_for(std::string_view relative_directory);

}  // namespace ctqa
