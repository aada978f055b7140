#include "ctqa/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>

#include "ctqa/error.hpp"
#include "ctqa/kernels.hpp"
#include "ctqa/nifti.hpp"
#include "ctqa/orientation.hpp"
#include "ctqa/volume.hpp"

#ifdef CTQA_HAVE_OPENMP
#include <omp.h>
#endif

namespace ctqa {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kConfigFile = "config.txt";
constexpr const char* kVerdictLog = "verdicts.jsonl";

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::ConfigInvalid, why); }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  invalid(std::string(key) + ": expected on/off, got '" + std::string(v) + "'");
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) invalid(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  return out;
}

std::int64_t to_int(std::string_view key, std::string_view v) {
  std::int64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) invalid(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* on_off(bool b) { return b ? "on" : "off"; }

bool is_candidate(const fs::path& p) {
  const auto name = p.filename().string();
  if (name.empty() || name[0] == '.') return false;
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext.empty() || ext == ".dcm" || ext == ".ima";
}

int worker_count(int requested) { return requested > 0 ? requested : std::max(1, kernels::max_threads()); }

std::string rel(const fs::path& root, const fs::path& p) { return fs::relative(p, root).generic_string(); }

struct DirectoryScan {
  fs::path directory;
  std::vector<fs::path> files;
};

void set_findings_na(ScanRecord& r, std::size_t from, const std::string& why) {
  for (std::size_t i = from; i < kObjectiveChecks.size(); ++i) {
    r.findings.push_back(QaFinding::not_applicable(kObjectiveChecks[i], why));
  }
}

bool all_outputs_exist(const ScanRecord& r, const fs::path& out_root) {
  return std::all_of(r.outputs.begin(), r.outputs.end(),
                     [&](const auto& kv) { return fs::exists(out_root / kv.second); });
}

std::optional<ScanRecord> resumable(const ScanInput& scan, const std::string& digest, const fs::path& out_root) {
  const fs::path path = out_root / "scans" / (scan.scan_id + ".json");
  if (!fs::exists(path)) return std::nullopt;
  try {
    ScanRecord r = scan_record_from_json(json::parse(read_text_file(path.string())));
    if (r.input_digest != digest || r.scan_id != scan.scan_id || !all_outputs_exist(r, out_root)) return std::nullopt;
    return r;
  } catch (const std::exception&) {
    return std::nullopt;  // partial or stale record: redo the scan
  }
}

std::vector<GalleryEntry> gallery_entries(const QaReport& report) {
  std::vector<GalleryEntry> entries;
  for (const auto& r : report.scans) {
    auto it = r.outputs.find("montage");
    if (it == r.outputs.end()) continue;
    entries.push_back({r.scan_id, fs::path(it->second).filename().string(), r.findings,
                       std::string(to_string(r.disposition))});
  }
  return entries;
}

void write_outputs(const QaReport& report, const fs::path& out_root, bool blind) {
  export_report(report, out_root.string());
  fs::create_directories(out_root / "gallery");
  write_text_file((out_root / "gallery" / "index.html").string(), build_index(gallery_entries(report), blind));
}

AggregateOptions aggregate_options(const PipelineConfig& c, const std::string& generated_at,
                                   std::int64_t skipped) {
  AggregateOptions o;
  o.corpus_id = c.corpus_id;
  o.generated_at = generated_at;
  o.thresholds = c.thresholds;
  o.review_seed = c.review_seed;
  o.review_sample_size = c.review_sample_size;
  o.skipped_by_session_policy = skipped;
  return o;
}

}  // namespace

std::string_view to_string(SessionPolicy p) {
  return p == SessionPolicy::All ? "all" : "largest-slice-count";
}

std::optional<SessionPolicy> parse_session_policy(std::string_view text) {
  if (text == "all") return SessionPolicy::All;
  if (text == "largest-slice-count") return SessionPolicy::LargestSliceCount;
  return std::nullopt;
}

void PipelineConfig::validate() const {
  try {
    thresholds.validate();
  } catch (const Error& e) {
    invalid(e.what());
  }
  if (input_root.empty()) invalid("input root not set");
  if (output_root.empty()) invalid("output root not set");
  std::error_code ec;
  if (fs::weakly_canonical(input_root, ec) == fs::weakly_canonical(output_root, ec)) {
    invalid("input and output roots must differ");
  }
  if (review_sample_size < 0) invalid("review sample size must be >= 0");
  if (workers < 0) invalid("workers must be >= 0");
  if (!(crop_margin >= 0.0)) invalid("crop margin must be >= 0");
  if (mask.dilation_radius < 0) invalid("dilation radius must be >= 0");
  if (!(mask.second_lung_ratio >= 0.0 && mask.second_lung_ratio <= 1.0)) invalid("second lung ratio must lie in [0, 1]");
  if (montage.tile_size < 8 || montage.tile_size > 1024) invalid("tile size must lie in [8, 1024]");
  if (!(montage.window_width > 0)) invalid("window width must be > 0");
}

void apply_config_value(PipelineConfig& c, std::string_view key, std::string_view raw) {
  const std::string v = trim(raw);
  auto& t = c.thresholds;
  auto& s = c.stages;
  if (key == "input") c.input_root = v;
  else if (key == "output") c.output_root = v;
  else if (key == "epsilon") t.epsilon.value = to_double(key, v);
  else if (key == "epsilon_mode") {
    if (v == "relative") t.epsilon.relative = true;
    else if (v == "absolute") t.epsilon.relative = false;
    else invalid("epsilon_mode: expected relative or absolute");
  }
  else if (key == "delta") t.delta = to_int(key, v);
  else if (key == "sigma1") t.sigma1 = to_double(key, v);
  else if (key == "sigma2") t.sigma2 = to_double(key, v);
  else if (key == "phi_x") t.phi[0] = to_double(key, v);
  else if (key == "phi_y") t.phi[1] = to_double(key, v);
  else if (key == "phi_z") t.phi[2] = to_double(key, v);
  else if (key == "phi_min_x" || key == "phi_min_y" || key == "phi_min_z") {
    if (!t.phi_min) t.phi_min = std::array<double, 3>{0.0, 0.0, 0.0};
    (*t.phi_min)[key.back() - 'x'] = to_double(key, v);
  }
  else if (key == "c1") s.dicom.c1 = to_bool(key, v);
  else if (key == "c2") s.dicom.c2 = to_bool(key, v);
  else if (key == "c3") s.dicom.c3 = to_bool(key, v);
  else if (key == "c4") s.dicom.c4 = to_bool(key, v);
  else if (key == "c5") s.dicom.c5 = to_bool(key, v);
  else if (key == "c6") s.c6 = to_bool(key, v);
  else if (key == "c7") s.c7 = to_bool(key, v);
  else if (key == "reorient") s.reorient = to_bool(key, v);
  else if (key == "crop") s.crop = to_bool(key, v);
  else if (key == "gallery") s.gallery = to_bool(key, v);
  else if (key == "assemble_on_failure") s.assemble_on_failure = to_bool(key, v);
  else if (key == "session_policy") {
    auto p = parse_session_policy(v);
    if (!p) invalid("session_policy: expected largest-slice-count or all");
    c.session_policy = *p;
  }
  else if (key == "review_sample_size") c.review_sample_size = to_int(key, v);
  else if (key == "review_seed") c.review_seed = static_cast<std::uint64_t>(to_int(key, v));
  else if (key == "workers") c.workers = static_cast<int>(to_int(key, v));
  else if (key == "crop_margin") c.crop_margin = to_double(key, v);
  else if (key == "mask_threshold_hu") c.mask.hu_threshold = static_cast<float>(to_double(key, v));
  else if (key == "dilation_radius") c.mask.dilation_radius = static_cast<int>(to_int(key, v));
  else if (key == "second_lung_ratio") c.mask.second_lung_ratio = to_double(key, v);
  else if (key == "tile_size") c.montage.tile_size = static_cast<int>(to_int(key, v));
  else if (key == "window_center") c.montage.window_center = to_double(key, v);
  else if (key == "window_width") c.montage.window_width = to_double(key, v);
  else if (key == "blind_review") c.blind_review = to_bool(key, v);
  else if (key == "resume") c.resume = to_bool(key, v);
  else if (key == "fixed_clock") c.fixed_clock = v;
  else if (key == "corpus_id") c.corpus_id = v;
  else invalid("unknown config key '" + std::string(key) + "'");
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) invalid("line " + std::to_string(line_no) + ": expected key = value");
    try {
      apply_config_value(base, trim(stripped.substr(0, eq)), stripped.substr(eq + 1));
    } catch (const Error& e) {
      invalid("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

PipelineConfig load_config(const std::string& path, PipelineConfig base) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    invalid(std::string("cannot read config: ") + e.what());
  }
  return parse_config(text, std::move(base));
}

std::string processing_fingerprint(const PipelineConfig& c) {
  const auto& t = c.thresholds;
  const auto& s = c.stages;
  std::ostringstream os;
  os << "epsilon_mode = " << (t.epsilon.relative ? "relative" : "absolute") << '\n'
     << "epsilon = " << fmt(t.epsilon.value) << '\n'
     << "delta = " << t.delta << '\n'
     << "sigma1 = " << fmt(t.sigma1) << '\n'
     << "sigma2 = " << fmt(t.sigma2) << '\n'
     << "phi_x = " << fmt(t.phi[0]) << '\n'
     << "phi_y = " << fmt(t.phi[1]) << '\n'
     << "phi_z = " << fmt(t.phi[2]) << '\n';
  if (t.phi_min) {
    os << "phi_min_x = " << fmt((*t.phi_min)[0]) << '\n'
       << "phi_min_y = " << fmt((*t.phi_min)[1]) << '\n'
       << "phi_min_z = " << fmt((*t.phi_min)[2]) << '\n';
  }
  os << "c1 = " << on_off(s.dicom.c1) << '\n'
     << "c2 = " << on_off(s.dicom.c2) << '\n'
     << "c3 = " << on_off(s.dicom.c3) << '\n'
     << "c4 = " << on_off(s.dicom.c4) << '\n'
     << "c5 = " << on_off(s.dicom.c5) << '\n'
     << "c6 = " << on_off(s.c6) << '\n'
     << "c7 = " << on_off(s.c7) << '\n'
     << "reorient = " << on_off(s.reorient) << '\n'
     << "crop = " << on_off(s.crop) << '\n'
     << "gallery = " << on_off(s.gallery) << '\n'
     << "assemble_on_failure = " << on_off(s.assemble_on_failure) << '\n'
     << "crop_margin = " << fmt(c.crop_margin) << '\n'
     << "mask_threshold_hu = " << fmt(c.mask.hu_threshold) << '\n'
     << "dilation_radius = " << c.mask.dilation_radius << '\n'
     << "second_lung_ratio = " << fmt(c.mask.second_lung_ratio) << '\n'
     << "tile_size = " << c.montage.tile_size << '\n'
     << "window_center = " << fmt(c.montage.window_center) << '\n'
     << "window_width = " << fmt(c.montage.window_width) << '\n';
  return os.str();
}

std::string config_text(const PipelineConfig& c) {
  std::ostringstream os;
  os << "input = " << c.input_root << '\n'
     << "output = " << c.output_root << '\n'
     << processing_fingerprint(c)
     << "session_policy = " << to_string(c.session_policy) << '\n'
     << "review_sample_size = " << c.review_sample_size << '\n'
     << "review_seed = " << c.review_seed << '\n'
     << "workers = " << c.workers << '\n'
     << "blind_review = " << on_off(c.blind_review) << '\n'
     << "resume = " << on_off(c.resume) << '\n'
     << "corpus_id = " << c.corpus_id << '\n';
  if (!c.fixed_clock.empty()) os << "fixed_clock = " << c.fixed_clock << '\n';
  return os.str();
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t h) {
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fnv1a_hex(std::string_view data, std::uint64_t seed) {
  const std::uint64_t h = fnv1a(data, seed);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string scan_id_for(std::string_view relative_directory) {
  std::string id;
  for (char c : relative_directory) {
    if (c == '/') id += "__";
    else id += c;
  }
  return id;
}

Discovery discover_scans(const std::string& input_root, SessionPolicy policy, int workers) {
  const fs::path root(input_root);
  if (!fs::is_directory(root)) throw Error(ErrorCode::ConfigInvalid, "input root is not a directory: " + input_root);

  std::map<fs::path, std::vector<fs::path>> by_dir;
  for (const auto& entry : fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied)) {
    if (entry.is_regular_file() && is_candidate(entry.path())) by_dir[entry.path().parent_path()].push_back(entry.path());
  }
  std::vector<DirectoryScan> dirs;
  for (auto& [dir, files] : by_dir) {
    std::sort(files.begin(), files.end());
    dirs.push_back({dir, std::move(files)});
  }

  std::vector<std::vector<ScanInput>> per_dir(dirs.size());
  std::vector<std::int64_t> skipped(dirs.size(), 0);
  const int threads = worker_count(workers);
  (void)threads;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    const auto& dir = dirs[d];
    std::string base_id = rel(root, dir.directory);
    base_id = base_id == "." ? root.filename().string() : scan_id_for(base_id);
    if (base_id.empty()) base_id = "scan";

    std::map<std::string, std::vector<SliceHeader>> by_series;
    std::map<std::string, std::string> series_digest;
    std::vector<std::string> errors;
    std::string dir_digest;
    for (const auto& file : dir.files) {
      const std::string name = rel(root, file);
      std::vector<std::uint8_t> bytes;
      try {
        bytes = read_file_bytes(file.string());
      } catch (const Error& e) {
        errors.push_back("unparseable: " + name + ": " + e.what());
        continue;
      }
      const std::string file_digest =
          fnv1a_hex(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), fnv1a(name));
      try {
        SliceHeader h = parse_slice(bytes);
        h.source_path = file.string();
        series_digest[h.series_uid] += name + ':' + file_digest + '\n';
        by_series[h.series_uid].push_back(std::move(h));
      } catch (const Error& e) {
        errors.push_back("unparseable: " + name + ": " + e.what());
        dir_digest += name + ':' + file_digest + '\n';
      }
    }

    auto make = [&](std::string id, std::vector<SliceHeader> headers, const std::string& digest) {
      ScanInput s;
      s.scan_id = std::move(id);
      s.directory = dir.directory.string();
      s.headers = std::move(headers);
      s.errors = errors;
      s.content_digest = fnv1a_hex(dir_digest + digest);
      return s;
    };
    if (by_series.empty()) {
      per_dir[d].push_back(make(base_id, {}, {}));
    } else if (policy == SessionPolicy::LargestSliceCount || by_series.size() == 1) {
      auto best = by_series.begin();
      for (auto it = by_series.begin(); it != by_series.end(); ++it) {
        if (it->second.size() > best->second.size()) best = it;
      }
      skipped[d] = static_cast<std::int64_t>(by_series.size()) - 1;
      per_dir[d].push_back(make(base_id, std::move(best->second), series_digest[best->first]));
    } else {
      for (auto& [uid, headers] : by_series) {
        per_dir[d].push_back(make(base_id + "__" + uid, std::move(headers), series_digest[uid]));
      }
    }
  }

  Discovery out;
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    for (auto& s : per_dir[d]) out.scans.push_back(std::move(s));
    out.skipped_by_session_policy += skipped[d];
  }
  std::sort(out.scans.begin(), out.scans.end(),
            [](const ScanInput& a, const ScanInput& b) { return a.scan_id < b.scan_id; });
  for (std::size_t i = 1; i < out.scans.size(); ++i) {
    if (out.scans[i].scan_id == out.scans[i - 1].scan_id) throw Error(ErrorCode::DuplicateScanId, out.scans[i].scan_id);
  }
  return out;
}

ScanRecord process_scan(const ScanInput& scan, const PipelineConfig& config) {
  const fs::path out_root(config.output_root);
  ScanRecord r;
  r.scan_id = scan.scan_id;
  r.input_digest = fnv1a_hex(scan.content_digest + processing_fingerprint(config));
  r.slice_count = static_cast<std::int64_t>(scan.headers.size());

  if (!scan.errors.empty() || scan.headers.empty()) {
    r.errors = scan.errors;
    if (r.errors.empty()) r.errors.push_back("EmptySeries: no parseable DICOM files");
    if (!scan.headers.empty()) r.series_uid = scan.headers.front().series_uid;
    set_findings_na(r, 0, "unparseable");
    return r;
  }

  SeriesManifest manifest;
  try {
    manifest = build_manifest(scan.headers);
  } catch (const Error& e) {
    r.errors.push_back(std::string("manifest: ") + e.what());
    set_findings_na(r, 0, "no manifest");
    return r;
  }
  r.series_uid = manifest.series_uid;
  r.axial_fov_mm = axial_fov(manifest.slices.front());
  if (!manifest.slice_distances.empty()) r.z_spacing_mm = std::abs(manifest.modal_spacing);

  r.findings = run_dicom_qa(manifest, config.thresholds, config.stages.dicom);
  const bool gated = std::any_of(r.findings.begin(), r.findings.begin() + 4,
                                 [](const QaFinding& f) { return f.applicable && !f.passed; });
  if (gated && !config.stages.assemble_on_failure) {
    set_findings_na(r, 5, "skipped: DICOM checks C1-C4 failed");
    return r;
  }

  Volume volume;
  try {
    std::vector<PixelSlab> slabs;
    slabs.reserve(manifest.slices.size());
    for (const auto& h : manifest.slices) slabs.push_back(decode_pixels(h, read_file_bytes(h.source_path)));
    volume = assemble_volume(manifest, slabs);
    volume.series_uid = manifest.series_uid;
    fs::create_directories(out_root / "nifti");
    const std::string nifti = "nifti/" + r.scan_id + ".nii.gz";
    save_nifti((out_root / nifti).string(), volume);
    r.outputs["nifti"] = nifti;
  } catch (const Error& e) {
    r.errors.push_back(std::string("assembly: ") + e.what());
    set_findings_na(r, 5, "no volume");
    return r;
  }

  if (config.stages.c6) {
    QaFinding c6 = check_orientation(volume.affine);
    if (!c6.passed && config.stages.reorient && c6.detail != "oblique") {
      const std::string from = orientation_code(volume.affine);
      volume = reorient_to_standard(volume);
      r.auto_fixes.push_back("C6: reoriented " + from + " -> " + orientation_code(volume.affine));
      const std::string fixed = "nifti/" + r.scan_id + "_std.nii.gz";
      save_nifti((out_root / fixed).string(), volume);
      r.outputs["nifti_std"] = fixed;
    }
    r.findings.push_back(std::move(c6));
  } else {
    r.findings.push_back(QaFinding::not_applicable(CheckId::C6, "disabled"));
  }
  r.findings.push_back(config.stages.c7 ? check_resolution(volume.affine, config.thresholds)
                                        : QaFinding::not_applicable(CheckId::C7, "disabled"));

  if (config.stages.crop) {
    try {
      const LungMask mask = lung_mask(volume, config.mask);
      if (mask.component_count < 2) r.warnings.push_back("ROI: single lung component");
      const Volume roi = crop_roi(volume, mask, config.crop_margin);
      fs::create_directories(out_root / "roi");
      const std::string path = "roi/" + r.scan_id + ".nii.gz";
      save_nifti((out_root / path).string(), roi);
      r.outputs["roi"] = path;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyMask) throw;
      r.warnings.push_back("ROI: no lung component found");
    }
  }

  if (config.stages.gallery) {
    try {
      Montage m = render_montage(volume, config.montage);
      m.scan_id = r.scan_id;
      fs::create_directories(out_root / "gallery");
      const std::string path = "gallery/" + r.scan_id + ".png";
      write_png((out_root / path).string(), m);
      r.outputs["montage"] = path;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateDim) throw;
      r.warnings.push_back(std::string("montage: ") + e.what());
    }
  }
  return r;
}

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

QaReport run_pipeline(const PipelineConfig& input_config) {
  PipelineConfig config = input_config;
  config.validate();
  if (config.corpus_id.empty()) config.corpus_id = fs::path(config.input_root).lexically_normal().filename().string();
  if (config.corpus_id.empty()) config.corpus_id = fs::weakly_canonical(config.input_root).filename().string();

  const fs::path out_root(config.output_root);
  fs::create_directories(out_root / "scans");
  write_text_file((out_root / kConfigFile).string(), config_text(config));

  const Discovery discovery = discover_scans(config.input_root, config.session_policy, config.workers);
  const auto& scans = discovery.scans;
  const std::string fingerprint = processing_fingerprint(config);

  std::vector<ScanRecord> records(scans.size());
  const int threads = worker_count(config.workers);
  (void)threads;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t i = 0; i < scans.size(); ++i) {
    const auto& scan = scans[i];
    const std::string digest = fnv1a_hex(scan.content_digest + fingerprint);
    if (config.resume) {
      if (auto done = resumable(scan, digest, out_root)) {
        records[i] = std::move(*done);
        continue;
      }
    }
    ScanRecord r;
    try {
      r = process_scan(scan, config);
    } catch (const std::exception& e) {
      r = ScanRecord{};
      r.scan_id = scan.scan_id;
      r.input_digest = digest;
      r.errors.push_back(std::string("internal: ") + e.what());
      set_findings_na(r, 0, "internal error");
    }
    try {
      write_text_file((out_root / "scans" / (r.scan_id + ".json")).string(), to_json(r).dump(2) + "\n");
    } catch (const Error& e) {
      r.errors.push_back(e.what());
    }
    records[i] = std::move(r);
  }

  // Review sample: uniform over scan ids with the recorded seed.
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::size_t> picked;
  std::mt19937_64 rng(config.review_seed);
  std::sample(order.begin(), order.end(), std::back_inserter(picked),
              static_cast<std::size_t>(config.review_sample_size), rng);
  for (auto i : picked) records[i].sampled_for_review = true;

  const auto verdicts = read_verdict_log((out_root / kVerdictLog).string());
  const std::string generated_at = config.fixed_clock.empty() ? utc_now_iso8601() : config.fixed_clock;
  QaReport report =
      aggregate(std::move(records), verdicts, aggregate_options(config, generated_at, discovery.skipped_by_session_policy));
  write_outputs(report, out_root, config.blind_review);
  return report;
}

QaReport current_report(const std::string& output_root) {
  const fs::path out_root(output_root);
  const QaReport stored = report_from_json(json::parse(read_text_file((out_root / "report.json").string())));
  std::vector<ScanRecord> records = stored.scans;
  for (auto& r : records) r.verdict.reset();
  AggregateOptions o;
  o.corpus_id = stored.corpus_id;
  o.generated_at = stored.generated_at;
  o.thresholds = stored.thresholds;
  o.review_seed = stored.review_seed;
  o.review_sample_size = stored.review_sample_size;
  o.skipped_by_session_policy = stored.skipped_by_session_policy;
  o.fov_bin_mm = stored.distributions.axial_fov.bin_width;
  o.spacing_bin_mm = stored.distributions.z_spacing.bin_width;
  const auto verdicts = read_verdict_log((out_root / kVerdictLog).string());
  return aggregate(std::move(records), verdicts, o);
}

QaReport finalize_report(const std::string& output_root, const std::string& generated_at) {
  const fs::path out_root(output_root);
  QaReport report = current_report(output_root);
  if (!generated_at.empty()) report.generated_at = generated_at;
  bool blind = false;
  if (fs::exists(out_root / kConfigFile)) {
    try {
      blind = load_config((out_root / kConfigFile).string()).blind_review;
    } catch (const Error&) {
      blind = false;
    }
  }
  write_outputs(report, out_root, blind);
  return report;
}

}  // namespace ctqa
