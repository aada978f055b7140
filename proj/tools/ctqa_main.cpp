// ctqa: command-line driver.
//   qa       full pipeline over a corpus
//   convert  one DICOM series directory -> NIfTI
//   crop     lung ROI crop of a NIfTI volume
//   gallery  montages + index.html for NIfTI volumes
//   report   re-aggregate an output directory with its verdict log
//   serve    review API over an output directory
//   synth    write a labelled synthetic corpus
// Exit codes: 0 ran, 1 configuration error, 2 corpus had failures.

#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <iostream>

#include "ctqa/error.hpp"
#include "ctqa/nifti.hpp"
#include "ctqa/orientation.hpp"
#include "ctqa/pipeline.hpp"
#include "ctqa/review_service.hpp"
#include "ctqa/synth.hpp"
#include "ctqa/volume.hpp"

namespace fs = std::filesystem;
using namespace ctqa;

namespace {

ReviewService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

// Threshold / stage flags shared by qa. Flags that were given override the
// config file.
struct QaFlags {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_override(CLI::App* app, QaFlags& flags, const std::string& flag, const std::string& key,
                  const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&flags, key](const std::string& v) { flags.overrides.emplace_back(key, v); }, help);
}

std::vector<PixelSlab> decode_all(const SeriesManifest& m) {
  std::vector<PixelSlab> slabs;
  for (const auto& h : m.slices) slabs.push_back(decode_pixels(h, read_file_bytes(h.source_path)));
  return slabs;
}

int run_convert(const std::string& dir, const std::string& out, bool reorient) {
  std::vector<SliceHeader> headers;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (!(ext.empty() || ext == ".dcm" || ext == ".DCM" || ext == ".ima" || ext == ".IMA")) continue;
    SliceHeader h = parse_slice(read_file_bytes(e.path().string()));
    h.source_path = e.path().string();
    headers.push_back(std::move(h));
  }
  const SeriesManifest m = build_manifest(std::move(headers));
  Volume v = assemble_volume(m, decode_all(m));
  v.series_uid = m.series_uid;
  if (reorient) v = reorient_to_standard(v);
  save_nifti(out, v);
  std::cout << out << ": " << v.dims[0] << "x" << v.dims[1] << "x" << v.dims[2] << " " << orientation_code(v.affine)
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CT series quality assessment"};
  app.require_subcommand(1);

  // qa
  auto* qa = app.add_subcommand("qa", "run the full pipeline over a corpus");
  QaFlags qa_flags;
  qa->add_option("-c,--config", qa_flags.config_path, "key = value config file");
  add_override(qa, qa_flags, "-i,--input", "input", "corpus root");
  add_override(qa, qa_flags, "-o,--output", "output", "output root");
  add_override(qa, qa_flags, "--epsilon", "epsilon", "slice distance tolerance (C3)");
  add_override(qa, qa_flags, "--epsilon-mode", "epsilon_mode", "relative | absolute");
  add_override(qa, qa_flags, "--delta", "delta", "minimum slice count (C4)");
  add_override(qa, qa_flags, "--sigma1", "sigma1", "lower physical length bound, mm (C5)");
  add_override(qa, qa_flags, "--sigma2", "sigma2", "upper physical length bound, mm (C5)");
  add_override(qa, qa_flags, "--phi-x", "phi_x", "max voxel size x, mm (C7)");
  add_override(qa, qa_flags, "--phi-y", "phi_y", "max voxel size y, mm (C7)");
  add_override(qa, qa_flags, "--phi-z", "phi_z", "max voxel size z, mm (C7)");
  add_override(qa, qa_flags, "--phi-min-x", "phi_min_x", "min voxel size x, mm (C7)");
  add_override(qa, qa_flags, "--phi-min-y", "phi_min_y", "min voxel size y, mm (C7)");
  add_override(qa, qa_flags, "--phi-min-z", "phi_min_z", "min voxel size z, mm (C7)");
  for (const char* stage : {"c1", "c2", "c3", "c4", "c5", "c6", "c7", "reorient", "crop", "gallery",
                            "assemble_on_failure", "blind_review", "resume"}) {
    std::string flag = std::string("--") + stage;
    std::replace(flag.begin(), flag.end(), '_', '-');
    add_override(qa, qa_flags, flag, stage, "on | off");
  }
  add_override(qa, qa_flags, "--session-policy", "session_policy", "largest-slice-count | all");
  add_override(qa, qa_flags, "--review-sample", "review_sample_size", "scans sampled for review");
  add_override(qa, qa_flags, "--review-seed", "review_seed", "sampling seed");
  add_override(qa, qa_flags, "-j,--workers", "workers", "parallel scans (0: all cores)");
  add_override(qa, qa_flags, "--margin", "crop_margin", "ROI margin as a fraction of the lung extent");
  add_override(qa, qa_flags, "--mask-threshold-hu", "mask_threshold_hu", "lung mask threshold, HU");
  add_override(qa, qa_flags, "--dilation-radius", "dilation_radius", "lung mask dilation, voxels");
  add_override(qa, qa_flags, "--second-lung-ratio", "second_lung_ratio", "keep a second component above this size ratio");
  add_override(qa, qa_flags, "--tile-size", "tile_size", "montage tile edge, pixels");
  add_override(qa, qa_flags, "--window-center", "window_center", "montage window center, HU");
  add_override(qa, qa_flags, "--window-width", "window_width", "montage window width, HU");
  add_override(qa, qa_flags, "--fixed-clock", "fixed_clock", "generated_at value (reproducible runs)");
  add_override(qa, qa_flags, "--corpus-id", "corpus_id", "corpus name in the report");

  // convert
  auto* convert = app.add_subcommand("convert", "assemble one DICOM series into NIfTI");
  std::string convert_dir, convert_out;
  bool convert_reorient = false;
  convert->add_option("dicom_dir", convert_dir)->required()->check(CLI::ExistingDirectory);
  convert->add_option("output", convert_out, "*.nii or *.nii.gz")->required();
  convert->add_flag("--reorient", convert_reorient, "reorient to standard");

  // crop
  auto* crop = app.add_subcommand("crop", "crop a NIfTI volume to the lung ROI");
  std::string crop_in, crop_out;
  double crop_margin = 0.10;
  crop->add_option("input", crop_in)->required()->check(CLI::ExistingFile);
  crop->add_option("output", crop_out)->required();
  crop->add_option("--margin", crop_margin, "fraction of the lung extent")->check(CLI::NonNegativeNumber);

  // gallery
  auto* gallery = app.add_subcommand("gallery", "render montages and an index page");
  std::vector<std::string> gallery_in;
  std::string gallery_out;
  bool gallery_blind = false;
  gallery->add_option("volumes", gallery_in, "NIfTI files")->required()->check(CLI::ExistingFile);
  gallery->add_option("-o,--output", gallery_out)->required();
  gallery->add_flag("--blind", gallery_blind);

  // report
  auto* report = app.add_subcommand("report", "merge verdicts and rewrite the report files");
  std::string report_dir, report_clock;
  report->add_option("output_root", report_dir)->required()->check(CLI::ExistingDirectory);
  report->add_option("--fixed-clock", report_clock);

  // serve
  auto* serve = app.add_subcommand("serve", "review API over an output directory");
  std::string serve_dir, serve_host = "127.0.0.1";
  int serve_port = 8080;
  bool serve_blind = false;
  serve->add_option("output_root", serve_dir)->required()->check(CLI::ExistingDirectory);
  serve->add_option("--host", serve_host);
  serve->add_option("--port", serve_port);
  serve->add_flag("--blind", serve_blind);

  // synth
  auto* synth = app.add_subcommand("synth", "write a labelled synthetic corpus");
  std::string synth_root;
  int synth_clean = 20, synth_per_defect = 10;
  std::uint64_t synth_seed = 1;
  std::vector<std::string> synth_defects;
  synth::Geometry synth_geometry;
  synth->add_option("output", synth_root)->required();
  synth->add_option("--clean", synth_clean)->check(CLI::NonNegativeNumber);
  synth->add_option("--per-defect", synth_per_defect)->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--defects", synth_defects, "defect kinds (default: the six objective classes)");
  synth->add_option("--rows", synth_geometry.rows);
  synth->add_option("--cols", synth_geometry.cols);
  synth->add_option("--slices", synth_geometry.slices);
  synth->add_option("--step", synth_geometry.slice_step, "slice step, mm");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*qa) {
      PipelineConfig config;
      if (!qa_flags.config_path.empty()) config = load_config(qa_flags.config_path);
      for (const auto& [key, value] : qa_flags.overrides) apply_config_value(config, key, value);
      const QaReport r = run_pipeline(config);
      std::cout << r.scans.size() << " scans, " << r.total_failed << " failed, " << r.unparseable
                << " unparseable -> " << config.output_root << "\n";
      return r.total_failed > 0 ? 2 : 0;
    }
    if (*convert) return run_convert(convert_dir, convert_out, convert_reorient);
    if (*crop) {
      const Volume v = load_nifti(crop_in);
      const LungMask mask = lung_mask(v);
      const Volume roi = crop_roi(v, mask, crop_margin);
      save_nifti(crop_out, roi);
      std::cout << crop_out << ": " << roi.dims[0] << "x" << roi.dims[1] << "x" << roi.dims[2] << "\n";
      return 0;
    }
    if (*gallery) {
      fs::create_directories(gallery_out);
      std::vector<GalleryEntry> entries;
      for (const auto& path : gallery_in) {
        std::string id = fs::path(path).filename().string();
        for (const char* ext : {".gz", ".nii"}) {
          if (id.size() > std::strlen(ext) && id.ends_with(ext)) id.resize(id.size() - std::strlen(ext));
        }
        Montage m = render_montage(load_nifti(path));
        write_png((fs::path(gallery_out) / (id + ".png")).string(), m);
        entries.push_back({id, id + ".png", {}, {}});
      }
      write_text_file((fs::path(gallery_out) / "index.html").string(), build_index(entries, gallery_blind));
      return 0;
    }
    if (*report) {
      const QaReport r = finalize_report(report_dir, report_clock);
      std::cout << r.scans.size() << " scans, " << r.total_failed << " failed\n";
      return r.total_failed > 0 ? 2 : 0;
    }
    if (*serve) {
      ReviewService service({serve_dir, serve_blind, 50, {}});
      const int port = service.bind(serve_host, serve_port);
      if (port < 0) throw Error(ErrorCode::IoFailure, "cannot bind " + serve_host + ":" + std::to_string(serve_port));
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "serving " << serve_dir << " on http://" << serve_host << ":" << port << "/" << std::endl;
      service.listen();
      g_service = nullptr;
      return 0;
    }
    if (*synth) {
      std::vector<synth::DefectKind> kinds;
      if (synth_defects.empty()) {
        kinds.assign(synth::kObjectiveDefects.begin(), synth::kObjectiveDefects.end());
      } else {
        for (const auto& d : synth_defects) {
          auto k = synth::parse_defect_kind(d);
          if (!k) throw Error(ErrorCode::ConfigInvalid, "unknown defect kind '" + d + "'");
          kinds.push_back(*k);
        }
      }
      const auto entries =
          synth::write_corpus(synth_root, synth_clean, synth_per_defect, kinds, synth_seed, synth_geometry);
      std::cout << entries.size() << " series -> " << synth_root << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "ctqa: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ctqa: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
