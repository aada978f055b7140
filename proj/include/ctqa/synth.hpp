#pragma once

// Ground-truth-labelled synthetic CT series: an analytic chest phantom
// (ellipsoidal body with two lung ellipsoids in air) written as DICOM slices,
// plus injectors for each structural defect class.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctqa/series_qa.hpp"
#include "ctqa/volume.hpp"

namespace ctqa::synth {

/// How the in-plane pixel grid is laid out in patient (LPS) space. All layouts
/// sample the same world grid, so reorientation recovers the Standard volume.
enum class Layout { Standard, FlipX, FlipY, SwapXY };

std::string_view to_string(Layout layout);

struct Geometry {
  int rows = 64;
  int cols = 64;
  int slices = 100;
  double row_spacing = 0.7;  // mm between rows (y)
  double col_spacing = 0.7;  // mm between columns (x)
  double slice_step = 2.5;   // mm
  Vec3 center{0.0, 0.0, 0.0};  // LPS centre of the scanned box
  double z_offset = 0.0;       // shift of the scan window relative to the phantom
  bool descending_instances = false;
  Layout layout = Layout::Standard;
  bool explicit_vr = true;

  void validate() const;  // throws InvalidGeometry
  double physical_length() const { return (slices - 1) * slice_step; }
};

struct Phantom {
  Vec3 center{0.0, 0.0, 0.0};  // LPS
  Vec3 body_axes{1, 1, 1};     // semi-axes, mm
  Vec3 lung_axes{1, 1, 1};
  double lung_offset_x = 0.0;  // lung centres at centre +/- offset along x
  bool right_lung = true;
  bool left_lung = true;
  double body_hu = 0.0;
  double lung_hu = -800.0;
  double air_hu = -1000.0;

  bool in_body(const Vec3& p) const;
  bool in_lung(const Vec3& p) const;
  double hu_at(const Vec3& p) const;
  double lung_volume_mm3() const;  // analytic 4/3 pi abc per lung
};

/// Default chest phantom sized relative to the geometry's field of view and
/// axial extent.
Phantom chest_phantom(const Geometry& geometry);

struct Slice {
  std::int64_t instance_number = 0;
  Vec3 position{};                 // ImagePositionPatient (LPS)
  std::array<double, 6> orientation{1, 0, 0, 0, 1, 0};
  double slice_location = 0.0;
  int rows = 0;
  int cols = 0;
  double row_spacing = 0.0;
  double col_spacing = 0.0;
  std::vector<std::uint16_t> stored;  // HU + 1024, row-major
  std::string sop_uid;
};

enum class DefectKind {
  DropSlices,
  DuplicateChunk,
  Truncate,
  WholeBodyLength,
  NonstandardOrientation,
  CoarseResolution,
  PartialLung,
  UnparseableBytes,
};

std::string_view to_string(DefectKind kind);
std::optional<DefectKind> parse_defect_kind(std::string_view text);

inline constexpr std::array<DefectKind, 6> kObjectiveDefects{
    DefectKind::DropSlices,      DefectKind::DuplicateChunk,         DefectKind::Truncate,
    DefectKind::WholeBodyLength, DefectKind::NonstandardOrientation, DefectKind::CoarseResolution};

struct DefectSpec {
  DefectKind kind = DefectKind::DropSlices;
  int count = 1;             // slices dropped / duplicated / kept (truncate) / total (whole-body, coarse)
  std::vector<int> indices;  // explicit slice indices (drop) or chunk start (duplicate)
  double step_mm = 0.0;      // coarse_resolution slice step
  Layout layout = Layout::FlipX;
  int file_index = 0;        // unparseable_bytes target
  std::uint64_t seed = 0;

  /// Randomised parameters valid for `geometry` under `thresholds`.
  static DefectSpec sample(DefectKind kind, const Geometry& geometry, const QaThresholds& thresholds,
                           std::uint64_t seed);
};

/// Analytically expected outcome of one check. `value` is set where the
/// closed form is exact.
struct ExpectedCheck {
  bool applicable = true;
  bool fails = false;
  std::optional<std::int64_t> value;
};

struct Truth {
  std::map<CheckId, ExpectedCheck> checks;  // C1..C7
  bool unparseable = false;
  bool expect_mask_warning = false;
  bool expect_reorientation = false;
  std::vector<std::string> entailments;  // why each expected failure follows
  double lung_volume_analytic_mm3 = 0.0;
  double lung_volume_voxel_mm3 = 0.0;

  std::set<CheckId> failing() const;
};

struct Series {
  std::string name;
  Geometry geometry;
  Phantom phantom;
  std::string study_uid;
  std::string series_uid;
  std::vector<Slice> slices;  // file order
  std::optional<DefectSpec> defect;
  std::optional<std::size_t> truncate_file;  // index into slices
  std::size_t truncate_keep_bytes = 0;
  Truth truth;
};

/// Renders a clean series. Throws InvalidGeometry.
Series generate_series(const Geometry& geometry, const Phantom& phantom, std::uint64_t seed,
                       const QaThresholds& thresholds = {});

/// Applies `spec` to a clean series and recomputes the expected findings.
/// Throws IncompatibleDefect when the parameters do not fit the series.
Series inject_defect(const Series& clean, const DefectSpec& spec, const QaThresholds& thresholds = {});

/// Encodes one slice as a DICOM file.
std::vector<std::uint8_t> encode_slice(const Series& series, std::size_t slice_index);

/// Writes `<directory>/IM*.dcm` and `<directory>.truth.json`.
void write_series(const Series& series, const std::string& directory);

nlohmann::json truth_json(const Series& series);

/// Decoded-in-memory reference volume in standard orientation, sampled on the
/// same grid the pipeline assembles (for voxelwise comparisons).
Volume reference_volume(const Series& series);

struct CorpusEntry {
  std::string name;
  std::string directory;
  Truth truth;
  std::optional<DefectKind> defect;
};

/// `clean_count` clean series followed by `per_defect` series for every kind
/// in `defects`.
std::vector<CorpusEntry> write_corpus(const std::string& root, int clean_count, int per_defect,
                                      const std::vector<DefectKind>& defects, std::uint64_t seed,
                                      const Geometry& base = {}, const QaThresholds& thresholds = {});

}  // namespace ctqa::synth
