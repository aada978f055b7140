#pragma once

// DICOM-level objective checks C1-C5 over one series.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctqa/dicom.hpp"

namespace ctqa {

enum class CheckId { C1, C2, C3, C4, C5, C6, C7, SUBJ };

inline constexpr std::array<CheckId, 7> kObjectiveChecks{CheckId::C1, CheckId::C2, CheckId::C3, CheckId::C4,
                                                         CheckId::C5, CheckId::C6, CheckId::C7};

std::string_view to_string(CheckId id);
std::optional<CheckId> parse_check_id(std::string_view text);

enum class GeometrySource { SliceLocation, ImagePosition };

struct SeriesManifest {
  std::string series_uid;
  std::vector<SliceHeader> slices;       // instance-number order
  std::vector<double> locations;         // per-slice axial position, same order as slices
  std::vector<double> slice_distances;   // locations[i+1] - locations[i]
  double modal_spacing = 0.0;
  double physical_length = 0.0;
  GeometrySource geometry = GeometrySource::SliceLocation;

  std::size_t slice_count() const { return slices.size(); }
};

// Slice-distance tolerance: either absolute millimetres or a multiple of the
// series' modal spacing.
struct Epsilon {
  bool relative = true;
  double value = 0.1;

  double resolve(double modal_spacing) const;
};

struct QaThresholds {
  Epsilon epsilon;
  std::int64_t delta = 50;
  double sigma1 = 200.0;
  double sigma2 = 500.0;
  std::array<double, 3> phi{1.0, 1.0, 5.0};
  std::optional<std::array<double, 3>> phi_min;  // lower resolution bounds, off by default

  void validate() const;  // throws ConfigInvalid
};

struct QaFinding {
  CheckId check = CheckId::C1;
  bool applicable = true;
  std::int64_t value = 0;
  bool passed = true;
  std::string detail;
  std::vector<std::int64_t> indices;  // missing/duplicated INs or violating distance indices

  static QaFinding not_applicable(CheckId id, std::string why);
};

/// Smallest absolute tolerance used when the relative epsilon collapses to 0.
inline constexpr double kMinEpsilonMm = 1e-3;

SeriesManifest build_manifest(std::vector<SliceHeader> headers);

std::pair<QaFinding, QaFinding> check_instance_numbers(const SeriesManifest& manifest);
QaFinding check_slice_distance(const SeriesManifest& manifest, const QaThresholds& thresholds);
QaFinding check_few_slices(const SeriesManifest& manifest, const QaThresholds& thresholds);
QaFinding check_physical_length(const SeriesManifest& manifest, const QaThresholds& thresholds);

// Formula-level forms, exposed for oracle testing.
std::int64_t missing_instance_count(std::span<const std::int64_t> instance_numbers);
std::int64_t duplicate_pair_count(std::span<const std::int64_t> instance_numbers);

struct SliceDistanceEvaluation {
  std::int64_t below_epsilon = 0;  // literal term: sd_i < eps
  std::int64_t non_uniform = 0;    // |sd_i - modal| > eps
  std::vector<std::int64_t> violations;
  std::vector<std::string> labels;
};

/// `distances` are taken in acquisition order; both terms are evaluated on
/// distances oriented along the dominant stacking direction.
SliceDistanceEvaluation evaluate_slice_distances(std::span<const double> distances, double modal_spacing,
                                                 double epsilon);

/// Most frequent |d| after rounding to 1e-3 mm; ties resolve to the smaller value.
double modal_abs_spacing(std::span<const double> distances);

/// +1 when the majority of nonzero distances are positive, else -1.
int dominant_direction(std::span<const double> distances);

struct DicomQaToggles {
  bool c1 = true, c2 = true, c3 = true, c4 = true, c5 = true;
};

/// Findings for C1..C5 in that order; never throws.
std::vector<QaFinding> run_dicom_qa(const SeriesManifest& manifest, const QaThresholds& thresholds,
                                    const DicomQaToggles& toggles = {});

}  // namespace ctqa
