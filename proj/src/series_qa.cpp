#include "ctqa/series_qa.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "ctqa/error.hpp"

namespace ctqa {
namespace {

constexpr std::size_t kMaxListed = 1000;

std::array<double, 3> slice_normal(const std::array<double, 6>& o) {
  return {o[1] * o[5] - o[2] * o[4], o[2] * o[3] - o[0] * o[5], o[0] * o[4] - o[1] * o[3]};
}

template <typename T>
std::string join(const std::vector<T>& values, std::size_t limit = 20) {
  std::ostringstream os;
  for (std::size_t i = 0; i < values.size() && i < limit; ++i) os << (i ? "," : "") << values[i];
  if (values.size() > limit) os << ",... (" << values.size() << " total)";
  return os.str();
}

}  // namespace

std::string_view to_string(CheckId id) {
  switch (id) {
    case CheckId::C1: return "C1";
    case CheckId::C2: return "C2";
    case CheckId::C3: return "C3";
    case CheckId::C4: return "C4";
    case CheckId::C5: return "C5";
    case CheckId::C6: return "C6";
    case CheckId::C7: return "C7";
    case CheckId::SUBJ: return "SUBJ";
  }
  return "?";
}

std::optional<CheckId> parse_check_id(std::string_view text) {
  for (auto id : {CheckId::C1, CheckId::C2, CheckId::C3, CheckId::C4, CheckId::C5, CheckId::C6, CheckId::C7,
                  CheckId::SUBJ}) {
    if (to_string(id) == text) return id;
  }
  return std::nullopt;
}

double Epsilon::resolve(double modal_spacing) const {
  const double eps = relative ? value * modal_spacing : value;
  return std::max(eps, kMinEpsilonMm);
}

void QaThresholds::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::ConfigInvalid, why); };
  if (!(epsilon.value > 0)) fail("epsilon must be > 0");
  if (delta < 1) fail("delta must be >= 1");
  if (!(sigma1 > 0) || !(sigma1 < sigma2)) fail("require 0 < sigma1 < sigma2");
  for (double p : phi) {
    if (!(p > 0)) fail("phi components must be > 0");
  }
  if (phi_min) {
    for (int i = 0; i < 3; ++i) {
      if (!((*phi_min)[i] >= 0) || !((*phi_min)[i] < phi[i])) fail("phi_min must lie in [0, phi)");
    }
  }
}

QaFinding QaFinding::not_applicable(CheckId id, std::string why) {
  QaFinding f;
  f.check = id;
  f.applicable = false;
  f.passed = true;
  f.detail = std::move(why);
  return f;
}

SeriesManifest build_manifest(std::vector<SliceHeader> headers) {
  if (headers.empty()) throw Error(ErrorCode::EmptySeries, "no slices");
  const std::string uid = headers.front().series_uid;
  for (const auto& h : headers) {
    if (h.series_uid != uid) throw Error(ErrorCode::MixedSeries, "'" + uid + "' vs '" + h.series_uid + "'");
  }

  const bool all_location = std::all_of(headers.begin(), headers.end(),
                                        [](const SliceHeader& h) { return h.slice_location.has_value(); });
  const bool all_position = std::all_of(headers.begin(), headers.end(),
                                        [](const SliceHeader& h) { return h.image_position.has_value(); });
  if (!all_location && !all_position) throw Error(ErrorCode::NoGeometry, "no complete slice geometry");

  SeriesManifest m;
  m.series_uid = uid;
  m.geometry = all_location ? GeometrySource::SliceLocation : GeometrySource::ImagePosition;

  std::array<double, 3> normal{0.0, 0.0, 1.0};
  if (!all_location) {
    for (const auto& h : headers) {
      if (h.image_orientation) {
        normal = slice_normal(*h.image_orientation);
        break;
      }
    }
  }
  auto location_of = [&](const SliceHeader& h) {
    if (all_location) return *h.slice_location;
    const auto& p = *h.image_position;
    return p[0] * normal[0] + p[1] * normal[1] + p[2] * normal[2];
  };

  std::vector<std::size_t> order(headers.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> raw(headers.size());
  for (std::size_t i = 0; i < headers.size(); ++i) raw[i] = location_of(headers[i]);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (headers[a].instance_number != headers[b].instance_number) {
      return headers[a].instance_number < headers[b].instance_number;
    }
    if (raw[a] != raw[b]) return raw[a] < raw[b];
    return headers[a].source_path < headers[b].source_path;
  });

  m.slices.reserve(headers.size());
  m.locations.reserve(headers.size());
  for (std::size_t i : order) {
    m.slices.push_back(std::move(headers[i]));
    m.locations.push_back(raw[i]);
  }
  for (std::size_t i = 0; i + 1 < m.locations.size(); ++i) {
    m.slice_distances.push_back(m.locations[i + 1] - m.locations[i]);
  }
  m.modal_spacing = modal_abs_spacing(m.slice_distances);
  const auto [lo, hi] = std::minmax_element(m.locations.begin(), m.locations.end());
  m.physical_length = *hi - *lo;
  return m;
}

std::int64_t missing_instance_count(std::span<const std::int64_t> ins) {
  if (ins.empty()) return 0;
  const auto [lo, hi] = std::minmax_element(ins.begin(), ins.end());
  return *hi - *lo + 1 - static_cast<std::int64_t>(ins.size());
}

std::int64_t duplicate_pair_count(std::span<const std::int64_t> ins) {
  std::map<std::int64_t, std::int64_t> multiplicity;
  for (auto v : ins) ++multiplicity[v];
  std::int64_t pairs = 0;
  for (const auto& [value, k] : multiplicity) pairs += k * (k - 1) / 2;
  return pairs;
}

std::pair<QaFinding, QaFinding> check_instance_numbers(const SeriesManifest& manifest) {
  std::vector<std::int64_t> ins;
  ins.reserve(manifest.slices.size());
  for (const auto& s : manifest.slices) ins.push_back(s.instance_number);

  QaFinding c1;
  c1.check = CheckId::C1;
  c1.value = missing_instance_count(ins);
  c1.passed = c1.value == 0;

  QaFinding c2;
  c2.check = CheckId::C2;
  c2.value = duplicate_pair_count(ins);
  c2.passed = c2.value == 0;

  // ins is sorted (manifest invariant).
  for (std::size_t i = 0; i + 1 < ins.size(); ++i) {
    for (std::int64_t v = ins[i] + 1; v < ins[i + 1] && c1.indices.size() < kMaxListed; ++v) {
      c1.indices.push_back(v);
    }
    if (ins[i] == ins[i + 1] && (c2.indices.empty() || c2.indices.back() != ins[i])) {
      c2.indices.push_back(ins[i]);
    }
  }
  std::ostringstream d1;
  d1 << "C1=" << c1.value;
  if (!c1.indices.empty()) d1 << "; missing IN " << join(c1.indices);
  c1.detail = d1.str();
  std::ostringstream d2;
  d2 << "C2=" << c2.value;
  if (!c2.indices.empty()) d2 << "; duplicated IN " << join(c2.indices);
  c2.detail = d2.str();
  return {c1, c2};
}

double modal_abs_spacing(std::span<const double> distances) {
  if (distances.empty()) return 0.0;
  std::map<long long, std::size_t> counts;
  for (double d : distances) ++counts[std::llround(std::abs(d) * 1000.0)];
  long long best_key = 0;
  std::size_t best = 0;
  for (const auto& [key, count] : counts) {
    if (count > best) {
      best = count;
      best_key = key;
    }
  }
  return static_cast<double>(best_key) / 1000.0;
}

int dominant_direction(std::span<const double> distances) {
  std::size_t pos = 0, neg = 0;
  for (double d : distances) {
    if (d > 0) ++pos;
    if (d < 0) ++neg;
  }
  return neg > pos ? -1 : 1;
}

SliceDistanceEvaluation evaluate_slice_distances(std::span<const double> distances, double modal_spacing,
                                                 double epsilon) {
  SliceDistanceEvaluation ev;
  const int direction = dominant_direction(distances);
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const double sd = direction * distances[i];
    const bool below = sd < epsilon;
    const bool uneven = std::abs(sd - modal_spacing) > epsilon;
    if (below) ++ev.below_epsilon;
    if (uneven) ++ev.non_uniform;
    if (below || uneven) {
      ev.violations.push_back(static_cast<std::int64_t>(i));
      ev.labels.push_back(below && uneven ? "sd<eps,non-uniform" : below ? "sd<eps" : "non-uniform");
    }
  }
  return ev;
}

QaFinding check_slice_distance(const SeriesManifest& manifest, const QaThresholds& thresholds) {
  if (manifest.slice_count() < 2) {
    return QaFinding::not_applicable(CheckId::C3, "TooFewSlices: no slice distances");
  }
  const double eps = thresholds.epsilon.resolve(manifest.modal_spacing);
  const auto ev = evaluate_slice_distances(manifest.slice_distances, manifest.modal_spacing, eps);

  QaFinding f;
  f.check = CheckId::C3;
  f.value = ev.below_epsilon + ev.non_uniform;
  f.passed = f.value == 0;
  f.indices = ev.violations;
  std::ostringstream os;
  os << "C3=" << f.value << " (sd<eps: " << ev.below_epsilon << ", non-uniform: " << ev.non_uniform
     << "); modal=" << manifest.modal_spacing << "mm eps=" << eps << "mm";
  for (std::size_t i = 0; i < ev.violations.size() && i < 20; ++i) {
    const auto idx = static_cast<std::size_t>(ev.violations[i]);
    os << "; [" << idx << "] sd=" << manifest.slice_distances[idx] << " " << ev.labels[i];
  }
  if (ev.violations.size() > 20) os << "; ...";
  f.detail = os.str();
  return f;
}

QaFinding check_few_slices(const SeriesManifest& manifest, const QaThresholds& thresholds) {
  QaFinding f;
  f.check = CheckId::C4;
  const auto n = static_cast<std::int64_t>(manifest.slice_count());
  f.value = n < thresholds.delta ? 1 : 0;
  f.passed = f.value == 0;
  f.detail = std::to_string(n) + " slices, delta=" + std::to_string(thresholds.delta);
  return f;
}

QaFinding check_physical_length(const SeriesManifest& manifest, const QaThresholds& thresholds) {
  QaFinding f;
  f.check = CheckId::C5;
  const double pl = manifest.physical_length;
  f.value = (thresholds.sigma1 < pl && pl < thresholds.sigma2) ? 1 : 0;
  f.passed = f.value == 1;
  std::ostringstream os;
  os << "PL=" << pl << "mm, bounds (" << thresholds.sigma1 << ", " << thresholds.sigma2 << ")";
  f.detail = os.str();
  return f;
}

std::vector<QaFinding> run_dicom_qa(const SeriesManifest& manifest, const QaThresholds& thresholds,
                                    const DicomQaToggles& toggles) {
  std::vector<QaFinding> out;
  auto [c1, c2] = check_instance_numbers(manifest);
  out.push_back(toggles.c1 ? c1 : QaFinding::not_applicable(CheckId::C1, "disabled"));
  out.push_back(toggles.c2 ? c2 : QaFinding::not_applicable(CheckId::C2, "disabled"));
  out.push_back(toggles.c3 ? check_slice_distance(manifest, thresholds)
                           : QaFinding::not_applicable(CheckId::C3, "disabled"));
  out.push_back(toggles.c4 ? check_few_slices(manifest, thresholds)
                           : QaFinding::not_applicable(CheckId::C4, "disabled"));
  out.push_back(toggles.c5 ? check_physical_length(manifest, thresholds)
                           : QaFinding::not_applicable(CheckId::C5, "disabled"));
  return out;
}

}  // namespace ctqa
