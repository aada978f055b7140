#include "ctqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <cstdio>
#include <sstream>

#include "ctqa/dicom_writer.hpp"
#include "ctqa/error.hpp"

namespace ctqa::synth {
namespace {

using nlohmann::json;

constexpr double kHuOffset = 1024.0;

std::string uid_from(std::mt19937_64& rng) {
  // 2.25.<decimal> form; keep well under the 64-character UID limit.
  return "2.25." + std::to_string(rng() % 100000000000000000ull);
}

bool inside(const Vec3& p, const Vec3& c, const Vec3& axes) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = (p[i] - c[i]) / axes[i];
    s += d * d;
  }
  return s <= 1.0;
}

// World (LPS) coordinates of the clean grid.
struct Grid {
  std::vector<double> x, y, z;
};

Grid world_grid(const Geometry& g) {
  Grid grid;
  const double x0 = g.center[0] - (g.cols - 1) / 2.0 * g.col_spacing;
  const double y0 = g.center[1] - (g.rows - 1) / 2.0 * g.row_spacing;
  const double z0 = g.center[2] + g.z_offset - (g.slices - 1) / 2.0 * g.slice_step;
  for (int c = 0; c < g.cols; ++c) grid.x.push_back(x0 + c * g.col_spacing);
  for (int r = 0; r < g.rows; ++r) grid.y.push_back(y0 + r * g.row_spacing);
  for (int s = 0; s < g.slices; ++s) grid.z.push_back(z0 + s * g.slice_step);
  return grid;
}

std::uint16_t stored_value(double hu) { return static_cast<std::uint16_t>(std::lround(hu + kHuOffset)); }

Slice render_slice(const Geometry& g, const Phantom& ph, const Grid& grid, int s) {
  Slice sl;
  sl.slice_location = grid.z[s];
  const double z = grid.z[s];
  const int nx = g.cols, ny = g.rows;
  auto sample = [&](int xi, int yi) { return stored_value(ph.hu_at({grid.x[xi], grid.y[yi], z})); };

  switch (g.layout) {
    case Layout::Standard:
      sl.orientation = {1, 0, 0, 0, 1, 0};
      sl.rows = ny;
      sl.cols = nx;
      sl.row_spacing = g.row_spacing;
      sl.col_spacing = g.col_spacing;
      sl.position = {grid.x.front(), grid.y.front(), z};
      for (int r = 0; r < ny; ++r)
        for (int c = 0; c < nx; ++c) sl.stored.push_back(sample(c, r));
      break;
    case Layout::FlipX:
      sl.orientation = {-1, 0, 0, 0, 1, 0};
      sl.rows = ny;
      sl.cols = nx;
      sl.row_spacing = g.row_spacing;
      sl.col_spacing = g.col_spacing;
      sl.position = {grid.x.back(), grid.y.front(), z};
      for (int r = 0; r < ny; ++r)
        for (int c = 0; c < nx; ++c) sl.stored.push_back(sample(nx - 1 - c, r));
      break;
    case Layout::FlipY:
      sl.orientation = {1, 0, 0, 0, -1, 0};
      sl.rows = ny;
      sl.cols = nx;
      sl.row_spacing = g.row_spacing;
      sl.col_spacing = g.col_spacing;
      sl.position = {grid.x.front(), grid.y.back(), z};
      for (int r = 0; r < ny; ++r)
        for (int c = 0; c < nx; ++c) sl.stored.push_back(sample(c, ny - 1 - r));
      break;
    case Layout::SwapXY:
      // Rows run along x, columns along y.
      sl.orientation = {0, 1, 0, 1, 0, 0};
      sl.rows = nx;
      sl.cols = ny;
      sl.row_spacing = g.col_spacing;
      sl.col_spacing = g.row_spacing;
      sl.position = {grid.x.front(), grid.y.front(), z};
      for (int r = 0; r < nx; ++r)
        for (int c = 0; c < ny; ++c) sl.stored.push_back(sample(r, c));
      break;
  }
  return sl;
}

void render_all(Series& series) {
  const Geometry& g = series.geometry;
  const Grid grid = world_grid(g);
  series.slices.clear();
  for (int s = 0; s < g.slices; ++s) {
    Slice sl = render_slice(g, series.phantom, grid, s);
    sl.instance_number = g.descending_instances ? g.slices - s : s + 1;
    sl.sop_uid = series.series_uid + "." + std::to_string(s + 1);
    series.slices.push_back(std::move(sl));
  }
}

ExpectedCheck pass_with(std::int64_t value) { return {true, false, value}; }
ExpectedCheck na() { return {false, false, std::nullopt}; }

// Expected findings of an intact series with this geometry.
Truth baseline_truth(const Geometry& g, const QaThresholds& t) {
  Truth truth;
  const std::int64_t n = g.slices;
  truth.checks[CheckId::C1] = pass_with(0);
  truth.checks[CheckId::C2] = pass_with(0);
  truth.checks[CheckId::C3] = n >= 2 ? pass_with(0) : na();
  truth.checks[CheckId::C4] = {true, n < t.delta, n < t.delta ? 1 : 0};
  const double pl = g.physical_length();
  const bool pl_ok = t.sigma1 < pl && pl < t.sigma2;
  truth.checks[CheckId::C5] = {true, !pl_ok, pl_ok ? 1 : 0};
  if (n < t.delta) truth.entailments.push_back("C4: " + std::to_string(n) + " slices < delta");
  if (!pl_ok) {
    std::ostringstream os;
    os << "C5: PL=(n-1)*step=" << pl << "mm outside (" << t.sigma1 << ", " << t.sigma2 << ")";
    truth.entailments.push_back(os.str());
  }
  return truth;
}

// NIfTI-stage expectations; the pipeline only assembles when C1-C4 pass.
void add_nifti_truth(Truth& truth, const Geometry& g, const QaThresholds& t) {
  const bool gated = truth.checks[CheckId::C1].fails || truth.checks[CheckId::C2].fails ||
                     truth.checks[CheckId::C3].fails || truth.checks[CheckId::C4].fails;
  if (gated) {
    truth.checks[CheckId::C6] = na();
    truth.checks[CheckId::C7] = na();
    return;
  }
  const bool standard = g.layout == Layout::Standard;
  truth.checks[CheckId::C6] = {true, !standard, standard ? 1 : 0};
  truth.expect_reorientation = !standard;
  if (!standard) truth.entailments.push_back(std::string("C6: in-plane layout ") + std::string(to_string(g.layout)));
  std::int64_t c7 = 0;
  const double sizes[3] = {g.col_spacing, g.row_spacing, g.slice_step};
  for (int a = 0; a < 3; ++a) {
    if (sizes[a] > t.phi[a]) {
      ++c7;
      truth.entailments.push_back("C7: voxel size " + std::to_string(sizes[a]) + " > phi[" + std::to_string(a) + "]");
    }
  }
  truth.checks[CheckId::C7] = {true, c7 > 0, c7};
}

void lung_volumes(Series& series) {
  const Geometry& g = series.geometry;
  const Grid grid = world_grid(g);
  std::size_t count = 0;
  for (double z : grid.z)
    for (double y : grid.y)
      for (double x : grid.x)
        if (series.phantom.in_lung({x, y, z})) ++count;
  series.truth.lung_volume_voxel_mm3 = count * g.col_spacing * g.row_spacing * g.slice_step;
  series.truth.lung_volume_analytic_mm3 = series.phantom.lung_volume_mm3();
}

Series regenerate(const Series& clean, const Geometry& geometry) {
  Series s = clean;
  s.geometry = geometry;
  s.geometry.validate();
  render_all(s);
  return s;
}

json check_json(const ExpectedCheck& e) {
  json j = {{"applicable", e.applicable}, {"fails", e.fails}};
  j["value"] = e.value ? json(*e.value) : json(nullptr);
  return j;
}

}  // namespace

std::string_view to_string(Layout layout) {
  switch (layout) {
    case Layout::Standard: return "standard";
    case Layout::FlipX: return "flip_x";
    case Layout::FlipY: return "flip_y";
    case Layout::SwapXY: return "swap_xy";
  }
  return "?";
}

std::string_view to_string(DefectKind kind) {
  switch (kind) {
    case DefectKind::DropSlices: return "drop_slices";
    case DefectKind::DuplicateChunk: return "duplicate_chunk";
    case DefectKind::Truncate: return "truncate";
    case DefectKind::WholeBodyLength: return "whole_body_length";
    case DefectKind::NonstandardOrientation: return "nonstandard_orientation";
    case DefectKind::CoarseResolution: return "coarse_resolution";
    case DefectKind::PartialLung: return "partial_lung";
    case DefectKind::UnparseableBytes: return "unparseable_bytes";
  }
  return "?";
}

std::optional<DefectKind> parse_defect_kind(std::string_view text) {
  for (auto k : {DefectKind::DropSlices, DefectKind::DuplicateChunk, DefectKind::Truncate, DefectKind::WholeBodyLength,
                 DefectKind::NonstandardOrientation, DefectKind::CoarseResolution, DefectKind::PartialLung,
                 DefectKind::UnparseableBytes}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

void Geometry::validate() const {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidGeometry, why); };
  if (rows < 3 || cols < 3 || rows > 4096 || cols > 4096) bad("rows/cols must lie in [3, 4096]");
  if (slices < 1 || slices > 10000) bad("slice count must lie in [1, 10000]");
  if (!(row_spacing > 0) || !(col_spacing > 0) || !(slice_step > 0)) bad("spacings must be > 0");
}

bool Phantom::in_body(const Vec3& p) const { return inside(p, center, body_axes); }

bool Phantom::in_lung(const Vec3& p) const {
  if (!in_body(p)) return false;
  const Vec3 right{center[0] - lung_offset_x, center[1], center[2]};
  const Vec3 left{center[0] + lung_offset_x, center[1], center[2]};
  return (right_lung && inside(p, right, lung_axes)) || (left_lung && inside(p, left, lung_axes));
}

double Phantom::hu_at(const Vec3& p) const {
  if (!in_body(p)) return air_hu;
  return in_lung(p) ? lung_hu : body_hu;
}

double Phantom::lung_volume_mm3() const {
  const double one = 4.0 / 3.0 * std::numbers::pi * lung_axes[0] * lung_axes[1] * lung_axes[2];
  return one * ((right_lung ? 1 : 0) + (left_lung ? 1 : 0));
}

Phantom chest_phantom(const Geometry& g) {
  const double fov_x = g.cols * g.col_spacing;
  const double fov_y = g.rows * g.row_spacing;
  const double length = std::max(g.physical_length(), g.slice_step);
  Phantom p;
  p.center = g.center;
  p.body_axes = {0.42 * fov_x, 0.35 * fov_y, 0.6 * length};
  p.lung_axes = {0.14 * fov_x, 0.22 * fov_y, 0.38 * length};
  p.lung_offset_x = 0.19 * fov_x;
  return p;
}

std::set<CheckId> Truth::failing() const {
  std::set<CheckId> out;
  for (const auto& [id, e] : checks) {
    if (e.applicable && e.fails) out.insert(id);
  }
  return out;
}

Series generate_series(const Geometry& geometry, const Phantom& phantom, std::uint64_t seed,
                       const QaThresholds& thresholds) {
  geometry.validate();
  std::mt19937_64 rng(seed);
  Series s;
  s.name = "series";
  s.geometry = geometry;
  s.phantom = phantom;
  s.study_uid = uid_from(rng);
  s.series_uid = uid_from(rng);
  render_all(s);
  s.truth = baseline_truth(geometry, thresholds);
  add_nifti_truth(s.truth, geometry, thresholds);
  lung_volumes(s);
  return s;
}

DefectSpec DefectSpec::sample(DefectKind kind, const Geometry& g, const QaThresholds& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  DefectSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  const int n = g.slices;
  switch (kind) {
    case DefectKind::DropSlices: {
      spec.count = uniform(1, 3);
      // Non-adjacent interior indices, one per disjoint band.
      const int band = (n - 4) / spec.count;
      for (int b = 0; b < spec.count; ++b) spec.indices.push_back(2 + b * band + uniform(0, std::max(0, band - 2)));
      break;
    }
    case DefectKind::DuplicateChunk:
      spec.count = uniform(2, 8);
      spec.indices = {uniform(1, n - spec.count - 1)};
      break;
    case DefectKind::Truncate:
      spec.count = uniform(3, static_cast<int>(std::min<std::int64_t>(t.delta - 1, n)));
      spec.indices = {uniform(0, n - spec.count)};
      break;
    case DefectKind::WholeBodyLength:
      spec.count = static_cast<int>(std::ceil(t.sigma2 / g.slice_step)) + 1 + uniform(10, 60);
      break;
    case DefectKind::NonstandardOrientation: {
      const Layout layouts[] = {Layout::FlipX, Layout::FlipY, Layout::SwapXY};
      spec.layout = layouts[uniform(0, 2)];
      break;
    }
    case DefectKind::CoarseResolution: {
      // Coarser than phi_z while keeping slice count and length in range.
      spec.step_mm = t.phi[2] * (1.2 + 0.1 * uniform(0, 3));
      const int lo = static_cast<int>(std::max<double>(t.delta, std::floor(t.sigma1 / spec.step_mm) + 2));
      const int hi = static_cast<int>(std::ceil(t.sigma2 / spec.step_mm) - 1);
      spec.count = lo <= hi ? uniform(lo, hi) : lo;
      break;
    }
    case DefectKind::PartialLung:
      break;
    case DefectKind::UnparseableBytes:
      spec.file_index = uniform(0, n - 1);
      break;
  }
  return spec;
}

Series inject_defect(const Series& clean, const DefectSpec& spec, const QaThresholds& t) {
  if (clean.defect) throw Error(ErrorCode::IncompatibleDefect, "series already carries a defect");
  const Geometry& g = clean.geometry;
  const int n = g.slices;
  auto incompatible = [](const std::string& why) { throw Error(ErrorCode::IncompatibleDefect, why); };

  Series s = clean;
  s.defect = spec;
  switch (spec.kind) {
    case DefectKind::DropSlices: {
      std::vector<int> drop = spec.indices;
      std::sort(drop.begin(), drop.end());
      if (drop.empty()) incompatible("drop_slices needs indices");
      for (std::size_t i = 0; i < drop.size(); ++i) {
        if (drop[i] < 1 || drop[i] > n - 2) incompatible("dropped slices must be interior");
        if (i && drop[i] - drop[i - 1] < 2) incompatible("dropped slices must be non-adjacent");
      }
      std::vector<Slice> kept;
      for (int i = 0; i < n; ++i) {
        if (!std::binary_search(drop.begin(), drop.end(), i)) kept.push_back(clean.slices[i]);
      }
      s.slices = std::move(kept);
      const auto k = static_cast<std::int64_t>(drop.size());
      Geometry reduced = g;
      reduced.slices = n - static_cast<int>(k);
      s.truth = baseline_truth(reduced, t);
      s.truth.checks[CheckId::C5] = baseline_truth(g, t).checks[CheckId::C5];  // extent unchanged
      s.truth.checks[CheckId::C1] = {true, true, k};
      s.truth.checks[CheckId::C3] = {true, true, k};
      s.truth.entailments.push_back("C1: " + std::to_string(k) + " interior instance numbers missing");
      s.truth.entailments.push_back("C3: each gap spans 2 x modal spacing (non-uniform term)");
      add_nifti_truth(s.truth, g, t);
      break;
    }
    case DefectKind::DuplicateChunk: {
      if (spec.indices.empty()) incompatible("duplicate_chunk needs a start index");
      const int start = spec.indices.front();
      const int m = spec.count;
      if (m < 1 || start < 0 || start + m > n) incompatible("chunk outside series");
      for (int i = start; i < start + m; ++i) {
        Slice dup = clean.slices[i];
        dup.sop_uid += ".9";
        s.slices.push_back(std::move(dup));
      }
      Geometry grown = g;
      grown.slices = n + m;
      s.truth = baseline_truth(grown, t);
      s.truth.checks[CheckId::C5] = baseline_truth(g, t).checks[CheckId::C5];
      s.truth.checks[CheckId::C1] = {true, true, -m};
      s.truth.checks[CheckId::C2] = {true, true, m};
      s.truth.checks[CheckId::C3] = {true, true, 2 * static_cast<std::int64_t>(m)};
      s.truth.entailments.push_back("C1: max-min+1-size = -" + std::to_string(m));
      s.truth.entailments.push_back("C2: " + std::to_string(m) + " instance numbers appear twice");
      s.truth.entailments.push_back("C3: each duplicate adds a zero distance (both terms fire)");
      add_nifti_truth(s.truth, g, t);
      break;
    }
    case DefectKind::Truncate: {
      const int keep = spec.count;
      const int start = spec.indices.empty() ? 0 : spec.indices.front();
      if (keep < 1 || start < 0 || start + keep > n) incompatible("truncation window outside series");
      s.slices.assign(clean.slices.begin() + start, clean.slices.begin() + start + keep);
      Geometry cut = g;
      cut.slices = keep;
      s.truth = baseline_truth(cut, t);
      // Instance numbers stay contiguous; renumbering is not needed for C1 = 0.
      add_nifti_truth(s.truth, cut, t);
      break;
    }
    case DefectKind::WholeBodyLength: {
      Geometry longer = g;
      longer.slices = spec.count;
      if (!(longer.physical_length() > t.sigma2)) incompatible("whole-body extent must exceed sigma2");
      s = regenerate(clean, longer);
      s.defect = spec;
      s.truth = baseline_truth(longer, t);
      add_nifti_truth(s.truth, longer, t);
      break;
    }
    case DefectKind::NonstandardOrientation: {
      if (spec.layout == Layout::Standard) incompatible("layout must differ from standard");
      Geometry turned = g;
      turned.layout = spec.layout;
      s = regenerate(clean, turned);
      s.defect = spec;
      s.truth = baseline_truth(turned, t);
      add_nifti_truth(s.truth, turned, t);
      break;
    }
    case DefectKind::CoarseResolution: {
      Geometry coarse = g;
      coarse.slice_step = spec.step_mm;
      coarse.slices = spec.count;
      if (!(spec.step_mm > t.phi[2])) incompatible("coarse step must exceed phi_z");
      s = regenerate(clean, coarse);
      s.defect = spec;
      s.truth = baseline_truth(coarse, t);
      add_nifti_truth(s.truth, coarse, t);
      break;
    }
    case DefectKind::PartialLung: {
      Geometry shifted = g;
      shifted.z_offset = g.z_offset + 0.45 * g.physical_length();
      s = regenerate(clean, shifted);
      s.defect = spec;
      s.truth = baseline_truth(shifted, t);
      add_nifti_truth(s.truth, shifted, t);
      s.truth.expect_mask_warning = true;
      s.truth.entailments.push_back("ROI: lungs cut by the scan window, no interior lung component");
      break;
    }
    case DefectKind::UnparseableBytes: {
      if (spec.file_index < 0 || spec.file_index >= static_cast<int>(clean.slices.size())) {
        incompatible("file index outside series");
      }
      s.truncate_file = static_cast<std::size_t>(spec.file_index);
      s.truth = Truth{};
      for (auto id : kObjectiveChecks) s.truth.checks[id] = na();
      s.truth.unparseable = true;
      s.truth.entailments.push_back("file truncated inside the pixel data element");
      break;
    }
  }
  lung_volumes(s);
  return s;
}

std::vector<std::uint8_t> encode_slice(const Series& series, std::size_t index) {
  const Slice& sl = series.slices.at(index);
  DicomDataset ds;
  auto ds_list = [](std::initializer_list<double> values) {
    std::string out;
    for (double v : values) {
      if (!out.empty()) out += '\\';
      out += format_decimal_string(v);
    }
    return out;
  };
  ds.set_string(0x0008, 0x0016, "UI", "1.2.840.10008.5.1.4.1.1.2");
  ds.set_string(0x0008, 0x0018, "UI", sl.sop_uid);
  ds.set_string(0x0008, 0x0060, "CS", "CT");
  ds.set_sequence(0x0008, 0x1140,
                  {{DicomElement{0x0008, 0x1150, "UI", {'1', '.', '2', 0}, {}},
                    DicomElement{0x0008, 0x1155, "UI", {'1', '.', '2', '.', '3', 0}, {}}}});
  ds.set_string(0x0018, 0x0050, "DS", format_decimal_string(series.geometry.slice_step));
  ds.set_string(0x0020, 0x000D, "UI", series.study_uid);
  ds.set_string(0x0020, 0x000E, "UI", series.series_uid);
  ds.set_string(0x0020, 0x0013, "IS", std::to_string(sl.instance_number));
  ds.set_string(0x0020, 0x0032, "DS", ds_list({sl.position[0], sl.position[1], sl.position[2]}));
  ds.set_string(0x0020, 0x0037, "DS",
                ds_list({sl.orientation[0], sl.orientation[1], sl.orientation[2], sl.orientation[3], sl.orientation[4],
                         sl.orientation[5]}));
  ds.set_string(0x0020, 0x1041, "DS", format_decimal_string(sl.slice_location));
  ds.set_us(0x0028, 0x0002, 1);
  ds.set_string(0x0028, 0x0004, "CS", "MONOCHROME2");
  ds.set_us(0x0028, 0x0010, static_cast<std::uint16_t>(sl.rows));
  ds.set_us(0x0028, 0x0011, static_cast<std::uint16_t>(sl.cols));
  ds.set_string(0x0028, 0x0030, "DS", ds_list({sl.row_spacing, sl.col_spacing}));
  ds.set_us(0x0028, 0x0100, 16);
  ds.set_us(0x0028, 0x0101, 16);
  ds.set_us(0x0028, 0x0102, 15);
  ds.set_us(0x0028, 0x0103, 0);
  ds.set_string(0x0028, 0x1052, "DS", format_decimal_string(-kHuOffset));
  ds.set_string(0x0028, 0x1053, "DS", "1");
  std::vector<std::uint8_t> pixels(sl.stored.size() * 2);
  for (std::size_t i = 0; i < sl.stored.size(); ++i) {
    pixels[2 * i] = static_cast<std::uint8_t>(sl.stored[i] & 0xFF);
    pixels[2 * i + 1] = static_cast<std::uint8_t>(sl.stored[i] >> 8);
  }
  ds.set_bytes(0x7FE0, 0x0010, "OW", std::move(pixels));

  EncodeOptions options;
  options.explicit_vr = series.geometry.explicit_vr;
  auto bytes = ds.encode(options);
  if (series.truncate_file && *series.truncate_file == index) {
    // Cut inside the pixel data value, which is the final element.
    const std::size_t pixel_bytes = sl.stored.size() * 2;
    bytes.resize(bytes.size() - pixel_bytes + std::min<std::size_t>(10, pixel_bytes - 1));
  }
  return bytes;
}

json truth_json(const Series& series) {
  json checks = json::object();
  for (const auto& [id, e] : series.truth.checks) checks[std::string(to_string(id))] = check_json(e);
  json failing = json::array();
  for (auto id : series.truth.failing()) failing.push_back(std::string(to_string(id)));
  const Geometry& g = series.geometry;
  json j = {{"name", series.name},
            {"series_uid", series.series_uid},
            {"geometry",
             {{"rows", g.rows},
              {"cols", g.cols},
              {"slices", g.slices},
              {"row_spacing", g.row_spacing},
              {"col_spacing", g.col_spacing},
              {"slice_step", g.slice_step},
              {"z_offset", g.z_offset},
              {"descending_instances", g.descending_instances},
              {"layout", std::string(to_string(g.layout))},
              {"explicit_vr", g.explicit_vr}}},
            {"files", series.slices.size()},
            {"expected_checks", checks},
            {"expected_failing", failing},
            {"unparseable", series.truth.unparseable},
            {"expect_mask_warning", series.truth.expect_mask_warning},
            {"expect_reorientation", series.truth.expect_reorientation},
            {"entailments", series.truth.entailments},
            {"lung_volume_analytic_mm3", series.truth.lung_volume_analytic_mm3},
            {"lung_volume_voxel_mm3", series.truth.lung_volume_voxel_mm3}};
  if (series.defect) {
    const auto& d = *series.defect;
    j["defect"] = {{"kind", std::string(to_string(d.kind))},
                   {"count", d.count},
                   {"indices", d.indices},
                   {"step_mm", d.step_mm},
                   {"layout", std::string(to_string(d.layout))},
                   {"file_index", d.file_index},
                   {"seed", d.seed}};
  } else {
    j["defect"] = nullptr;
  }
  return j;
}

void write_series(const Series& series, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  for (std::size_t i = 0; i < series.slices.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "IM%05zu.dcm", i);
    const auto bytes = encode_slice(series, i);
    std::ofstream out(fs::path(directory) / name, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + (fs::path(directory) / name).string());
  }
  fs::path truth_path = fs::path(directory);
  if (!truth_path.has_filename()) truth_path = truth_path.parent_path();
  truth_path += ".truth.json";
  std::ofstream truth(truth_path);
  truth << truth_json(series).dump(2) << '\n';
  if (!truth) throw Error(ErrorCode::IoFailure, "cannot write " + truth_path.string());
}

Volume reference_volume(const Series& series) {
  const Geometry& g = series.geometry;
  const Grid grid = world_grid(g);
  Volume v;
  v.series_uid = series.series_uid;
  v.dims = {g.cols, g.rows, g.slices};
  v.voxels.resize(v.voxel_count());
  for (int k = 0; k < g.slices; ++k)
    for (int j = 0; j < g.rows; ++j)
      for (int i = 0; i < g.cols; ++i)
        v.at(i, j, k) = static_cast<float>(
            std::lround(series.phantom.hu_at({grid.x[i], grid.y[g.rows - 1 - j], grid.z[k]}) + kHuOffset) - kHuOffset);
  v.affine = Affine::diagonal(-g.col_spacing, g.row_spacing, g.slice_step,
                              {-grid.x.front(), -grid.y.back(), grid.z.front()});
  return v;
}

std::vector<CorpusEntry> write_corpus(const std::string& root, int clean_count, int per_defect,
                                      const std::vector<DefectKind>& defects, std::uint64_t seed,
                                      const Geometry& base, const QaThresholds& thresholds) {
  namespace fs = std::filesystem;
  std::vector<CorpusEntry> entries;
  std::mt19937_64 rng(seed);
  auto make_clean = [&](int variant) {
    Geometry g = base;
    g.descending_instances = variant % 2 == 1;
    g.explicit_vr = variant % 3 != 2;
    return generate_series(g, chest_phantom(base), rng(), thresholds);
  };
  auto emit = [&](Series s, const std::string& name, std::optional<DefectKind> kind) {
    s.name = name;
    const std::string dir = (fs::path(root) / name).string();
    write_series(s, dir);
    entries.push_back({name, dir, s.truth, kind});
  };

  char name[64];
  for (int i = 0; i < clean_count; ++i) {
    std::snprintf(name, sizeof name, "clean_%03d", i);
    emit(make_clean(i), name, std::nullopt);
  }
  for (auto kind : defects) {
    for (int i = 0; i < per_defect; ++i) {
      Series clean = make_clean(i);
      const auto spec = DefectSpec::sample(kind, clean.geometry, thresholds, rng());
      std::snprintf(name, sizeof name, "%s_%03d", std::string(to_string(kind)).c_str(), i);
      emit(inject_defect(clean, spec, thresholds), name, kind);
    }
  }
  return entries;
}

}  // namespace ctqa::synth
