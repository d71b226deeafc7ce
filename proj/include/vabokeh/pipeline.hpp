#pragma once

// End-to-end variable-aperture rendering: focal plane from a user mask, then
// one CoC map and render per requested f-number.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vabokeh/focalplane.hpp"
#include "vabokeh/optics.hpp"
#include "vabokeh/record.hpp"
#include "vabokeh/renderer.hpp"

namespace vabokeh {

struct PipelineConfig {
  double focal_length_mm = kDefaultFocalLengthMm;
  double f_number = 1.8;
  std::optional<double> focus_distance_mm;  // nullopt: derive from the focal plane
  DepthCalibration calibration;
  double pixel_pitch_mm = kDefaultPixelPitchMm;
  double max_radius_px = kDefaultMaxRadiusPx;
  int classes = kDefaultClassCount;
  int bins = kDefaultHistogramBins;
  RenderConfig render;

  static constexpr const char* kFromFocalPlane = "from-focal-plane";

  // Unknown keys are rejected so typos do not silently fall back to defaults.
  static PipelineConfig from_record(const TextRecord& rec) {
    static const char* const known[] = {"f_mm",           "f_number",      "focus_distance_mm",
                                        "near_mm",        "far_mm",        "pixel_pitch_mm",
                                        "max_radius_px",  "min_radius_px", "tile_size",
                                        "protect_focal",  "k",             "bins"};
    for (const auto& [key, value] : rec.entries()) {
      bool ok = false;
      for (const char* k : known) ok = ok || key == k;
      if (!ok) throw FormatError("unknown configuration key '" + key + "'");
    }
    PipelineConfig cfg;
    cfg.focal_length_mm = rec.number_or("f_mm", cfg.focal_length_mm);
    cfg.f_number = rec.number_or("f_number", cfg.f_number);
    if (auto focus = rec.get("focus_distance_mm"); focus && *focus != kFromFocalPlane) {
      cfg.focus_distance_mm = rec.number("focus_distance_mm");
    }
    cfg.calibration.near_mm = rec.number_or("near_mm", cfg.calibration.near_mm);
    cfg.calibration.far_mm = rec.number_or("far_mm", cfg.calibration.far_mm);
    cfg.pixel_pitch_mm = rec.number_or("pixel_pitch_mm", cfg.pixel_pitch_mm);
    cfg.max_radius_px = rec.number_or("max_radius_px", cfg.max_radius_px);
    cfg.render.min_radius_px = rec.number_or("min_radius_px", cfg.render.min_radius_px);
    cfg.render.tile_size = static_cast<int>(rec.number_or("tile_size", cfg.render.tile_size));
    if (auto prot = rec.get("protect_focal")) {
      if (*prot == "true" || *prot == "1") {
        cfg.render.protect_focal = true;
      } else if (*prot == "false" || *prot == "0") {
        cfg.render.protect_focal = false;
      } else {
        throw FormatError("protect_focal must be true or false");
      }
    }
    cfg.classes = static_cast<int>(rec.number_or("k", cfg.classes));
    cfg.bins = static_cast<int>(rec.number_or("bins", cfg.bins));
    cfg.validate();
    return cfg;
  }

  TextRecord to_record() const {
    TextRecord rec;
    rec.set("f_mm", focal_length_mm);
    rec.set("f_number", f_number);
    if (focus_distance_mm) {
      rec.set("focus_distance_mm", *focus_distance_mm);
    } else {
      rec.set("focus_distance_mm", kFromFocalPlane);
    }
    rec.set("near_mm", calibration.near_mm);
    rec.set("far_mm", calibration.far_mm);
    rec.set("pixel_pitch_mm", pixel_pitch_mm);
    rec.set("max_radius_px", max_radius_px);
    rec.set("min_radius_px", render.min_radius_px);
    rec.set("tile_size", render.tile_size);
    rec.set("protect_focal", render.protect_focal ? "true" : "false");
    rec.set("k", classes);
    rec.set("bins", bins);
    return rec;
  }

  void validate() const {
    if (!(focal_length_mm > 0.0)) throw ArgumentError("f_mm must be positive");
    if (!(f_number > 0.0)) throw ArgumentError("f_number must be positive");
    if (!(pixel_pitch_mm > 0.0)) throw ArgumentError("pixel_pitch_mm must be positive");
    if (!(max_radius_px >= 0.0)) throw ArgumentError("max_radius_px must be >= 0");
    if (classes < 2) throw ArgumentError("k must be >= 2");
    if (bins < 2) throw ArgumentError("bins must be >= 2");
    calibration.validate();
    render.validate();
  }

  LensParams lens_for(double n, double focus_mm) const {
    return {focal_length_mm, n, focus_distance_mm.value_or(focus_mm)};
  }
};

struct ApertureRender {
  double f_number = 0.0;
  CoCMap coc;
  RenderOutput output;
};

struct VariableRender {
  FocalPlane focal;
  double focus_distance_mm = 0.0;
  std::map<double, ApertureRender> renders;
};

inline double mean_of(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v;
  return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

// Focal-plane selection runs once; every f-number shares it.
inline VariableRender render_variable(const RasterImage& src, const DepthMap& depth,
                                      const BinaryMask& mask, const std::vector<double>& f_numbers,
                                      const PipelineConfig& cfg = {}) {
  if (f_numbers.empty()) throw ArgumentError("at least one f-number is required");
  cfg.validate();
  require_same_extent(src, depth, "render_variable (image vs depth)");
  require_same_extent(src, mask, "render_variable (image vs mask)");

  VariableRender result;
  result.focal = resolve_focal_plane(depth, mask, cfg.classes, cfg.bins);
  result.focus_distance_mm =
      cfg.focus_distance_mm.value_or(cfg.calibration.to_metric(result.focal.focus_depth));
  for (double n : f_numbers) {
    const LensParams lens = cfg.lens_for(n, result.focus_distance_mm);
    CoCMap coc = coc_map(depth, cfg.calibration, lens, cfg.pixel_pitch_mm, cfg.max_radius_px);
    RenderOutput output = render_bokeh(src, coc, &result.focal, cfg.render);
    result.renders[n] = ApertureRender{n, std::move(coc), std::move(output)};
  }
  return result;
}

// Metadata record describing a focal plane.
inline TextRecord focal_plane_record(const FocalPlane& fp) {
  TextRecord rec;
  rec.set("d_f", fp.focus_depth);
  rec.set("d_near", fp.dof.lo);
  rec.set("d_far", fp.dof.hi);
  rec.set("k", fp.thresholds.classes);
  std::string ts;
  for (std::size_t i = 0; i < fp.thresholds.thresholds.size(); ++i) {
    if (i) ts += ' ';
    ts += std::to_string(fp.thresholds.thresholds[i]);
  }
  rec.set("thresholds", ts);
  rec.set("bins", fp.thresholds.bins);
  rec.set("selected_class", fp.selected_class);
  rec.set("region_pixels", count_set(fp.region_mask));
  return rec;
}

inline TextRecord render_stats_record(const ApertureRender& r) {
  TextRecord rec;
  rec.set("f_number", r.f_number);
  rec.set("coc_mean_radius_px", mean_of(r.coc.radius.data()));
  double max_r = 0.0;
  for (double v : r.coc.radius.data()) max_r = std::max(max_r, v);
  rec.set("coc_max_radius_px", max_r);
  rec.set("mean_radius", r.output.stats.mean_radius);
  rec.set("max_radius", r.output.stats.max_radius);
  rec.set("protected_pixel_count", r.output.stats.protected_pixel_count);
  rec.set("wall_time_s", r.output.stats.wall_time_s);
  return rec;
}

}  // namespace vabokeh
