#pragma once

// Thin-lens circle-of-confusion physics evaluated per pixel.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vabokeh/errors.hpp"
#include "vabokeh/focalplane.hpp"
#include "vabokeh/grid.hpp"

namespace vabokeh {

inline constexpr double kDefaultFocalLengthMm = 50.0;
inline constexpr double kDefaultPixelPitchMm = 0.005;
inline constexpr double kDefaultMaxRadiusPx = 32.0;
inline constexpr double kDefaultNearMm = 500.0;
inline constexpr double kDefaultFarMm = 100000.0;

inline double aperture_diameter(double focal_length_mm, double f_number) {
  if (!(focal_length_mm > 0.0) || !(f_number > 0.0)) {
    throw ArgumentError("focal length and f-number must be positive");
  }
  return focal_length_mm / f_number;
}

struct LensParams {
  double focal_length_mm = kDefaultFocalLengthMm;
  double f_number = 1.8;
  double focus_distance_mm = 2000.0;

  double aperture_mm() const { return aperture_diameter(focal_length_mm, f_number); }

  // f > 0, N > 0 and the focused object lies beyond the focal length.
  void validate() const {
    if (!(focal_length_mm > 0.0)) throw ArgumentError("focal length must be positive");
    if (!(f_number > 0.0)) throw ArgumentError("f-number must be positive");
    if (focus_distance_mm == focal_length_mm) {
      throw SingularityError("focus distance equals focal length");
    }
    if (!(focus_distance_mm > focal_length_mm)) {
      throw ArgumentError("focus distance must exceed the focal length");
    }
  }
};

// Affine map from normalized depth to object distance in millimeters.
struct DepthCalibration {
  double near_mm = kDefaultNearMm;
  double far_mm = kDefaultFarMm;

  void validate() const {
    if (!(near_mm > 0.0) || !(far_mm > near_mm)) {
      throw ArgumentError("depth calibration requires 0 < near < far");
    }
  }
  double to_metric(double d) const { return near_mm + d * (far_mm - near_mm); }
  double to_normalized(double distance_mm) const {
    return (distance_mm - near_mm) / (far_mm - near_mm);
  }
};

// Sensor-plane circle of confusion, in millimeters, for an object at
// distance_mm:  (A/2) * (f/D_o) * |D_o - D_f| / |D_f - f|.
// The result is treated as a diameter by the pixel conversion below.
inline double coc_diameter(const LensParams& lens, double distance_mm) {
  if (!(distance_mm > 0.0)) throw ArgumentError("object distance must be positive");
  const double f = lens.focal_length_mm;
  const double focus = lens.focus_distance_mm;
  if (focus == f) throw SingularityError("focus distance equals focal length");
  const double a = aperture_diameter(f, lens.f_number);
  return (a / 2.0) * (f / distance_mm) * (std::abs(distance_mm - focus) / std::abs(focus - f));
}

struct CoCMap {
  Grid<double, RadiusTag> radius;  // blur radius in pixels
  double pixel_pitch_mm = kDefaultPixelPitchMm;

  int height() const { return radius.height(); }
  int width() const { return radius.width(); }
};

// Per-pixel blur radius in pixels: diameter / (2 * pitch), capped.
inline double coc_radius_px(const LensParams& lens, const DepthCalibration& calib, double depth,
                            double pixel_pitch_mm, double max_radius_px) {
  return std::min(coc_diameter(lens, calib.to_metric(depth)) / (2.0 * pixel_pitch_mm),
                  max_radius_px);
}

inline CoCMap coc_map(const DepthMap& depth, const DepthCalibration& calib, const LensParams& lens,
                      double pixel_pitch_mm = kDefaultPixelPitchMm,
                      double max_radius_px = kDefaultMaxRadiusPx) {
  if (!(pixel_pitch_mm > 0.0)) throw ArgumentError("pixel pitch must be positive");
  if (!(max_radius_px >= 0.0)) throw ArgumentError("max radius must be non-negative");
  calib.validate();
  lens.validate();
  CoCMap out{Grid<double, RadiusTag>(depth.height(), depth.width()), pixel_pitch_mm};
  auto dst = out.radius.data();
  auto src = depth.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = coc_radius_px(lens, calib, src[i], pixel_pitch_mm, max_radius_px);
  }
  return out;
}

// Normalized depth interval whose blur radius stays within max_coc_px,
// clipped to [0,1]. With g(D) = K |D - D_f| / D and K = (A/2) f / (D_f - f),
// the near limit solves K (D_f - D) / D = c and the far limit
// K (D - D_f) / D = c, the latter being unbounded when c >= K.
inline DepthInterval depth_of_field(const LensParams& lens, double max_coc_px,
                                    const DepthCalibration& calib,
                                    double pixel_pitch_mm = kDefaultPixelPitchMm) {
  if (!(max_coc_px >= 0.0)) throw ArgumentError("max CoC must be non-negative");
  if (!(pixel_pitch_mm > 0.0)) throw ArgumentError("pixel pitch must be positive");
  lens.validate();
  calib.validate();
  const double focus = lens.focus_distance_mm;
  const double k = (lens.aperture_mm() / 2.0) * lens.focal_length_mm /
                   (focus - lens.focal_length_mm);
  const double c = 2.0 * pixel_pitch_mm * max_coc_px;

  const double near_mm = k * focus / (k + c);
  const double far_mm = c >= k ? std::numeric_limits<double>::infinity() : k * focus / (k - c);

  auto clip = [](double v) { return std::clamp(v, 0.0, 1.0); };
  return {clip(calib.to_normalized(near_mm)),
          std::isinf(far_mm) ? 1.0 : clip(calib.to_normalized(far_mm))};
}

}  // namespace vabokeh
