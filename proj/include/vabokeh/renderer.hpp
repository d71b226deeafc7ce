#pragma once

// Variable-radius defocus renderer. Every source pixel j spreads its value
// uniformly over the disk ||i - j|| <= r(j); the renderer evaluates that
// scatter by gathering at each output pixel i:
//
//   out(i) = sum_j w(i,j) src(j) / sum_j w(i,j),
//   w(i,j) = [||i - j|| <= r(j)] / (pi * max(r(j), min_radius)^2).
//
// The sum is evaluated as src(i) + sum_j w (src(j) - src(i)) / sum_j w so that
// constant images and zero-radius maps are reproduced bit-exactly.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <vector>

#include "vabokeh/errors.hpp"
#include "vabokeh/focalplane.hpp"
#include "vabokeh/grid.hpp"
#include "vabokeh/optics.hpp"
#include "vabokeh/parallel.hpp"

namespace vabokeh {

struct RenderConfig {
  double min_radius_px = 0.5;  // radii below this are treated as in focus
  int tile_size = 128;
  bool protect_focal = true;   // focal-plane pixels neither spread nor receive blur
  unsigned threads = 0;        // 0 = all hardware threads

  void validate() const {
    if (!(min_radius_px >= 0.0)) throw ArgumentError("min_radius_px must be >= 0");
    if (tile_size < 16) throw ArgumentError("tile_size must be >= 16");
  }
};

struct RenderStats {
  double mean_radius = 0.0;  // over the effective (post-threshold) radius field
  double max_radius = 0.0;
  std::size_t protected_pixel_count = 0;
  double wall_time_s = 0.0;
};

struct RenderOutput {
  RasterImage image;
  RenderStats stats;
};

namespace detail {

struct SourceField {
  std::vector<double> radius_sq;  // squared effective radius
  std::vector<double> weight;     // 1 / disk area
  std::vector<std::uint8_t> is_protected;
  std::vector<double> radius;
};

inline SourceField build_source_field(const CoCMap& coc, const BinaryMask* protect,
                                      const RenderConfig& cfg) {
  const std::size_t n = coc.radius.size();
  SourceField f{std::vector<double>(n), std::vector<double>(n), std::vector<std::uint8_t>(n, 0),
                std::vector<double>(n)};
  for (std::size_t j = 0; j < n; ++j) {
    const double raw = coc.radius.values()[j];
    if (!std::isfinite(raw) || raw < 0.0) throw ArgumentError("CoC radius must be finite and >= 0");
    const bool prot = protect != nullptr && protect->values()[j] != 0;
    const double r = (prot || raw < cfg.min_radius_px) ? 0.0 : raw;
    const double spread = prot ? cfg.min_radius_px : std::max(raw, cfg.min_radius_px);
    f.is_protected[j] = prot ? 1 : 0;
    f.radius[j] = r;
    f.radius_sq[j] = r * r;
    // A zero-area disk covers exactly its own pixel.
    f.weight[j] = spread > 0.0 ? 1.0 / (std::numbers::pi * spread * spread) : 1.0;
  }
  return f;
}

}  // namespace detail

// focal may be null, in which case no pixels are protected.
inline RenderOutput render_bokeh(const RasterImage& src, const CoCMap& coc, const FocalPlane* focal,
                                 const RenderConfig& cfg = {}) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  require_same_extent(src, coc.radius, "render_bokeh (image vs CoC map)");
  const BinaryMask* protect = nullptr;
  if (focal != nullptr && cfg.protect_focal) {
    require_same_extent(src, focal->region_mask, "render_bokeh (image vs focal mask)");
    protect = &focal->region_mask;
  }

  const int h = src.height();
  const int w = src.width();
  const int ch = src.channels();
  const detail::SourceField field = detail::build_source_field(coc, protect, cfg);

  // Global per-channel range; the output is clamped to it so rounding can
  // never leave the convex hull of the source values.
  std::vector<double> lo(ch, 1e300), hi(ch, -1e300);
  for (std::size_t p = 0; p < src.pixel_count(); ++p) {
    for (int c = 0; c < ch; ++c) {
      lo[c] = std::min(lo[c], src.values()[p * ch + c]);
      hi[c] = std::max(hi[c], src.values()[p * ch + c]);
    }
  }

  double global_reach = 0.0;
  for (double r : field.radius) global_reach = std::max(global_reach, r);
  const int global_r = static_cast<int>(std::floor(global_reach));

  const int tile = cfg.tile_size;
  const int tiles_x = (w + tile - 1) / tile;
  const int tiles_y = (h + tile - 1) / tile;

  RasterImage out(h, w, ch);
  parallel_for(static_cast<std::size_t>(tiles_x) * tiles_y, cfg.threads, [&](std::size_t t) {
    const int tx0 = static_cast<int>(t % tiles_x) * tile;
    const int ty0 = static_cast<int>(t / tiles_x) * tile;
    const int tx1 = std::min(tx0 + tile, w);
    const int ty1 = std::min(ty0 + tile, h);

    // Only sources within global reach of the tile can contribute; their
    // largest radius bounds the gather window for this tile.
    double tile_reach = 0.0;
    for (int y = std::max(0, ty0 - global_r); y < std::min(h, ty1 + global_r); ++y) {
      for (int x = std::max(0, tx0 - global_r); x < std::min(w, tx1 + global_r); ++x) {
        tile_reach = std::max(tile_reach, field.radius[static_cast<std::size_t>(y) * w + x]);
      }
    }
    const int reach = static_cast<int>(std::floor(tile_reach));

    std::vector<double> acc(ch);
    for (int y = ty0; y < ty1; ++y) {
      for (int x = tx0; x < tx1; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double* si = &src.values()[i * ch];
        double* oi = &out.values()[i * ch];
        if (field.is_protected[i]) {
          std::copy(si, si + ch, oi);
          continue;
        }
        std::fill(acc.begin(), acc.end(), 0.0);
        double wsum = field.weight[i];
        const int y0 = std::max(0, y - reach), y1 = std::min(h - 1, y + reach);
        const int x0 = std::max(0, x - reach), x1 = std::min(w - 1, x + reach);
        for (int yy = y0; yy <= y1; ++yy) {
          const int dy = yy - y;
          for (int xx = x0; xx <= x1; ++xx) {
            const int dx = xx - x;
            if (dx == 0 && dy == 0) continue;
            const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
            if (static_cast<double>(dx * dx + dy * dy) > field.radius_sq[j]) continue;
            const double wj = field.weight[j];
            wsum += wj;
            const double* sj = &src.values()[j * ch];
            for (int c = 0; c < ch; ++c) acc[c] += wj * (sj[c] - si[c]);
          }
        }
        for (int c = 0; c < ch; ++c) {
          oi[c] = std::clamp(si[c] + acc[c] / wsum, lo[c], hi[c]);
        }
      }
    }
  });

  RenderOutput result{std::move(out), {}};
  double sum = 0.0;
  for (std::size_t j = 0; j < field.radius.size(); ++j) {
    sum += field.radius[j];
    result.stats.max_radius = std::max(result.stats.max_radius, field.radius[j]);
    result.stats.protected_pixel_count += field.is_protected[j];
  }
  result.stats.mean_radius = sum / static_cast<double>(field.radius.size());
  result.stats.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

inline RenderOutput render_bokeh(const RasterImage& src, const CoCMap& coc, const FocalPlane& focal,
                                 const RenderConfig& cfg = {}) {
  return render_bokeh(src, coc, &focal, cfg);
}

}  // namespace vabokeh
