#pragma once

// Procedural scenes: the two-plane noise scene used for the aperture-ordering
// check and a tiny three-scene dataset laid out like the real ones.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "vabokeh/imagery.hpp"
#include "vabokeh/pipeline.hpp"

namespace vabokeh::synth {

// Uniform in [0, 1) from raw engine bits, so output does not depend on the
// standard library's distribution implementations.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Scene {
  std::string id;
  RasterImage image;
  DepthMap depth;
  BinaryMask mask;
};

// Left half: focal plane at depth `focus`. Right half: background with a
// shallow vertical gradient from 0.9 to 1.0. Colour is i.i.d. uniform noise.
// The mask marks a rectangle inside the left half.
inline Scene two_plane_noise(int size, std::uint64_t seed, double focus = 0.05) {
  if (size < 16) throw ArgumentError("two_plane_noise: size must be >= 16");
  std::mt19937_64 rng(seed);
  Scene s{"two_plane_noise", RasterImage(size, size, 3), DepthMap(size, size), BinaryMask(size, size)};
  for (double& v : s.image.values()) v = unit(rng);
  const int half = size / 2;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      s.depth(y, x) = x < half ? focus : 0.9 + 0.1 * y / (size - 1);
      const bool marked = x >= size / 8 && x < 3 * size / 8 && y >= size / 4 && y < 3 * size / 4;
      s.mask(y, x) = marked ? 1 : 0;
    }
  }
  return s;
}

inline RasterImage textured_image(int h, int w, std::uint64_t seed, double hue) {
  std::mt19937_64 rng(seed);
  RasterImage img(h, w, 3);
  const double tint[3] = {0.5 + 0.4 * std::cos(hue), 0.5 + 0.4 * std::cos(hue + 2.1),
                          0.5 + 0.4 * std::cos(hue + 4.2)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double checker = ((x / 4 + y / 4) % 2) ? 0.15 : -0.15;
      for (int c = 0; c < 3; ++c) {
        const double v = tint[c] + checker + 0.2 * (unit(rng) - 0.5);
        img(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

// Three small scenes: a slab in front of a tilted backdrop with a near ledge,
// three vertical planes, and a disk standing on a receding floor. Every depth
// map spans [0, 1] so it survives the min-max normalization on load.
inline std::vector<Scene> mini_scenes(int width, int height, std::uint64_t seed) {
  if (width < 32 || height < 32) throw ArgumentError("mini_scenes: size must be >= 32x32");
  std::vector<Scene> scenes;
  const int w = width, h = height;

  Scene a{"scene_a", textured_image(h, w, seed + 1, 0.3), DepthMap(h, w), BinaryMask(h, w)};
  const int ledge_top = h - h / 8;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool slab = x >= w / 8 && x < w / 2 && y >= h / 4 && y < 7 * h / 8;
      const bool ledge = y >= ledge_top;
      // Backdrop reaches 1 on the row just above the ledge.
      a.depth(y, x) = ledge ? 0.0 : slab ? 0.3 : 0.75 + 0.25 * y / (ledge_top - 1);
      a.mask(y, x) = (x >= w / 5 && x < w / 3 && y >= h / 3 && y < 2 * h / 3) ? 1 : 0;
    }
  }
  scenes.push_back(std::move(a));

  Scene b{"scene_b", textured_image(h, w, seed + 2, 2.0), DepthMap(h, w), BinaryMask(h, w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int stripe = std::min(2, 3 * x / w);
      b.depth(y, x) = 0.5 * stripe;
      b.mask(y, x) = (stripe == 1 && y >= h / 4 && y < 3 * h / 4) ? 1 : 0;
    }
  }
  scenes.push_back(std::move(b));

  Scene c{"scene_c", textured_image(h, w, seed + 3, 4.0), DepthMap(h, w), BinaryMask(h, w)};
  const double cx = 0.65 * w, cy = 0.45 * h, r = 0.22 * h;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - cx, dy = y - cy;
      const bool disk = dx * dx + dy * dy <= r * r;
      c.depth(y, x) = disk ? 0.1 : 1.0 - static_cast<double>(y) / (h - 1);
      c.mask(y, x) = (dx * dx + dy * dy <= 0.25 * r * r) ? 1 : 0;
    }
  }
  scenes.push_back(std::move(c));
  return scenes;
}

// Calibration for the mini dataset: a room-scale depth range and a coarser
// sensor so the small images show graded blur instead of clipped radii.
inline PipelineConfig mini_config() {
  PipelineConfig cfg;
  cfg.calibration.near_mm = 500.0;
  cfg.calibration.far_mm = 5000.0;
  cfg.pixel_pitch_mm = 0.01;
  return cfg;
}

// Writes <root>/lens.txt and <root>/<scene>/{f1.8,f2.8,f8.0,f16.0,depth,mask}.png.
// f16.0 is the all-in-focus source; wider apertures are renders of it, from
// the depth as re-read from disk, plus seeded uniform noise of amplitude `noise`.
inline void write_mini_dataset(const std::filesystem::path& root, int width, int height,
                               std::uint64_t seed, double noise = 0.01) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  const PipelineConfig cfg = mini_config();
  cfg.to_record().save(root / "lens.txt");
  std::mt19937_64 rng(seed);
  for (const Scene& s : mini_scenes(width, height, seed)) {
    const fs::path dir = root / s.id;
    fs::create_directories(dir);
    save_image(s.image, dir / "f16.0.png", 8);
    save_depth(s.depth, dir / "depth.png");
    save_mask(s.mask, dir / "mask.png");

    const RasterImage src = load_image(dir / "f16.0.png");
    const DepthMap depth = load_depth(dir / "depth.png");
    const BinaryMask mask = load_mask(dir / "mask.png");
    const std::vector<double> stops{1.8, 2.8, 8.0};
    const VariableRender vr = render_variable(src, depth, mask, stops, cfg);
    for (double n : stops) {
      RasterImage gt = vr.renders.at(n).output.image;
      for (double& v : gt.values()) v = std::clamp(v + noise * (2.0 * unit(rng) - 1.0), 0.0, 1.0);
      save_image(gt, dir / ("f" + format_f_number(n) + ".png"), 8);
    }
  }
}

}  // namespace vabokeh::synth
