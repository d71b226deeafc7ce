#pragma once

// Pixel-grid substrate: image/depth/mask file I/O, bilinear resampling,
// cropping and discovery of multi-aperture scene directories.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include "vabokeh/errors.hpp"
#include "vabokeh/grid.hpp"
#include "vabokeh/raster_io.hpp"

namespace vabokeh {

// Training-time geometry of the bokeh benchmarks.
inline constexpr int kTrainWidth = 1536;
inline constexpr int kTrainHeight = 1024;
inline constexpr int kTrainCrop = 1024;

// Aperture stops captured for every scene group.
inline constexpr double kApertureStops[] = {1.8, 2.8, 8.0, 16.0};

// ---------------------------------------------------------------------------
// Quantization and encoding

inline std::vector<std::uint16_t> quantize(std::span<const double> values, int bit_depth) {
  const double max_code = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<std::uint16_t> codes(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    codes[i] = static_cast<std::uint16_t>(std::lround(v * max_code));
  }
  return codes;
}

inline std::vector<std::uint8_t> encode_png(const RasterImage& img, int bit_depth = 8) {
  return codec::encode_png(img.height(), img.width(), img.channels(), bit_depth,
                           quantize(img.data(), bit_depth));
}

inline RasterImage raster_from_raw(codec::RawRaster raw) {
  if (raw.max_code <= 0) throw FormatError("float maps are not valid raster images");
  const double scale = 1.0 / raw.max_code;
  for (double& v : raw.samples) v *= scale;
  return RasterImage(raw.height, raw.width, raw.channels, std::move(raw.samples));
}

inline RasterImage decode_image(const std::vector<std::uint8_t>& bytes,
                                codec::FileKind kind = codec::FileKind::png) {
  return raster_from_raw(codec::decode_bytes(bytes, kind));
}

// Values are scaled to [0,1] by the format's maximum code.
inline RasterImage load_image(const std::filesystem::path& path) {
  return raster_from_raw(codec::decode_file(path));
}

// Writes PNG or binary PNM according to the extension; bit_depth is 8 or 16.
inline void save_image(const RasterImage& img, const std::filesystem::path& path,
                       int bit_depth = 8) {
  if (bit_depth != 8 && bit_depth != 16) throw ArgumentError("bit depth must be 8 or 16");
  const auto codes = quantize(img.data(), bit_depth);
  switch (codec::kind_from_path(path)) {
    case codec::FileKind::png:
      codec::write_file_bytes(
          path, codec::encode_png(img.height(), img.width(), img.channels(), bit_depth, codes));
      return;
    case codec::FileKind::pnm:
      codec::write_file_bytes(
          path, codec::encode_pnm(img.height(), img.width(), img.channels(), bit_depth, codes));
      return;
    default:
      throw FormatError("unsupported image extension '" + path.extension().string() + "'");
  }
}

// ---------------------------------------------------------------------------
// Depth

// Min-max normalization of raw depth samples; a constant map becomes 0.5.
inline DepthMap normalize_depth(const codec::RawRaster& raw) {
  if (raw.channels != 1) {
    throw FormatError("depth map must be single-channel, got " + std::to_string(raw.channels));
  }
  const auto [lo_it, hi_it] = std::minmax_element(raw.samples.begin(), raw.samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> values(raw.samples.size(), 0.5);
  if (hi > lo) {
    const double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = (raw.samples[i] - lo) * inv;
  }
  return DepthMap(raw.height, raw.width, 1, std::move(values));
}

inline DepthMap load_depth(const std::filesystem::path& path) {
  return normalize_depth(codec::decode_file(path));
}

inline DepthMap decode_depth(const std::vector<std::uint8_t>& bytes,
                             codec::FileKind kind = codec::FileKind::png) {
  return normalize_depth(codec::decode_bytes(bytes, kind));
}

// PFM keeps full precision; PNG/PNM store 16-bit codes.
inline void save_depth(const DepthMap& depth, const std::filesystem::path& path) {
  if (codec::kind_from_path(path) == codec::FileKind::pfm) {
    codec::write_file_bytes(path,
                            codec::encode_pfm(depth.height(), depth.width(), 1, depth.values()));
    return;
  }
  save_image(RasterImage(depth.height(), depth.width(), 1, depth.values()), path, 16);
}

// Any single-channel float field (e.g. a blur-radius map) as PFM.
inline void save_float_map(std::span<const double> values, int height, int width,
                           const std::filesystem::path& path) {
  codec::write_file_bytes(
      path, codec::encode_pfm(height, width, 1, std::vector<double>(values.begin(), values.end())));
}

// ---------------------------------------------------------------------------
// Masks

inline BinaryMask mask_from_raw(const codec::RawRaster& raw) {
  BinaryMask mask(raw.height, raw.width);
  auto out = mask.data();
  for (std::size_t p = 0; p < out.size(); ++p) {
    bool set = false;
    for (int c = 0; c < raw.channels; ++c) set = set || raw.samples[p * raw.channels + c] > 0.0;
    out[p] = set ? 1 : 0;
  }
  return mask;
}

// Any nonzero sample marks the pixel as set.
inline BinaryMask load_mask(const std::filesystem::path& path) {
  return mask_from_raw(codec::decode_file(path));
}

inline RasterImage mask_to_image(const BinaryMask& mask) {
  RasterImage img(mask.height(), mask.width(), 1);
  for (std::size_t i = 0; i < mask.size(); ++i) img.values()[i] = mask.values()[i] ? 1.0 : 0.0;
  return img;
}

inline void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  save_image(mask_to_image(mask), path, 8);
}

// ---------------------------------------------------------------------------
// Resampling and cropping

// Bilinear resampling with half-pixel centers and edge clamping.
inline RasterImage resize_bilinear(const RasterImage& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) {
    throw ArgumentError("resize target must be at least 1x1, got " + std::to_string(out_w) + "x" +
                        std::to_string(out_h));
  }
  const int in_w = img.width();
  const int in_h = img.height();
  const int ch = img.channels();
  const double sx = static_cast<double>(in_w) / out_w;
  const double sy = static_cast<double>(in_h) / out_h;

  struct Tap {
    int i0, i1;
    double t;
  };
  auto taps = [](int n_out, int n_in, double scale) {
    std::vector<Tap> out(n_out);
    for (int o = 0; o < n_out; ++o) {
      const double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(n_in - 1));
      const int i0 = static_cast<int>(std::floor(src));
      const int i1 = std::min(i0 + 1, n_in - 1);
      out[o] = {i0, i1, src - i0};
    }
    return out;
  };
  const auto xt = taps(out_w, in_w, sx);
  const auto yt = taps(out_h, in_h, sy);

  RasterImage out(out_h, out_w, ch);
  for (int y = 0; y < out_h; ++y) {
    const Tap& ty = yt[y];
    for (int x = 0; x < out_w; ++x) {
      const Tap& tx = xt[x];
      for (int c = 0; c < ch; ++c) {
        const double top = img(ty.i0, tx.i0, c) + tx.t * (img(ty.i0, tx.i1, c) - img(ty.i0, tx.i0, c));
        const double bot = img(ty.i1, tx.i0, c) + tx.t * (img(ty.i1, tx.i1, c) - img(ty.i1, tx.i0, c));
        out(y, x, c) = top + ty.t * (bot - top);
      }
    }
  }
  return out;
}

template <typename T, typename Tag>
Grid<T, Tag> crop(const Grid<T, Tag>& img, int x0, int y0, int w, int h) {
  if (w < 1 || h < 1 || x0 < 0 || y0 < 0 || x0 + w > img.width() || y0 + h > img.height()) {
    throw ArgumentError("crop rectangle (" + std::to_string(x0) + "," + std::to_string(y0) + ") " +
                        std::to_string(w) + "x" + std::to_string(h) + " is outside the " +
                        std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                        " image");
  }
  Grid<T, Tag> out(h, w, img.channels());
  const std::size_t row = static_cast<std::size_t>(w) * img.channels();
  for (int y = 0; y < h; ++y) {
    const auto src = img.data().subspan(img.index(y0 + y, x0), row);
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(row * y));
  }
  return out;
}

struct CropRect {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
  friend bool operator==(const CropRect&, const CropRect&) = default;
};

// Uses the raw mt19937_64 stream so the rectangle is reproducible across
// standard library implementations.
inline CropRect random_crop_rect(int img_w, int img_h, int w, int h, std::uint64_t seed) {
  if (w < 1 || h < 1 || w > img_w || h > img_h) {
    throw ArgumentError("crop size exceeds image size");
  }
  std::mt19937_64 rng(seed);
  const auto span_x = static_cast<std::uint64_t>(img_w - w) + 1;
  const auto span_y = static_cast<std::uint64_t>(img_h - h) + 1;
  const int x0 = static_cast<int>(rng() % span_x);
  const int y0 = static_cast<int>(rng() % span_y);
  return {x0, y0, w, h};
}

template <typename T, typename Tag>
Grid<T, Tag> random_crop(const Grid<T, Tag>& img, int w, int h, std::uint64_t seed) {
  const CropRect r = random_crop_rect(img.width(), img.height(), w, h, seed);
  return crop(img, r.x0, r.y0, r.width, r.height);
}

// Resize to the 1536x1024 training geometry.
inline RasterImage preprocess_for_training(const RasterImage& img) {
  return resize_bilinear(img, kTrainWidth, kTrainHeight);
}

// ---------------------------------------------------------------------------
// Scene groups

// "1.8", "8.0", "16.0": one decimal when exact, otherwise shortest form.
inline std::string format_f_number(double n) {
  char buf[32];
  if (std::abs(n * 10.0 - std::round(n * 10.0)) < 1e-9) {
    std::snprintf(buf, sizeof buf, "%.1f", n);
  } else {
    std::snprintf(buf, sizeof buf, "%g", n);
  }
  return buf;
}

struct SceneGroup {
  std::string scene_id;
  std::map<double, std::filesystem::path> images;
  std::optional<std::filesystem::path> depth_path;

  // The narrowest aperture present serves as the all-in-focus source.
  double all_in_focus_key() const {
    if (images.empty()) throw ArgumentError("scene '" + scene_id + "' has no images");
    return images.rbegin()->first;
  }
  const std::filesystem::path& all_in_focus_path() const {
    return images.at(all_in_focus_key());
  }
};

// Scans <root>/<scene_id>/f{1.8,2.8,8.0,16.0}.<ext> plus optional depth.<ext>.
// Directories without any aperture image are skipped; results are sorted by id.
inline std::vector<SceneGroup> discover_scenes(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("scene root '" + root.string() + "' is not a directory");
  static const std::regex aperture_re(R"(f(1\.8|2\.8|8\.0|16\.0)\.(png|pgm|ppm))");
  static const std::regex depth_re(R"(depth\.(png|pgm|pfm))");

  std::vector<SceneGroup> scenes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    SceneGroup group;
    group.scene_id = entry.path().filename().string();
    for (const auto& file : fs::directory_iterator(entry.path())) {
      if (!file.is_regular_file()) continue;
      const std::string name = file.path().filename().string();
      std::smatch m;
      if (std::regex_match(name, m, aperture_re)) {
        group.images[std::stod(m[1].str())] = file.path();
      } else if (std::regex_match(name, depth_re)) {
        group.depth_path = file.path();
      }
    }
    if (!group.images.empty()) scenes.push_back(std::move(group));
  }
  std::sort(scenes.begin(), scenes.end(),
            [](const SceneGroup& a, const SceneGroup& b) { return a.scene_id < b.scene_id; });
  return scenes;
}

}  // namespace vabokeh
