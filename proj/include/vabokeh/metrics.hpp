#pragma once

// Full-reference quality metrics and the paired-dataset evaluation harness.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vabokeh/errors.hpp"
#include "vabokeh/grid.hpp"
#include "vabokeh/imagery.hpp"
#include "vabokeh/record.hpp"

namespace vabokeh {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// PSNR with peak 1.0 over all samples jointly; +inf for identical images.
inline double psnr(const RasterImage& a, const RasterImage& b) {
  require_same_extent(a, b, "psnr");
  if (a.channels() != b.channels()) throw ArgumentError("psnr: channel count mismatch");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    sse += d * d;
  }
  if (sse == 0.0) return kInfinity;
  return 10.0 * std::log10(static_cast<double>(a.size()) / sse);
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

inline std::vector<double> gaussian_window_1d(int size, double sigma) {
  std::vector<double> g(size);
  const double center = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-((i - center) * (i - center)) / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

namespace detail {

// 'valid' separable filtering of one channel plane.
inline std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                        const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int ow = w - k + 1;
  const int oh = h - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < k; ++t) s += g[t] * plane[static_cast<std::size_t>(y) * w + x + t];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < k; ++t) s += g[t] * tmp[static_cast<std::size_t>(y + t) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace detail

// Single-scale SSIM: Gaussian window, valid positions only, mean over
// positions and then over channels.
inline double ssim(const RasterImage& a, const RasterImage& b, const SsimParams& p = {}) {
  require_same_extent(a, b, "ssim");
  if (a.channels() != b.channels()) throw ArgumentError("ssim: channel count mismatch");
  if (a.height() < p.window || a.width() < p.window) {
    throw ArgumentError("ssim: image smaller than the " + std::to_string(p.window) + "x" +
                        std::to_string(p.window) + " window");
  }
  const int h = a.height();
  const int w = a.width();
  const int ch = a.channels();
  const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
  const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);
  const auto g = gaussian_window_1d(p.window, p.sigma);

  double total = 0.0;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < ch; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.values()[i * ch + c];
      y[i] = b.values()[i * ch + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, h, w, g);
    const auto my = detail::filter_valid(y, h, w, g);
    const auto exx = detail::filter_valid(xx, h, w, g);
    const auto eyy = detail::filter_valid(yy, h, w, g);
    const auto exy = detail::filter_valid(xy, h, w, g);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = exx[i] - mx[i] * mx[i];
      const double vy = eyy[i] - my[i] * my[i];
      const double cov = exy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
      sum += num / den;
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / ch;
}

// ---------------------------------------------------------------------------
// Dataset evaluation

struct MetricEntry {
  std::string scene_id;
  double f_number = 0.0;
  std::optional<double> psnr_db;
  std::optional<double> ssim;
  std::optional<std::string> error;
};

struct MetricAggregate {
  double f_number = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::size_t scene_count = 0;
};

struct MetricReport {
  std::vector<MetricEntry> entries;
  std::vector<MetricAggregate> aggregates;
  std::size_t scene_count = 0;
  std::vector<double> f_numbers;
};

// Prediction file for a scene/aperture; PNG is preferred over PNM.
inline std::optional<std::filesystem::path> find_prediction(const std::filesystem::path& pred_root,
                                                            const std::string& scene_id, double n) {
  const std::string stem = "pred_f" + format_f_number(n);
  for (const char* ext : {".png", ".ppm", ".pgm"}) {
    auto p = pred_root / scene_id / (stem + ext);
    if (std::filesystem::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

// Aggregates are arithmetic means over the scenes without errors, computed in
// scene-id order; an infinite PSNR makes the mean infinite.
inline std::vector<MetricAggregate> aggregate_entries(const std::vector<MetricEntry>& entries,
                                                      const std::vector<double>& f_numbers) {
  std::vector<MetricAggregate> out;
  for (double n : f_numbers) {
    std::vector<const MetricEntry*> ok;
    for (const auto& e : entries) {
      if (e.f_number == n && !e.error) ok.push_back(&e);
    }
    std::sort(ok.begin(), ok.end(),
              [](const MetricEntry* a, const MetricEntry* b) { return a->scene_id < b->scene_id; });
    MetricAggregate agg{n, 0.0, 0.0, ok.size()};
    for (const MetricEntry* e : ok) {
      agg.psnr_db += *e->psnr_db;
      agg.ssim += *e->ssim;
    }
    if (!ok.empty()) {
      agg.psnr_db /= static_cast<double>(ok.size());
      agg.ssim /= static_cast<double>(ok.size());
    }
    out.push_back(agg);
  }
  return out;
}

inline MetricReport evaluate_dataset(const std::filesystem::path& root,
                                     const std::filesystem::path& predictions,
                                     const std::vector<double>& f_numbers) {
  if (f_numbers.empty()) throw ArgumentError("at least one f-number is required");
  const auto scenes = discover_scenes(root);
  MetricReport report;
  report.scene_count = scenes.size();
  report.f_numbers = f_numbers;
  for (const SceneGroup& scene : scenes) {
    for (double n : f_numbers) {
      MetricEntry entry{scene.scene_id, n, std::nullopt, std::nullopt, std::nullopt};
      try {
        const auto gt_it = scene.images.find(n);
        if (gt_it == scene.images.end()) {
          throw IoError("missing ground truth f" + format_f_number(n));
        }
        const auto pred_path = find_prediction(predictions, scene.scene_id, n);
        if (!pred_path) throw IoError("missing prediction pred_f" + format_f_number(n));
        const RasterImage gt = load_image(gt_it->second);
        const RasterImage pred = load_image(*pred_path);
        entry.psnr_db = psnr(pred, gt);
        entry.ssim = ssim(pred, gt);
      } catch (const std::exception& ex) {
        entry.psnr_db.reset();
        entry.ssim.reset();
        entry.error = ex.what();
      }
      report.entries.push_back(std::move(entry));
    }
  }
  report.aggregates = aggregate_entries(report.entries, f_numbers);
  return report;
}

// "inf" for the identical-image sentinel, otherwise a JSON number.
inline nlohmann::ordered_json psnr_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

inline nlohmann::ordered_json report_to_json(const MetricReport& report) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["config"] = {{"psnr", "joint-rgb"},      {"peak", 1.0},
                 {"ssim_window", 11},        {"ssim_sigma", 1.5},
                 {"ssim_k1", 0.01},          {"ssim_k2", 0.03},
                 {"lpips", nullptr}};
  j["scene_count"] = report.scene_count;
  ordered_json scenes = ordered_json::array();
  for (const auto& e : report.entries) {
    ordered_json row;
    row["scene_id"] = e.scene_id;
    row["f_number"] = format_f_number(e.f_number);
    row["psnr_db"] = e.psnr_db ? psnr_json(*e.psnr_db) : ordered_json(nullptr);
    row["ssim"] = e.ssim ? ordered_json(*e.ssim) : ordered_json(nullptr);
    row["error"] = e.error ? ordered_json(*e.error) : ordered_json(nullptr);
    scenes.push_back(std::move(row));
  }
  j["scenes"] = std::move(scenes);
  ordered_json agg = ordered_json::array();
  for (const auto& a : report.aggregates) {
    ordered_json row;
    row["f_number"] = format_f_number(a.f_number);
    row["psnr_db"] = a.scene_count ? psnr_json(a.psnr_db) : ordered_json(nullptr);
    row["ssim"] = a.scene_count ? ordered_json(a.ssim) : ordered_json(nullptr);
    row["scene_count"] = a.scene_count;
    agg.push_back(std::move(row));
  }
  j["aggregate"] = std::move(agg);
  std::size_t errors = 0;
  for (const auto& e : report.entries) errors += e.error.has_value();
  j["error_count"] = errors;
  return j;
}

inline std::string report_table(const MetricReport& report) {
  auto fmt_psnr = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  auto fmt_ssim = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %8s %12s %10s  %s\n", "scene_id", "f_number", "psnr_db",
                "ssim", "error");
  out << line;
  for (const auto& e : report.entries) {
    std::snprintf(line, sizeof line, "%-20s %8s %12s %10s  %s\n", e.scene_id.c_str(),
                  format_f_number(e.f_number).c_str(),
                  e.psnr_db ? fmt_psnr(*e.psnr_db).c_str() : "-",
                  e.ssim ? fmt_ssim(*e.ssim).c_str() : "-", e.error ? e.error->c_str() : "");
    out << line;
  }
  for (const auto& a : report.aggregates) {
    std::snprintf(line, sizeof line, "%-20s %8s %12s %10s  n=%zu\n", "MEAN",
                  format_f_number(a.f_number).c_str(),
                  a.scene_count ? fmt_psnr(a.psnr_db).c_str() : "-",
                  a.scene_count ? fmt_ssim(a.ssim).c_str() : "-", a.scene_count);
    out << line;
  }
  return out.str();
}

}  // namespace vabokeh
