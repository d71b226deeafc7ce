#pragma once

// HTTP/JSON front end for the rendering pipeline.
//
//   GET  /api/health
//   GET  /api/scenes
//   GET  /api/scenes/{id}/image     PNG, 8-bit
//   GET  /api/scenes/{id}/depth     PNG, 16-bit normalized depth
//   POST /api/focal-plane           {scene_id | image_png+depth_png, mask, k?, bins?}
//   POST /api/render                {scene_id | image_png+depth_png, mask, f_number, lens?}
//
// Errors are {"error": {"code", "message"}}. Handlers live on ServiceCore so
// they can be exercised without a socket; mount() wires them into httplib.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "vabokeh/base64.hpp"
#include "vabokeh/imagery.hpp"
#include "vabokeh/pipeline.hpp"
#include "vabokeh/rle.hpp"

namespace vabokeh::service {

using nlohmann::ordered_json;

inline constexpr int kDefaultPort = 8080;
inline constexpr const char* kPortEnv = "VABOKEH_PORT";

struct Reply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

inline Reply json_reply(const ordered_json& j, int status = 200) {
  return {status, "application/json", j.dump()};
}

inline Reply error_reply(int status, const std::string& code, const std::string& message) {
  ordered_json j;
  j["error"] = {{"code", code}, {"message", message}};
  return json_reply(j, status);
}

inline ordered_json rle_to_json(const MaskRle& rle) {
  return {{"width", rle.width}, {"height", rle.height}, {"runs", rle.runs}};
}

inline MaskRle rle_from_json(const ordered_json& j) {
  if (!j.is_object() || !j.contains("width") || !j.contains("height") || !j.contains("runs") ||
      !j["width"].is_number_integer() || !j["height"].is_number_integer() ||
      !j["runs"].is_array()) {
    throw ApiError(400, "bad_mask", "mask must be {\"width\", \"height\", \"runs\"}");
  }
  MaskRle rle;
  rle.width = j["width"].get<int>();
  rle.height = j["height"].get<int>();
  for (const auto& r : j["runs"]) {
    if (!r.is_number_unsigned() && !(r.is_number_integer() && r.get<long long>() >= 0)) {
      throw ApiError(400, "bad_mask", "mask runs must be non-negative integers");
    }
    rle.runs.push_back(r.get<std::uint32_t>());
  }
  return rle;
}

inline ordered_json focal_plane_json(const FocalPlane& fp) {
  ordered_json j;
  j["d_f"] = fp.focus_depth;
  j["dof"] = {fp.dof.lo, fp.dof.hi};
  j["k"] = fp.thresholds.classes;
  j["bins"] = fp.thresholds.bins;
  j["thresholds"] = fp.thresholds.thresholds;
  j["selected_class"] = fp.selected_class;
  j["region_pixels"] = count_set(fp.region_mask);
  j["region_mask"] = rle_to_json(encode_rle(fp.region_mask));
  return j;
}

// Reads the port from the environment, falling back to the given default.
inline int port_from_env(int fallback = kDefaultPort) {
  const char* v = std::getenv(kPortEnv);
  if (!v || !*v) return fallback;
  const auto parsed = parse_number(v);
  if (!parsed || *parsed < 0 || *parsed > 65535 || *parsed != static_cast<int>(*parsed)) {
    throw ArgumentError(std::string(kPortEnv) + " is not a valid port: '" + v + "'");
  }
  return static_cast<int>(*parsed);
}

struct SceneAsset {
  SceneGroup group;
  RasterImage image;
  std::optional<DepthMap> depth;
  std::string image_png;
  std::string depth_png;
};

struct RenderResult {
  VariableRender render;
  std::vector<std::uint8_t> png;
  double total_ms = 0.0;
};

class ServiceCore {
 public:
  // Held for the duration of one compute request.
  class Slot {
   public:
    explicit Slot(std::atomic<int>* counter) : counter_(counter) {}
    Slot(Slot&& o) noexcept : counter_(std::exchange(o.counter_, nullptr)) {}
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;
    Slot& operator=(Slot&&) = delete;
    ~Slot() {
      if (counter_) counter_->fetch_sub(1);
    }

   private:
    std::atomic<int>* counter_;
  };

  explicit ServiceCore(const std::optional<std::filesystem::path>& scene_root, int worker_limit = 2,
                       PipelineConfig defaults = {})
      : worker_limit_(worker_limit), defaults_(std::move(defaults)) {
    if (worker_limit < 1) throw ArgumentError("worker limit must be >= 1");
    defaults_.validate();
    if (scene_root) load_scenes(*scene_root);
  }

  int worker_limit() const { return worker_limit_; }
  int in_flight() const { return in_flight_.load(); }
  const std::map<std::string, SceneAsset>& scenes() const { return scenes_; }
  const PipelineConfig& defaults() const { return defaults_; }

  std::optional<Slot> try_acquire() {
    int cur = in_flight_.load();
    while (cur < worker_limit_) {
      if (in_flight_.compare_exchange_weak(cur, cur + 1)) return Slot(&in_flight_);
    }
    return std::nullopt;
  }

  Reply health() const { return json_reply({{"status", "ok"}}); }

  Reply list_scenes() const {
    ordered_json list = ordered_json::array();
    for (const auto& [id, s] : scenes_) {
      ordered_json f_numbers = ordered_json::array();
      for (const auto& [n, path] : s.group.images) f_numbers.push_back(format_f_number(n));
      list.push_back({{"scene_id", id},
                      {"width", s.image.width()},
                      {"height", s.image.height()},
                      {"f_numbers", f_numbers},
                      {"has_depth", s.depth.has_value()}});
    }
    return json_reply({{"scenes", list}});
  }

  Reply scene_image(const std::string& id) const {
    return guarded([&] { return Reply{200, "image/png", scene(id).image_png}; });
  }

  Reply scene_depth(const std::string& id) const {
    return guarded([&] {
      const SceneAsset& s = scene(id);
      if (!s.depth) throw ApiError(404, "missing_depth", "scene '" + id + "' has no depth map");
      return Reply{200, "image/png", s.depth_png};
    });
  }

  Reply focal_plane(const std::string& body) {
    return guarded([&] {
      auto slot = acquire_or_throw();
      const ordered_json req = parse_body(body);
      const Inputs in = resolve_inputs(req);
      const BinaryMask mask = mask_for(req, in.image.height(), in.image.width());
      PipelineConfig cfg = config_for(req);
      const FocalPlane fp = resolve_focal_plane(in.depth, mask, cfg.classes, cfg.bins);
      ordered_json j = focal_plane_json(fp);
      j["focus_distance_mm"] =
          cfg.focus_distance_mm.value_or(cfg.calibration.to_metric(fp.focus_depth));
      return json_reply(j);
    });
  }

  Reply render(const std::string& body) {
    return guarded([&] {
      auto slot = acquire_or_throw();
      const auto t0 = std::chrono::steady_clock::now();
      const ordered_json req = parse_body(body);
      const Inputs in = resolve_inputs(req);
      const BinaryMask mask = mask_for(req, in.image.height(), in.image.width());
      if (!req.contains("f_number")) throw ApiError(400, "bad_f_number", "f_number is required");
      const auto& fn = req["f_number"];
      if (!fn.is_number() || !(fn.get<double>() > 0.0) || !std::isfinite(fn.get<double>())) {
        throw ApiError(400, "bad_f_number", "f_number must be a positive number");
      }
      const double n = fn.get<double>();
      PipelineConfig cfg = config_for(req);
      cfg.f_number = n;

      const VariableRender vr = render_variable(in.image, in.depth, mask, {n}, cfg);
      const ApertureRender& ar = vr.renders.at(n);
      const auto png = encode_png(ar.output.image, 8);
      const double total_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      return json_reply(render_json(vr, ar, png, total_ms));
    });
  }

  // Response body for one aperture; timing is the only nondeterministic field.
  static ordered_json render_json(const VariableRender& vr, const ApertureRender& ar,
                                  const std::vector<std::uint8_t>& png, double total_ms) {
    double max_r = 0.0;
    for (double v : ar.coc.radius.data()) max_r = std::max(max_r, v);
    ordered_json j;
    j["width"] = ar.output.image.width();
    j["height"] = ar.output.image.height();
    j["f_number"] = ar.f_number;
    j["focus_distance_mm"] = vr.focus_distance_mm;
    j["render"] = base64_encode(png);
    j["focal_plane"] = focal_plane_json(vr.focal);
    j["coc_stats"] = {{"mean", mean_of(ar.coc.radius.data())},
                      {"max", max_r},
                      {"effective_mean", ar.output.stats.mean_radius},
                      {"effective_max", ar.output.stats.max_radius},
                      {"protected_pixels", ar.output.stats.protected_pixel_count}};
    j["timing"] = {{"render_ms", ar.output.stats.wall_time_s * 1000.0}, {"total_ms", total_ms}};
    return j;
  }

 private:
  struct Inputs {
    RasterImage image;
    DepthMap depth;
  };

  template <typename Fn>
  Reply guarded(Fn&& fn) const {
    try {
      return fn();
    } catch (const ApiError& e) {
      return error_reply(e.status(), e.code(), e.what());
    } catch (const DegenerateInputError& e) {
      return error_reply(400, "degenerate_depth", e.what());
    } catch (const FormatError& e) {
      return error_reply(400, "bad_request", e.what());
    } catch (const ArgumentError& e) {
      return error_reply(400, "bad_request", e.what());
    } catch (const std::exception& e) {
      return error_reply(500, "internal", e.what());
    }
  }

  Slot acquire_or_throw() {
    auto slot = try_acquire();
    if (!slot) {
      throw ApiError(429, "over_capacity",
                     "worker limit of " + std::to_string(worker_limit_) + " reached");
    }
    return std::move(*slot);
  }

  static ordered_json parse_body(const std::string& body) {
    ordered_json j;
    try {
      j = ordered_json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw ApiError(400, "bad_json", e.what());
    }
    if (!j.is_object()) throw ApiError(400, "bad_json", "request body must be a JSON object");
    return j;
  }

  const SceneAsset& scene(const std::string& id) const {
    const auto it = scenes_.find(id);
    if (it == scenes_.end()) throw ApiError(404, "unknown_scene", "unknown scene '" + id + "'");
    return it->second;
  }

  static std::vector<std::uint8_t> decode_field(const ordered_json& req, const char* key) {
    if (!req[key].is_string()) throw ApiError(400, "bad_request", std::string(key) + " must be base64");
    try {
      return base64_decode(req[key].get<std::string>());
    } catch (const FormatError& e) {
      throw ApiError(400, "bad_image", std::string(key) + ": " + e.what());
    }
  }

  Inputs resolve_inputs(const ordered_json& req) const {
    if (req.contains("scene_id")) {
      if (!req["scene_id"].is_string()) throw ApiError(400, "bad_request", "scene_id must be a string");
      const SceneAsset& s = scene(req["scene_id"].get<std::string>());
      if (!s.depth) throw ApiError(400, "missing_depth", "scene '" + s.group.scene_id + "' has no depth map");
      return {s.image, *s.depth};
    }
    if (!req.contains("image_png")) {
      throw ApiError(400, "bad_request", "either scene_id or image_png is required");
    }
    if (!req.contains("depth_png")) throw ApiError(400, "missing_depth", "depth_png is required");
    Inputs in;
    try {
      in.image = decode_image(decode_field(req, "image_png"), codec::FileKind::png);
      in.depth = decode_depth(decode_field(req, "depth_png"), codec::FileKind::png);
    } catch (const FormatError& e) {
      throw ApiError(400, "bad_image", e.what());
    }
    if (!in.image.same_extent(in.depth)) {
      throw ApiError(400, "bad_request", "image and depth dimensions differ");
    }
    return in;
  }

  static BinaryMask mask_for(const ordered_json& req, int height, int width) {
    if (!req.contains("mask")) throw ApiError(400, "bad_mask", "mask is required");
    const MaskRle rle = rle_from_json(req["mask"]);
    if (rle.width != width || rle.height != height) {
      throw ApiError(400, "mask_shape",
                     "mask is " + std::to_string(rle.width) + "x" + std::to_string(rle.height) +
                         ", image is " + std::to_string(width) + "x" + std::to_string(height));
    }
    try {
      return decode_rle(rle);
    } catch (const ArgumentError& e) {
      throw ApiError(400, "bad_mask", e.what());
    }
  }

  // Optional "lens" object uses the keys of the text configuration record;
  // top-level "k" and "bins" are accepted as shorthands.
  PipelineConfig config_for(const ordered_json& req) const {
    TextRecord rec = defaults_.to_record();
    auto apply = [&](const std::string& key, const ordered_json& v) {
      if (v.is_number()) {
        rec.set(key, v.get<double>());
      } else if (v.is_string()) {
        rec.set(key, v.get<std::string>());
      } else if (v.is_boolean()) {
        rec.set(key, v.get<bool>() ? "true" : "false");
      } else {
        throw ApiError(400, "bad_config", "value for '" + key + "' must be a number or string");
      }
    };
    if (req.contains("lens")) {
      if (!req["lens"].is_object()) throw ApiError(400, "bad_config", "lens must be an object");
      for (const auto& [key, v] : req["lens"].items()) apply(key, v);
    }
    for (const char* key : {"k", "bins"}) {
      if (req.contains(key)) apply(key, req[key]);
    }
    try {
      return PipelineConfig::from_record(rec);
    } catch (const std::exception& e) {
      throw ApiError(400, "bad_config", e.what());
    }
  }

  // PNG files are served as stored, so a client that posts them back decodes
  // exactly what the server loaded; other formats are re-encoded.
  template <typename Encode>
  static std::string png_bytes(const std::filesystem::path& path, Encode&& encode) {
    if (codec::kind_from_path(path) == codec::FileKind::png) {
      const auto raw = codec::read_file_bytes(path);
      return {raw.begin(), raw.end()};
    }
    const auto bytes = encode();
    return {bytes.begin(), bytes.end()};
  }

  void load_scenes(const std::filesystem::path& root) {
    for (SceneGroup& g : discover_scenes(root)) {
      SceneAsset asset;
      asset.image = load_image(g.all_in_focus_path());
      asset.image_png = png_bytes(g.all_in_focus_path(), [&] { return encode_png(asset.image, 8); });
      if (g.depth_path) {
        asset.depth = load_depth(*g.depth_path);
        if (!asset.depth->same_extent(asset.image)) {
          throw FormatError("scene '" + g.scene_id + "': depth and image dimensions differ");
        }
        const DepthMap& d = *asset.depth;
        asset.depth_png = png_bytes(*g.depth_path, [&] {
          return codec::encode_png(d.height(), d.width(), 1, 16, quantize(d.data(), 16));
        });
      }
      asset.group = std::move(g);
      scenes_.emplace(asset.group.scene_id, std::move(asset));
    }
  }

  int worker_limit_;
  PipelineConfig defaults_;
  std::map<std::string, SceneAsset> scenes_;
  std::atomic<int> in_flight_{0};
};

inline void send(httplib::Response& res, const Reply& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

inline void mount(httplib::Server& server, ServiceCore& core) {
  server.Get("/api/health", [&](const httplib::Request&, httplib::Response& res) {
    send(res, core.health());
  });
  server.Get("/api/scenes", [&](const httplib::Request&, httplib::Response& res) {
    send(res, core.list_scenes());
  });
  server.Get(R"(/api/scenes/([^/]+)/image)", [&](const httplib::Request& req, httplib::Response& res) {
    send(res, core.scene_image(req.matches[1]));
  });
  server.Get(R"(/api/scenes/([^/]+)/depth)", [&](const httplib::Request& req, httplib::Response& res) {
    send(res, core.scene_depth(req.matches[1]));
  });
  server.Post("/api/focal-plane", [&](const httplib::Request& req, httplib::Response& res) {
    send(res, core.focal_plane(req.body));
  });
  server.Post("/api/render", [&](const httplib::Request& req, httplib::Response& res) {
    send(res, core.render(req.body));
  });
}

// Handler threads exceed the worker limit so surplus compute requests reach
// the gate and get a 429; the accept queue itself is bounded too.
inline void configure_pool(httplib::Server& server, int worker_limit) {
  const std::size_t threads = static_cast<std::size_t>(worker_limit) + 4;
  const std::size_t queued = static_cast<std::size_t>(worker_limit) * 4 + 16;
  server.new_task_queue = [threads, queued] { return new httplib::ThreadPool(threads, queued); };
}

}  // namespace vabokeh::service
