#pragma once

// Toy-scale variable-aperture bokeh network:
//   MIFB stem -> S stages of LFMB (stride-2 conv between stages)
//   -> nearest upsample + 1x1 conv with skip adds -> 3x3 output conv + image.
// Weights come from a seeded generator; no training is involved.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vabokeh/errors.hpp"
#include "vabokeh/nn/blocks.hpp"
#include "vabokeh/nn/ops.hpp"
#include "vabokeh/nn/tensor.hpp"
#include "vabokeh/raster_io.hpp"
#include "vabokeh/record.hpp"

namespace vabokeh::nn {

struct VabmConfig {
  int image_channels = 3;
  int base_width = 16;
  int stages = 3;
  int embed_dim = kDefaultEmbedDim;
  int state_dim = 8;
  int attn_reduction = 2;  // attention bottleneck = width / reduction
  std::uint64_t seed = 0;

  int width(int stage) const { return base_width << stage; }
  int mid(int width) const { return std::max(1, width / attn_reduction); }

  void validate() const {
    if (image_channels < 1 || base_width < 1 || stages < 1 || state_dim < 1 ||
        attn_reduction < 1) {
      throw ArgumentError("vabm config values must be positive");
    }
    if (embed_dim < 2 || embed_dim % 2 != 0) throw ArgumentError("embed_dim must be even");
  }

  static VabmConfig from_record(const TextRecord& rec) {
    VabmConfig c;
    c.image_channels = static_cast<int>(rec.number_or("image_channels", c.image_channels));
    c.base_width = static_cast<int>(rec.number_or("base_width", c.base_width));
    c.stages = static_cast<int>(rec.number_or("stages", c.stages));
    c.embed_dim = static_cast<int>(rec.number_or("embed_dim", c.embed_dim));
    c.state_dim = static_cast<int>(rec.number_or("state_dim", c.state_dim));
    c.attn_reduction = static_cast<int>(rec.number_or("attn_reduction", c.attn_reduction));
    if (auto s = rec.get("seed")) c.seed = std::stoull(*s);
    c.validate();
    return c;
  }

  TextRecord to_record() const {
    TextRecord rec;
    rec.set("image_channels", image_channels);
    rec.set("base_width", base_width);
    rec.set("stages", stages);
    rec.set("embed_dim", embed_dim);
    rec.set("state_dim", state_dim);
    rec.set("attn_reduction", attn_reduction);
    rec.set("seed", std::to_string(seed));
    return rec;
  }
};

// Uniform doubles from the raw mt19937_64 stream (portable across standard
// libraries, unlike std::uniform_real_distribution).
class WeightRng {
 public:
  explicit WeightRng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }
  void fill(std::vector<double>& v, double lo, double hi) {
    for (double& x : v) x = uniform(lo, hi);
  }

 private:
  std::mt19937_64 engine_;
};

struct VabmWeights {
  VabmConfig config;
  MifbWeights stem;
  std::vector<LfmbWeights> stages;
  std::vector<ConvSpec> down;  // stage s -> s+1
  std::vector<ConvSpec> up;    // stage s+1 -> s
  ConvSpec head;

  // Structure only, every value zero / identity.
  static VabmWeights zeros(const VabmConfig& cfg) {
    cfg.validate();
    VabmWeights w;
    w.config = cfg;
    const int w0 = cfg.width(0);
    w.stem = MifbWeights::zeros(cfg.image_channels, w0, cfg.mid(w0));
    for (int s = 0; s < cfg.stages; ++s) {
      const int ws = cfg.width(s);
      w.stages.push_back(LfmbWeights::zeros(ws, cfg.mid(ws), cfg.state_dim, cfg.embed_dim));
      if (s + 1 < cfg.stages) {
        w.down.push_back(ConvSpec::zeros(ws, cfg.width(s + 1), 3, 2, 1));
        w.up.push_back(ConvSpec::zeros(cfg.width(s + 1), ws, 1));
      }
    }
    w.head = ConvSpec::zeros(w0, cfg.image_channels, 3);
    return w;
  }

  static VabmWeights random(const VabmConfig& cfg) {
    VabmWeights w = zeros(cfg);
    WeightRng rng(cfg.seed);
    w.visit([&](const std::string& name, std::vector<double>& values,
                const std::vector<int>& shape, bool) { init_tensor(rng, name, values, shape); });
    return w;
  }

  template <typename Fn>
  void visit(Fn&& fn) {
    stem.visit("stem", fn);
    for (std::size_t s = 0; s < stages.size(); ++s) {
      stages[s].visit("stage" + std::to_string(s), fn);
      if (s < down.size()) visit_conv("down" + std::to_string(s), down[s], fn);
    }
    for (std::size_t s = 0; s < up.size(); ++s) visit_conv("up" + std::to_string(s), up[s], fn);
    visit_conv("head", head, fn);
  }

 private:
  static bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  }

  static void init_tensor(WeightRng& rng, const std::string& name, std::vector<double>& v,
                          const std::vector<int>& shape) {
    if (ends_with(name, ".weight") && shape.size() >= 2) {
      int fan_in = 1;
      for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      rng.fill(v, -bound, bound);
    } else if (ends_with(name, ".bias")) {
      rng.fill(v, -0.05, 0.05);
    } else if (ends_with(name, ".gamma")) {
      rng.fill(v, 0.8, 1.2);
    } else if (ends_with(name, ".beta") || ends_with(name, ".running_mean")) {
      rng.fill(v, -0.1, 0.1);
    } else if (ends_with(name, ".running_var")) {
      rng.fill(v, 0.5, 1.5);
    } else if (ends_with(name, ".A")) {
      rng.fill(v, -1.0, -0.05);
    } else if (ends_with(name, ".B") || ends_with(name, ".C")) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(shape.back()));
      rng.fill(v, -bound, bound);
    } else if (ends_with(name, ".delta")) {
      rng.fill(v, 0.01, 0.1);
    } else if (ends_with(name, ".s1") || ends_with(name, ".s2")) {
      std::fill(v.begin(), v.end(), 1.0);
    } else {
      throw ArgumentError("no initializer for parameter '" + name + "'");
    }
  }
};

// Counts trainable weights and biases; running statistics are excluded.
inline std::size_t count_params(const VabmConfig& cfg) {
  VabmWeights w = VabmWeights::zeros(cfg);
  std::size_t n = 0;
  w.visit([&](const std::string&, std::vector<double>& v, const std::vector<int>&, bool trainable) {
    if (trainable) n += v.size();
  });
  return n;
}

class VabmModel {
 public:
  explicit VabmModel(const VabmConfig& cfg) : weights_(VabmWeights::random(cfg)) {}
  explicit VabmModel(VabmWeights weights) : weights_(std::move(weights)) {}

  const VabmWeights& weights() const { return weights_; }

  // image [C,H,W], depth [1,H,W], focal [1,H,W] -> [C,H,W].
  Tensor forward(const Tensor& image, const Tensor& depth, const Tensor& focal,
                 double f_number) const {
    const VabmConfig& cfg = weights_.config;
    image.require_rank(3, "vabm image");
    if (image.dim(0) != cfg.image_channels) throw ArgumentError("vabm: image channel mismatch");
    const auto lens = sinusoidal_embed(f_number, cfg.embed_dim);

    Tensor f = mifb_forward(image, depth, focal, weights_.stem);
    std::vector<Tensor> skips;
    for (int s = 0; s < cfg.stages; ++s) {
      f = lfmb_forward(f, lens, weights_.stages[s]);
      if (s + 1 < cfg.stages) {
        skips.push_back(f);
        f = conv2d(f, weights_.down[s]);
      }
    }
    for (int s = cfg.stages - 2; s >= 0; --s) {
      const Tensor& skip = skips[s];
      f = add(conv2d(upsample_nearest(f, skip.dim(1), skip.dim(2)), weights_.up[s]), skip);
    }
    return add(conv2d(f, weights_.head), image);
  }

 private:
  VabmWeights weights_;
};

inline Tensor vabm_forward(const Tensor& image, const Tensor& depth, const Tensor& focal,
                           double f_number, const VabmConfig& cfg) {
  return VabmModel(cfg).forward(image, depth, focal, f_number);
}

// ---------------------------------------------------------------------------
// Weight bundles: <stem>.bin holds every tensor as little-endian float64 in
// visit order; <stem>.manifest is a text header (the config record) followed
// by one "tensor <name> <d0>x<d1>... <offset> <count>" line per tensor.

inline void save_weights(VabmWeights& w, const std::filesystem::path& stem) {
  std::ofstream bin(stem.string() + ".bin", std::ios::binary | std::ios::trunc);
  std::ofstream manifest(stem.string() + ".manifest", std::ios::trunc);
  if (!bin || !manifest) throw IoError("cannot write weight bundle '" + stem.string() + "'");
  manifest << "# vabokeh weight bundle\n" << w.config.to_record().str() << "dtype = f64le\n";
  std::size_t offset = 0;
  w.visit([&](const std::string& name, std::vector<double>& v, const std::vector<int>& shape,
              bool) {
    std::string dims;
    for (std::size_t i = 0; i < shape.size(); ++i) dims += (i ? "x" : "") + std::to_string(shape[i]);
    manifest << "tensor " << name << " " << dims << " " << offset << " " << v.size() << "\n";
    for (double d : v) {
      const auto bits = std::bit_cast<std::uint64_t>(d);
      char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
      bin.write(bytes, 8);
    }
    offset += v.size();
  });
  if (!bin || !manifest) throw IoError("write failure on weight bundle '" + stem.string() + "'");
}

inline VabmWeights load_weights(const std::filesystem::path& stem) {
  std::ifstream manifest(stem.string() + ".manifest");
  if (!manifest) throw IoError("cannot open '" + stem.string() + ".manifest'");
  std::string header;
  std::vector<std::string> tensor_lines;
  for (std::string line; std::getline(manifest, line);) {
    if (line.rfind("tensor ", 0) == 0) {
      tensor_lines.push_back(line);
    } else {
      header += line + "\n";
    }
  }
  TextRecord rec = TextRecord::parse(header);
  if (rec.get("dtype").value_or("") != "f64le") throw FormatError("weight bundle dtype must be f64le");
  TextRecord cfg_rec;
  for (const auto& [k, v] : rec.entries()) {
    if (k != "dtype") cfg_rec.set(k, v);
  }
  VabmWeights w = VabmWeights::zeros(VabmConfig::from_record(cfg_rec));

  const auto bytes = codec::read_file_bytes(stem.string() + ".bin");
  std::size_t index = 0;
  w.visit([&](const std::string& name, std::vector<double>& v, const std::vector<int>&, bool) {
    if (index >= tensor_lines.size()) throw FormatError("manifest is missing tensor '" + name + "'");
    std::istringstream line(tensor_lines[index++]);
    std::string tag, entry_name, dims;
    std::size_t offset = 0, count = 0;
    line >> tag >> entry_name >> dims >> offset >> count;
    if (entry_name != name || count != v.size()) {
      throw FormatError("manifest entry '" + entry_name + "' does not match expected '" + name + "'");
    }
    if ((offset + count) * 8 > bytes.size()) throw FormatError("weight data truncated");
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(bytes[(offset + i) * 8 + b]) << (8 * b);
      }
      v[i] = std::bit_cast<double>(bits);
    }
  });
  if (index != tensor_lines.size()) throw FormatError("manifest lists extra tensors");
  return w;
}

}  // namespace vabokeh::nn
