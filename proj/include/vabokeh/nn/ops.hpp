#pragma once

// Forward kernels used by the fusion blocks: convolution, activations,
// normalization, pooling and the sinusoidal lens embedding.

#include <cmath>
#include <string>
#include <vector>

#include "vabokeh/errors.hpp"
#include "vabokeh/nn/tensor.hpp"

namespace vabokeh::nn {

inline constexpr double kNormEpsilon = 1e-5;
inline constexpr int kDefaultEmbedDim = 32;
inline constexpr double kEmbedBase = 10000.0;

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  std::vector<double> weight;  // [out][in][k][k]
  std::vector<double> bias;    // [out], empty for no bias

  static ConvSpec zeros(int in, int out, int kernel, int stride = 1, int padding = -1,
                        bool with_bias = true) {
    ConvSpec s{in, out, kernel, stride, padding < 0 ? kernel / 2 : padding, {}, {}};
    s.weight.assign(static_cast<std::size_t>(out) * in * kernel * kernel, 0.0);
    if (with_bias) s.bias.assign(out, 0.0);
    return s;
  }

  double& w(int o, int i, int ky, int kx) {
    return weight[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
  }
  double w(int o, int i, int ky, int kx) const {
    return weight[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
  }

  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  void validate() const {
    if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1 || padding < 0) {
      throw ArgumentError("conv spec has invalid geometry");
    }
    if (weight.size() != static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel) {
      throw ArgumentError("conv weight count does not equal out*in*k*k");
    }
    if (!bias.empty() && bias.size() != static_cast<std::size_t>(out_channels)) {
      throw ArgumentError("conv bias count does not equal out channels");
    }
  }
};

// Cross-correlation of a [C,H,W] input with zero padding.
inline Tensor conv2d(const Tensor& x, const ConvSpec& spec) {
  spec.validate();
  x.require_rank(3, "conv2d");
  if (x.dim(0) != spec.in_channels) {
    throw ArgumentError("conv2d: input has " + std::to_string(x.dim(0)) +
                        " channels, spec expects " + std::to_string(spec.in_channels));
  }
  const int h = x.dim(1), w = x.dim(2), k = spec.kernel, s = spec.stride, p = spec.padding;
  const int oh = (h + 2 * p - k) / s + 1;
  const int ow = (w + 2 * p - k) / s + 1;
  if (h + 2 * p < k || w + 2 * p < k) throw ArgumentError("conv2d: kernel larger than input");
  Tensor out({spec.out_channels, oh, ow});
  for (int o = 0; o < spec.out_channels; ++o) {
    const double b = spec.bias.empty() ? 0.0 : spec.bias[o];
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) out.at(o, oy, ox) = b;
    }
    for (int i = 0; i < spec.in_channels; ++i) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const double wt = spec.w(o, i, ky, kx);
          if (wt == 0.0) continue;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s + ky - p;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * s + kx - p;
              if (ix < 0 || ix >= w) continue;
              out.at(o, oy, ox) += wt * x.at(i, iy, ix);
            }
          }
        }
      }
    }
  }
  return out;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
inline double relu(double v) { return v > 0.0 ? v : 0.0; }
inline double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

template <typename Fn>
Tensor map(const Tensor& x, Fn fn) {
  Tensor out = x;
  for (double& v : out.values()) v = fn(v);
  return out;
}

inline Tensor sigmoid(const Tensor& x) { return map(x, [](double v) { return sigmoid(v); }); }
inline Tensor relu(const Tensor& x) { return map(x, [](double v) { return relu(v); }); }
inline Tensor gelu(const Tensor& x) { return map(x, [](double v) { return gelu(v); }); }

// Evaluation-mode batch normalization with stored statistics.
struct BatchNormParams {
  std::vector<double> gamma, beta, running_mean, running_var;
  double eps = kNormEpsilon;

  static BatchNormParams identity(int channels) {
    return {std::vector<double>(channels, 1.0), std::vector<double>(channels, 0.0),
            std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
  }
  int channels() const { return static_cast<int>(gamma.size()); }
};

inline Tensor batchnorm_eval(const Tensor& x, const BatchNormParams& bn) {
  x.require_rank(3, "batchnorm_eval");
  if (x.dim(0) != bn.channels()) throw ArgumentError("batchnorm_eval: channel count mismatch");
  Tensor out = x;
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  for (int c = 0; c < x.dim(0); ++c) {
    const double scale = bn.gamma[c] / std::sqrt(bn.running_var[c] + bn.eps);
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = out[c * plane + i];
      v = (v - bn.running_mean[c]) * scale + bn.beta[c];
    }
  }
  return out;
}

struct LayerNormParams {
  std::vector<double> gamma, beta;
  double eps = kNormEpsilon;

  static LayerNormParams identity(int features) {
    return {std::vector<double>(features, 1.0), std::vector<double>(features, 0.0)};
  }
  int features() const { return static_cast<int>(gamma.size()); }
};

// Normalizes one feature vector (biased variance).
inline std::vector<double> layernorm(std::span<const double> v, const LayerNormParams& ln) {
  if (static_cast<int>(v.size()) != ln.features()) {
    throw ArgumentError("layernorm: feature count mismatch");
  }
  double mean = 0.0;
  for (double a : v) mean += a;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double a : v) var += (a - mean) * (a - mean);
  var /= static_cast<double>(v.size());
  const double inv = 1.0 / std::sqrt(var + ln.eps);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) * inv * ln.gamma[i] + ln.beta[i];
  return out;
}

// [C,H,W]: normalizes the channel vector at every spatial position.
inline Tensor layernorm_channels(const Tensor& x, const LayerNormParams& ln) {
  x.require_rank(3, "layernorm_channels");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out = x;
  std::vector<double> v(c);
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      for (int k = 0; k < c; ++k) v[k] = x.at(k, y, xx);
      const auto n = layernorm(v, ln);
      for (int k = 0; k < c; ++k) out.at(k, y, xx) = n[k];
    }
  }
  return out;
}

// Per-channel spatial mean, [C,H,W] -> [C,1,1].
inline Tensor gap_channel(const Tensor& x) {
  x.require_rank(3, "gap_channel");
  const int c = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  Tensor out({c, 1, 1});
  for (int k = 0; k < c; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += x[k * plane + i];
    out[k] = s / static_cast<double>(plane);
  }
  return out;
}

// [C,H,W] -> [H*W, C] in raster order.
inline Tensor to_sequence(const Tensor& x) {
  x.require_rank(3, "to_sequence");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor seq({h * w, c});
  for (int k = 0; k < c; ++k) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) seq.at(y * w + xx, k) = x.at(k, y, xx);
    }
  }
  return seq;
}

inline Tensor from_sequence(const Tensor& seq, int h, int w) {
  seq.require_rank(2, "from_sequence");
  if (seq.dim(0) != h * w) throw ArgumentError("from_sequence: length does not match H*W");
  const int c = seq.dim(1);
  Tensor x({c, h, w});
  for (int k = 0; k < c; ++k) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) x.at(k, y, xx) = seq.at(y * w + xx, k);
    }
  }
  return x;
}

// Nearest-neighbour resampling of a [C,H,W] map to (h, w).
inline Tensor upsample_nearest(const Tensor& x, int h, int w) {
  x.require_rank(3, "upsample_nearest");
  Tensor out({x.dim(0), h, w});
  for (int c = 0; c < x.dim(0); ++c) {
    for (int y = 0; y < h; ++y) {
      const int sy = static_cast<int>(static_cast<long long>(y) * x.dim(1) / h);
      for (int xx = 0; xx < w; ++xx) {
        const int sx = static_cast<int>(static_cast<long long>(xx) * x.dim(2) / w);
        out.at(c, y, xx) = x.at(c, sy, sx);
      }
    }
  }
  return out;
}

namespace detail {

inline std::vector<double> sinusoidal_embed_unchecked(double f_number, int dim) {
  std::vector<double> e(dim);
  for (int k = 0; k < dim / 2; ++k) {
    const double omega = std::pow(kEmbedBase, 2.0 * k / dim);
    e[2 * k] = std::sin(f_number / omega);
    e[2 * k + 1] = std::cos(f_number / omega);
  }
  return e;
}

}  // namespace detail

// Interleaved (sin, cos) pairs of f / base^(2k/E).
inline std::vector<double> sinusoidal_embed(double f_number, int dim = kDefaultEmbedDim) {
  if (dim < 2 || dim % 2 != 0) {
    throw ArgumentError("embedding dimension must be even and >= 2, got " + std::to_string(dim));
  }
  if (!(f_number > 0.0)) throw ArgumentError("f-number must be positive");
  return detail::sinusoidal_embed_unchecked(f_number, dim);
}

}  // namespace vabokeh::nn
