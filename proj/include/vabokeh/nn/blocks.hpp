#pragma once

// Fusion blocks of the variable-aperture bokeh network, forward only.
//
//   MIFB:  x   = Conv(L_r)
//          x_g = x + Conv(I_d),  x_l = x + Conv(F_p)
//          w_g = sigmoid(BN(Conv(ReLU(BN(Conv(GAP(x_g)))))))   channel gate
//          w_l = sigmoid(BN(Conv(ReLU(BN(Conv(x_l))))))        spatial gate
//          out = x_g * w_g + x_l * w_l + x
//
//   LFB:   y   = Conv(GELU(Conv(y_i)))
//          w   = sigmoid(Conv(ReLU(Conv(GAP(y)))))
//          out = (y * w) * lens + lens,   lens = P e + b broadcast per channel
//
//   LFMB:  Z   = Scan(LN(X)) + s1 * X
//          out = LFB(LN(Z)) + s2 * Z

#include <string>
#include <vector>

#include "vabokeh/errors.hpp"
#include "vabokeh/nn/ops.hpp"
#include "vabokeh/nn/ssm.hpp"
#include "vabokeh/nn/tensor.hpp"

namespace vabokeh::nn {

// Parameter visitor protocol: fn(name, values, shape, trainable).
template <typename Fn>
void visit_conv(const std::string& name, ConvSpec& conv, Fn&& fn) {
  fn(name + ".weight", conv.weight,
     std::vector<int>{conv.out_channels, conv.in_channels, conv.kernel, conv.kernel}, true);
  if (!conv.bias.empty()) fn(name + ".bias", conv.bias, std::vector<int>{conv.out_channels}, true);
}

template <typename Fn>
void visit_bn(const std::string& name, BatchNormParams& bn, Fn&& fn) {
  const std::vector<int> shape{bn.channels()};
  fn(name + ".gamma", bn.gamma, shape, true);
  fn(name + ".beta", bn.beta, shape, true);
  fn(name + ".running_mean", bn.running_mean, shape, false);
  fn(name + ".running_var", bn.running_var, shape, false);
}

template <typename Fn>
void visit_ln(const std::string& name, LayerNormParams& ln, Fn&& fn) {
  const std::vector<int> shape{ln.features()};
  fn(name + ".gamma", ln.gamma, shape, true);
  fn(name + ".beta", ln.beta, shape, true);
}

template <typename Fn>
void visit_ssm(const std::string& name, SSMParams& p, Fn&& fn) {
  const std::vector<int> cn{p.channels, p.state};
  fn(name + ".A", p.decay, cn, true);
  fn(name + ".B", p.input, cn, true);
  fn(name + ".C", p.output, cn, true);
  fn(name + ".delta", p.step, std::vector<int>{p.channels}, true);
}

// ---------------------------------------------------------------------------
// MIFB

struct MifbWeights {
  ConvSpec image_conv;  // L_r -> x
  ConvSpec depth_conv;  // I_d -> added into x_g
  ConvSpec focal_conv;  // F_p -> added into x_l
  ConvSpec global_reduce;
  BatchNormParams global_bn1;
  ConvSpec global_expand;
  BatchNormParams global_bn2;
  ConvSpec local_reduce;
  BatchNormParams local_bn1;
  ConvSpec local_expand;
  BatchNormParams local_bn2;

  // All-zero convolutions and identity normalizations.
  static MifbWeights zeros(int image_channels, int width, int mid) {
    return {ConvSpec::zeros(image_channels, width, 3), ConvSpec::zeros(1, width, 3),
            ConvSpec::zeros(1, width, 3),              ConvSpec::zeros(width, mid, 1),
            BatchNormParams::identity(mid),            ConvSpec::zeros(mid, width, 1),
            BatchNormParams::identity(width),          ConvSpec::zeros(width, mid, 3),
            BatchNormParams::identity(mid),            ConvSpec::zeros(mid, width, 1),
            BatchNormParams::identity(width)};
  }

  int width() const { return image_conv.out_channels; }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    visit_conv(prefix + ".image_conv", image_conv, fn);
    visit_conv(prefix + ".depth_conv", depth_conv, fn);
    visit_conv(prefix + ".focal_conv", focal_conv, fn);
    visit_conv(prefix + ".global_reduce", global_reduce, fn);
    visit_bn(prefix + ".global_bn1", global_bn1, fn);
    visit_conv(prefix + ".global_expand", global_expand, fn);
    visit_bn(prefix + ".global_bn2", global_bn2, fn);
    visit_conv(prefix + ".local_reduce", local_reduce, fn);
    visit_bn(prefix + ".local_bn1", local_bn1, fn);
    visit_conv(prefix + ".local_expand", local_expand, fn);
    visit_bn(prefix + ".local_bn2", local_bn2, fn);
  }
};

struct MifbTrace {
  Tensor x, x_global, x_local;
  Tensor gate_global;  // [C,1,1]
  Tensor gate_local;   // [C,H,W]
  Tensor out;
};

inline MifbTrace mifb_trace(const Tensor& image, const Tensor& depth, const Tensor& focal,
                            const MifbWeights& w) {
  image.require_rank(3, "mifb image");
  depth.require_rank(3, "mifb depth");
  focal.require_rank(3, "mifb focal");
  if (image.dim(1) != depth.dim(1) || image.dim(2) != depth.dim(2) ||
      image.dim(1) != focal.dim(1) || image.dim(2) != focal.dim(2)) {
    throw ArgumentError("mifb: image, depth and focal inputs must be spatially aligned");
  }
  MifbTrace t;
  t.x = conv2d(image, w.image_conv);
  t.x_global = add(t.x, conv2d(depth, w.depth_conv));
  t.x_local = add(t.x, conv2d(focal, w.focal_conv));

  Tensor g = conv2d(gap_channel(t.x_global), w.global_reduce);
  g = relu(batchnorm_eval(g, w.global_bn1));
  g = batchnorm_eval(conv2d(g, w.global_expand), w.global_bn2);
  t.gate_global = sigmoid(g);

  Tensor l = conv2d(t.x_local, w.local_reduce);
  l = relu(batchnorm_eval(l, w.local_bn1));
  l = batchnorm_eval(conv2d(l, w.local_expand), w.local_bn2);
  t.gate_local = sigmoid(l);

  t.out = add(add(multiply_channelwise(t.x_global, t.gate_global.data()),
                  multiply(t.x_local, t.gate_local)),
              t.x);
  return t;
}

inline Tensor mifb_forward(const Tensor& image, const Tensor& depth, const Tensor& focal,
                           const MifbWeights& w) {
  return mifb_trace(image, depth, focal, w).out;
}

// ---------------------------------------------------------------------------
// LFB

struct LfbWeights {
  ConvSpec conv1;
  ConvSpec conv2;
  ConvSpec attn_reduce;
  ConvSpec attn_expand;
  std::vector<double> lens_weight;  // [C][E]
  std::vector<double> lens_bias;    // [C]
  int embed_dim = kDefaultEmbedDim;

  static LfbWeights zeros(int width, int mid, int embed_dim) {
    return {ConvSpec::zeros(width, width, 3),
            ConvSpec::zeros(width, width, 1),
            ConvSpec::zeros(width, mid, 1),
            ConvSpec::zeros(mid, width, 1),
            std::vector<double>(static_cast<std::size_t>(width) * embed_dim, 0.0),
            std::vector<double>(width, 0.0),
            embed_dim};
  }

  int width() const { return conv1.out_channels; }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    visit_conv(prefix + ".conv1", conv1, fn);
    visit_conv(prefix + ".conv2", conv2, fn);
    visit_conv(prefix + ".attn_reduce", attn_reduce, fn);
    visit_conv(prefix + ".attn_expand", attn_expand, fn);
    fn(prefix + ".lens_proj.weight", lens_weight, std::vector<int>{width(), embed_dim}, true);
    fn(prefix + ".lens_proj.bias", lens_bias, std::vector<int>{width()}, true);
  }
};

// Linear projection of the lens embedding to one value per channel.
inline std::vector<double> project_lens(std::span<const double> embedding, const LfbWeights& w) {
  if (static_cast<int>(embedding.size()) != w.embed_dim) {
    throw ArgumentError("lens embedding has " + std::to_string(embedding.size()) +
                        " entries, expected " + std::to_string(w.embed_dim));
  }
  const int c = w.width();
  std::vector<double> out(c);
  for (int k = 0; k < c; ++k) {
    double s = w.lens_bias[k];
    for (int e = 0; e < w.embed_dim; ++e) {
      s += w.lens_weight[static_cast<std::size_t>(k) * w.embed_dim + e] * embedding[e];
    }
    out[k] = s;
  }
  return out;
}

struct LfbTrace {
  Tensor y;
  Tensor gate;  // [C,1,1]
  std::vector<double> lens;
  Tensor out;
};

inline LfbTrace lfb_trace(const Tensor& input, std::span<const double> embedding,
                          const LfbWeights& w) {
  input.require_rank(3, "lfb input");
  LfbTrace t;
  t.y = conv2d(gelu(conv2d(input, w.conv1)), w.conv2);
  t.gate = sigmoid(conv2d(relu(conv2d(gap_channel(t.y), w.attn_reduce)), w.attn_expand));
  t.lens = project_lens(embedding, w);
  const Tensor gated = multiply_channelwise(t.y, t.gate.data());
  t.out = add_channelwise(multiply_channelwise(gated, t.lens), t.lens);
  return t;
}

inline Tensor lfb_forward(const Tensor& input, std::span<const double> embedding,
                          const LfbWeights& w) {
  return lfb_trace(input, embedding, w).out;
}

// ---------------------------------------------------------------------------
// LFMB

struct LfmbWeights {
  LayerNormParams norm1;
  SSMParams scan;
  std::vector<double> scale1;  // s1, per channel
  LayerNormParams norm2;
  LfbWeights lfb;
  std::vector<double> scale2;  // s2, per channel

  static LfmbWeights zeros(int width, int mid, int state, int embed_dim) {
    return {LayerNormParams::identity(width), SSMParams::zeros(width, state),
            std::vector<double>(width, 1.0),  LayerNormParams::identity(width),
            LfbWeights::zeros(width, mid, embed_dim), std::vector<double>(width, 1.0)};
  }

  int width() const { return norm1.features(); }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    visit_ln(prefix + ".norm1", norm1, fn);
    visit_ssm(prefix + ".scan", scan, fn);
    fn(prefix + ".s1", scale1, std::vector<int>{width()}, true);
    visit_ln(prefix + ".norm2", norm2, fn);
    lfb.visit(prefix + ".lfb", fn);
    fn(prefix + ".s2", scale2, std::vector<int>{width()}, true);
  }
};

struct LfmbTrace {
  Tensor scanned;  // Scan(LN(X)) reshaped to [C,H,W]
  Tensor z;
  Tensor out;
};

inline LfmbTrace lfmb_trace(const Tensor& x, std::span<const double> embedding,
                            const LfmbWeights& w) {
  x.require_rank(3, "lfmb input");
  if (x.dim(0) != w.width()) throw ArgumentError("lfmb: channel count mismatch");
  const int h = x.dim(1), wd = x.dim(2);
  LfmbTrace t;
  t.scanned = from_sequence(ssm_scan(to_sequence(layernorm_channels(x, w.norm1)), w.scan), h, wd);
  t.z = add(t.scanned, multiply_channelwise(x, w.scale1));
  t.out = add(lfb_forward(layernorm_channels(t.z, w.norm2), embedding, w.lfb),
              multiply_channelwise(t.z, w.scale2));
  return t;
}

inline Tensor lfmb_forward(const Tensor& x, std::span<const double> embedding,
                           const LfmbWeights& w) {
  return lfmb_trace(x, embedding, w).out;
}

}  // namespace vabokeh::nn
