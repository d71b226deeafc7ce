#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "reference_ops.hpp"
#include "test_util.hpp"
#include "vabokeh/nn/vabm.hpp"

using namespace vabokeh;
using namespace vabokeh::nn;

namespace {

std::mt19937_64& rng() {
  static std::mt19937_64 r(2024);
  return r;
}

void fill(std::vector<double>& v, double lo, double hi) {
  for (double& x : v) x = testutil::uniform(rng(), lo, hi);
}

Tensor random_tensor(std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  fill(t.values(), lo, hi);
  return t;
}

ref::Map to_map(const Tensor& t) { return {t.dim(0), t.dim(1), t.dim(2), t.values()}; }

ConvSpec random_conv(int in, int out, int k, int stride = 1) {
  ConvSpec s = ConvSpec::zeros(in, out, k, stride);
  fill(s.weight, -0.5, 0.5);
  fill(s.bias, -0.2, 0.2);
  return s;
}

BatchNormParams random_bn(int c) {
  BatchNormParams p = BatchNormParams::identity(c);
  fill(p.gamma, 0.5, 1.5);
  fill(p.beta, -0.3, 0.3);
  fill(p.running_mean, -0.2, 0.2);
  fill(p.running_var, 0.3, 2.0);
  return p;
}

LayerNormParams random_ln(int c) {
  LayerNormParams p = LayerNormParams::identity(c);
  fill(p.gamma, 0.5, 1.5);
  fill(p.beta, -0.3, 0.3);
  return p;
}

SSMParams random_ssm(int c, int n) {
  SSMParams p = SSMParams::zeros(c, n);
  fill(p.decay, -1.5, -0.01);
  fill(p.input, -1.0, 1.0);
  fill(p.output, -1.0, 1.0);
  fill(p.step, 0.05, 0.8);
  return p;
}

MifbWeights random_mifb(int img_c, int width) {
  const int mid = std::max(1, width / 2);
  return {random_conv(img_c, width, 3), random_conv(1, width, 3), random_conv(1, width, 3),
          random_conv(width, mid, 1),   random_bn(mid),           random_conv(mid, width, 1),
          random_bn(width),             random_conv(width, mid, 3), random_bn(mid),
          random_conv(mid, width, 1),   random_bn(width)};
}

LfbWeights random_lfb(int width, int embed) {
  LfbWeights w = LfbWeights::zeros(width, std::max(1, width / 2), embed);
  w.conv1 = random_conv(width, width, 3);
  w.conv2 = random_conv(width, width, 1);
  w.attn_reduce = random_conv(width, std::max(1, width / 2), 1);
  w.attn_expand = random_conv(std::max(1, width / 2), width, 1);
  fill(w.lens_weight, -0.5, 0.5);
  fill(w.lens_bias, -0.5, 0.5);
  return w;
}

LfmbWeights random_lfmb(int width, int state, int embed) {
  LfmbWeights w = LfmbWeights::zeros(width, std::max(1, width / 2), state, embed);
  w.norm1 = random_ln(width);
  w.scan = random_ssm(width, state);
  fill(w.scale1, 0.5, 1.5);
  w.norm2 = random_ln(width);
  w.lfb = random_lfb(width, embed);
  fill(w.scale2, 0.5, 1.5);
  return w;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  EXPECT_EQ(a.size(), b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

// ---------------------------------------------------------------------------
// Kernels

TEST(Conv, CenteredDeltaIsIdentity) {
  const Tensor x = random_tensor({2, 6, 5});
  ConvSpec s = ConvSpec::zeros(2, 2, 3);
  s.w(0, 0, 1, 1) = 1.0;
  s.w(1, 1, 1, 1) = 1.0;
  EXPECT_EQ(conv2d(x, s).values(), x.values());
}

TEST(Conv, OnesKernelCountsNeighbours) {
  ConvSpec s = ConvSpec::zeros(1, 1, 3);
  std::fill(s.weight.begin(), s.weight.end(), 1.0);
  const Tensor y = conv2d(Tensor({1, 5, 5}, 1.0), s);
  EXPECT_EQ(y.at(0, 2, 2), 9.0);
  EXPECT_EQ(y.at(0, 0, 0), 4.0);
  EXPECT_EQ(y.at(0, 0, 2), 6.0);
}

TEST(Conv, MatchesNestedLoopOracle) {
  for (int stride : {1, 2}) {
    const Tensor x = random_tensor({2, 5, 5});
    const ConvSpec s = random_conv(2, 3, 3, stride);
    const Tensor y = conv2d(x, s);
    const ref::Map r = ref::conv(to_map(x), s);
    ASSERT_EQ(y.dim(1), r.h);
    ASSERT_EQ(y.dim(2), r.w);
    EXPECT_LE(max_abs_diff(y.values(), r.v), 1e-9);
  }
}

TEST(Conv, ShapeMismatchIsArgumentError) {
  EXPECT_THROW(conv2d(Tensor({3, 4, 4}), ConvSpec::zeros(2, 1, 3)), ArgumentError);
  ConvSpec bad = ConvSpec::zeros(1, 1, 3);
  bad.weight.pop_back();
  EXPECT_THROW(conv2d(Tensor({1, 4, 4}), bad), ArgumentError);
}

TEST(Pointwise, SigmoidAndRelu) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(relu(-2.0), 0.0);
  EXPECT_EQ(relu(3.0), 3.0);
  for (double v : {-30.0, -2.0, 0.3, 7.0, 30.0}) {
    EXPECT_GT(sigmoid(v), 0.0);
    EXPECT_LT(sigmoid(v), 1.0);
  }
}

TEST(Pointwise, GeluAndBatchnormMatchFormulas) {
  const Tensor x = random_tensor({4, 3, 3}, -4.0, 4.0);
  const Tensor g = gelu(x);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(g[i], ref::gelu(x[i]), 1e-7);
  const BatchNormParams bn = random_bn(4);
  const Tensor b = batchnorm_eval(x, bn);
  for (int c = 0; c < 4; ++c) {
    for (int y = 0; y < 3; ++y) {
      for (int xx = 0; xx < 3; ++xx) EXPECT_NEAR(b.at(c, y, xx), ref::bn(x.at(c, y, xx), bn, c), 1e-7);
    }
  }
}

TEST(Pointwise, LayernormOfConstantIsShift) {
  LayerNormParams ln = LayerNormParams::identity(5);
  ln.beta = {0.1, 0.2, 0.3, 0.4, 0.5};
  const std::vector<double> v(5, 3.25);
  const auto out = layernorm(v, ln);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(out[i], ln.beta[i]);
}

TEST(Pointwise, LayernormChannelsMatchesOracle) {
  const Tensor x = random_tensor({6, 3, 4});
  const LayerNormParams ln = random_ln(6);
  EXPECT_LE(max_abs_diff(layernorm_channels(x, ln).values(), ref::layernorm(to_map(x), ln).v), 1e-12);
}

TEST(Gap, ConstantHalfAndRandom) {
  EXPECT_EQ(gap_channel(Tensor({3, 4, 4}, 0.75)).values(), std::vector<double>(3, 0.75));
  Tensor half({1, 2, 2});
  half.values() = {0, 1, 1, 0};
  EXPECT_EQ(gap_channel(half)[0], 0.5);
  const Tensor x = random_tensor({5, 7, 3});
  EXPECT_LE(max_abs_diff(gap_channel(x).values(), ref::gap(to_map(x)).v), 1e-9);
}

TEST(Embedding, ZeroLimitIsSinZeroCosOne) {
  const auto e = detail::sinusoidal_embed_unchecked(0.0, 8);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(e[2 * k], 0.0);
    EXPECT_EQ(e[2 * k + 1], 1.0);
  }
}

TEST(Embedding, MatchesDirectFormula) {
  const auto e = sinusoidal_embed(1.8, 4);
  EXPECT_NEAR(e[0], std::sin(1.8), 1e-15);
  EXPECT_NEAR(e[1], std::cos(1.8), 1e-15);
  EXPECT_NEAR(e[2], std::sin(1.8 / 100.0), 1e-15);
  EXPECT_NEAR(e[3], std::cos(1.8 / 100.0), 1e-15);
  const auto full = sinusoidal_embed(2.8, 32);
  const auto expect = ref::sinusoid(2.8, 32);
  EXPECT_LE(max_abs_diff(full, expect), 1e-12);
  for (double v : full) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Embedding, DistinctApertures) {
  const auto a = sinusoidal_embed(1.8), b = sinusoidal_embed(8.0);
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_GT(std::sqrt(d), 0.0);
}

TEST(Embedding, OddDimensionRejected) {
  EXPECT_THROW(sinusoidal_embed(1.8, 5), ArgumentError);
  EXPECT_THROW(sinusoidal_embed(0.0, 4), ArgumentError);
}

// ---------------------------------------------------------------------------
// SSM

TEST(Ssm, SingleStep) {
  const SSMParams p = random_ssm(3, 4);
  const Tensor x = random_tensor({1, 3});
  const Tensor y = ssm_scan(x, p);
  for (int c = 0; c < 3; ++c) {
    double expect = 0.0;
    for (int s = 0; s < 4; ++s) expect += p.output[c * 4 + s] * p.step[c] * p.input[c * 4 + s] * x.at(0, c);
    EXPECT_NEAR(y.at(0, c), expect, 1e-15);
  }
}

TEST(Ssm, ZeroDecayIsRunningSum) {
  SSMParams p = random_ssm(2, 3);
  std::fill(p.decay.begin(), p.decay.end(), 0.0);
  const Tensor x = random_tensor({20, 2});
  const Tensor y = ssm_scan(x, p);
  for (int c = 0; c < 2; ++c) {
    double cum = 0.0;
    for (int t = 0; t < 20; ++t) {
      cum += x.at(t, c);
      double expect = 0.0;
      for (int s = 0; s < 3; ++s) expect += p.output[c * 3 + s] * p.step[c] * p.input[c * 3 + s] * cum;
      EXPECT_NEAR(y.at(t, c), expect, 1e-12);
    }
  }
}

TEST(Ssm, MatchesRecurrenceAndKernelForm) {
  for (int trial = 0; trial < 10; ++trial) {
    const SSMParams p = random_ssm(4, 5);
    const Tensor x = random_tensor({64, 4});
    const Tensor y = ssm_scan(x, p);
    EXPECT_LE(max_abs_diff(y.values(), ref::ssm_naive(x.values(), 64, 4, p)), 1e-6);
    EXPECT_LE(max_abs_diff(y.values(), ref::ssm_kernel_form(x.values(), 64, 4, p)), 1e-6);
  }
}

TEST(Ssm, ParameterValidation) {
  SSMParams p = random_ssm(2, 2);
  p.step[0] = 0.0;
  EXPECT_THROW(ssm_scan(Tensor({3, 2}), p), ArgumentError);
  p = random_ssm(2, 2);
  p.decay[1] = 0.1;
  EXPECT_THROW(ssm_scan(Tensor({3, 2}), p), ArgumentError);
  EXPECT_THROW(ssm_scan(Tensor({3, 3}), random_ssm(2, 2)), ArgumentError);
}

// ---------------------------------------------------------------------------
// Blocks

TEST(Mifb, MatchesScalarTransliteration) {
  for (int trial = 0; trial < 5; ++trial) {
    const MifbWeights w = random_mifb(1, 4);
    const Tensor img = random_tensor({1, 4, 4}, 0, 1), dep = random_tensor({1, 4, 4}, 0, 1),
                 foc = random_tensor({1, 4, 4}, 0, 1);
    const Tensor out = mifb_forward(img, dep, foc, w);
    const ref::Map r = ref::mifb(to_map(img), to_map(dep), to_map(foc), w);
    EXPECT_LE(max_abs_diff(out.values(), r.v), 1e-7);
  }
}

TEST(Mifb, ZeroedAttentionGivesHalfGates) {
  MifbWeights w = random_mifb(3, 6);
  for (ConvSpec* c : {&w.global_reduce, &w.global_expand, &w.local_reduce, &w.local_expand}) {
    std::fill(c->weight.begin(), c->weight.end(), 0.0);
    std::fill(c->bias.begin(), c->bias.end(), 0.0);
  }
  w.global_bn2 = BatchNormParams::identity(6);
  w.local_bn2 = BatchNormParams::identity(6);
  const Tensor img = random_tensor({3, 5, 7}), dep = random_tensor({1, 5, 7}),
               foc = random_tensor({1, 5, 7});
  const MifbTrace t = mifb_trace(img, dep, foc, w);
  for (double g : t.gate_global.data()) EXPECT_EQ(g, 0.5);
  for (double g : t.gate_local.data()) EXPECT_EQ(g, 0.5);
  ASSERT_EQ(t.out.shape(), t.x.shape());
  for (std::size_t i = 0; i < t.out.numel(); ++i) {
    EXPECT_EQ(t.out[i], 0.5 * t.x_global[i] + 0.5 * t.x_local[i] + t.x[i]);
  }
}

TEST(Mifb, GatesStrictlyInsideUnitInterval) {
  const MifbWeights w = random_mifb(3, 8);
  const MifbTrace t = mifb_trace(random_tensor({3, 6, 6}, 0, 1), random_tensor({1, 6, 6}, 0, 1),
                                 random_tensor({1, 6, 6}, 0, 1), w);
  for (const Tensor* g : {&t.gate_global, &t.gate_local}) {
    for (double v : g->data()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(Mifb, MisalignedInputsRejected) {
  const MifbWeights w = random_mifb(1, 2);
  EXPECT_THROW(mifb_forward(Tensor({1, 4, 4}), Tensor({1, 4, 5}), Tensor({1, 4, 4}), w), ArgumentError);
}

TEST(Lfb, MatchesScalarTransliteration) {
  for (int trial = 0; trial < 5; ++trial) {
    const LfbWeights w = random_lfb(4, 8);
    const Tensor x = random_tensor({4, 5, 3});
    const auto e = sinusoidal_embed(2.8, 8);
    EXPECT_LE(max_abs_diff(lfb_forward(x, e, w).values(), ref::lfb(to_map(x), e, w).v), 1e-7);
  }
}

TEST(Lfb, ZeroLensGivesZeroOutput) {
  LfbWeights w = random_lfb(4, 8);
  std::fill(w.lens_weight.begin(), w.lens_weight.end(), 0.0);
  std::fill(w.lens_bias.begin(), w.lens_bias.end(), 0.0);
  const Tensor y = lfb_forward(random_tensor({4, 3, 3}), sinusoidal_embed(1.8, 8), w);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Lfb, GateInsideUnitInterval) {
  const LfbTrace t = lfb_trace(random_tensor({6, 4, 4}, -3, 3), sinusoidal_embed(16.0, 8), random_lfb(6, 8));
  for (double v : t.gate.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Lfb, WrongEmbeddingLength) {
  EXPECT_THROW(lfb_forward(Tensor({4, 2, 2}), sinusoidal_embed(1.8, 6), random_lfb(4, 8)), ArgumentError);
}

TEST(Lfmb, MatchesScalarTransliteration) {
  for (int trial = 0; trial < 5; ++trial) {
    const LfmbWeights w = random_lfmb(4, 3, 8);
    const Tensor x = random_tensor({4, 4, 5});
    const auto e = sinusoidal_embed(1.8, 8);
    EXPECT_LE(max_abs_diff(lfmb_forward(x, e, w).values(), ref::lfmb(to_map(x), e, w).v), 1e-6);
  }
}

TEST(Lfmb, ZeroedScanWithUnitS1IsResidualIdentity) {
  LfmbWeights w = random_lfmb(4, 3, 8);
  std::fill(w.scan.output.begin(), w.scan.output.end(), 0.0);
  std::fill(w.scale1.begin(), w.scale1.end(), 1.0);
  const Tensor x = random_tensor({4, 3, 3});
  const LfmbTrace t = lfmb_trace(x, sinusoidal_embed(1.8, 8), w);
  EXPECT_EQ(t.z.values(), x.values());
}

TEST(Lfmb, ZeroS2LeavesLfbAlone) {
  LfmbWeights w = random_lfmb(4, 3, 8);
  std::fill(w.scale2.begin(), w.scale2.end(), 0.0);
  const Tensor x = random_tensor({4, 3, 3});
  const auto e = sinusoidal_embed(8.0, 8);
  const LfmbTrace t = lfmb_trace(x, e, w);
  const Tensor expect = lfb_forward(layernorm_channels(t.z, w.norm2), e, w.lfb);
  EXPECT_EQ(t.out.values(), expect.values());
}

// ---------------------------------------------------------------------------
// Toy network

TEST(Vabm, ShapeAndFiniteness) {
  VabmConfig cfg;
  cfg.base_width = 4;
  cfg.seed = 5;
  const Tensor img = random_tensor({3, 64, 64}, 0, 1), dep = random_tensor({1, 64, 64}, 0, 1),
               foc = random_tensor({1, 64, 64}, 0, 1);
  const Tensor out = vabm_forward(img, dep, foc, 1.8, cfg);
  EXPECT_EQ(out.shape(), img.shape());
  for (double v : out.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Vabm, OddSpatialSizesKeepShape) {
  VabmConfig cfg;
  cfg.base_width = 2;
  cfg.stages = 3;
  const Tensor img = random_tensor({3, 13, 9}, 0, 1);
  const Tensor out = vabm_forward(img, random_tensor({1, 13, 9}, 0, 1), random_tensor({1, 13, 9}, 0, 1), 8.0, cfg);
  EXPECT_EQ(out.shape(), img.shape());
}

TEST(Vabm, SameSeedIsBitwiseDeterministic) {
  VabmConfig cfg;
  cfg.base_width = 4;
  cfg.seed = 99;
  const Tensor img = random_tensor({3, 16, 16}, 0, 1), dep = random_tensor({1, 16, 16}, 0, 1),
               foc = random_tensor({1, 16, 16}, 0, 1);
  EXPECT_EQ(vabm_forward(img, dep, foc, 2.8, cfg).values(), vabm_forward(img, dep, foc, 2.8, cfg).values());
  cfg.seed = 100;
  EXPECT_NE(vabm_forward(img, dep, foc, 2.8, cfg).values(),
            VabmModel(VabmConfig{3, 4, 3, 32, 8, 2, 99}).forward(img, dep, foc, 2.8).values());
}

TEST(Params, SingleConvArithmetic) { EXPECT_EQ(ConvSpec::zeros(3, 16, 3).parameter_count(), 448u); }

TEST(Params, DefaultConfigMatchesClosedForm) {
  const VabmConfig cfg;
  EXPECT_EQ(count_params(cfg), ref::vabm_params(3, 16, 3, 32, 8, 2));
}

TEST(Params, VariousConfigsMatchClosedForm) {
  for (int base : {2, 4, 8, 32}) {
    for (int stages : {1, 2, 4}) {
      VabmConfig cfg;
      cfg.base_width = base;
      cfg.stages = stages;
      cfg.state_dim = 4;
      EXPECT_EQ(count_params(cfg), ref::vabm_params(3, base, stages, 32, 4, 2));
    }
  }
}

TEST(Params, DoublingWidthFollowsFormula) {
  VabmConfig a, b;
  b.base_width = 2 * a.base_width;
  const double ratio = static_cast<double>(count_params(b)) / static_cast<double>(count_params(a));
  const double expect = static_cast<double>(ref::vabm_params(3, 32, 3, 32, 8, 2)) /
                        static_cast<double>(ref::vabm_params(3, 16, 3, 32, 8, 2));
  EXPECT_DOUBLE_EQ(ratio, expect);
  // Dominated by k*k*C^2 terms, so the count approaches a 4x growth.
  EXPECT_GT(ratio, 3.0);
  EXPECT_LT(ratio, 4.0);
}

TEST(Weights, BundleRoundTrip) {
  testutil::TempDir dir;
  VabmConfig cfg;
  cfg.base_width = 4;
  cfg.seed = 7;
  VabmWeights w = VabmWeights::random(cfg);
  save_weights(w, dir / "toy");
  VabmWeights back = load_weights(dir / "toy");
  EXPECT_EQ(back.config.seed, 7u);
  std::vector<double> a, b;
  w.visit([&](const std::string&, std::vector<double>& v, const std::vector<int>&, bool) {
    a.insert(a.end(), v.begin(), v.end());
  });
  back.visit([&](const std::string&, std::vector<double>& v, const std::vector<int>&, bool) {
    b.insert(b.end(), v.begin(), v.end());
  });
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::filesystem::file_size(dir / "toy.bin"), a.size() * 8);
}
