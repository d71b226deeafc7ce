#pragma once

// Diagonal state-space scan over a [L, C] sequence. Each channel c carries a
// state vector h of size N:
//
//   h_t = exp(delta_c * A_c) (.) h_{t-1} + (delta_c * B_c) x_{t,c},   h_0 = 0
//   y_{t,c} = <C_c, h_t>
//
// Cost is O(L * C * N).

#include <cmath>
#include <vector>

#include "vabokeh/errors.hpp"
#include "vabokeh/nn/tensor.hpp"

namespace vabokeh::nn {

struct SSMParams {
  int channels = 0;
  int state = 0;
  std::vector<double> decay;   // A, [C][N], <= 0
  std::vector<double> input;   // B, [C][N]
  std::vector<double> output;  // C, [C][N]
  std::vector<double> step;    // delta, [C], > 0

  static SSMParams zeros(int channels, int state) {
    const std::size_t n = static_cast<std::size_t>(channels) * state;
    return {channels, state, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
            std::vector<double>(n, 0.0), std::vector<double>(channels, 1.0)};
  }

  std::size_t parameter_count() const {
    return decay.size() + input.size() + output.size() + step.size();
  }

  void validate() const {
    const std::size_t n = static_cast<std::size_t>(channels) * state;
    if (channels < 1 || state < 1) throw ArgumentError("ssm: channels and state must be >= 1");
    if (decay.size() != n || input.size() != n || output.size() != n ||
        step.size() != static_cast<std::size_t>(channels)) {
      throw ArgumentError("ssm: parameter sizes inconsistent with channels/state");
    }
    for (double d : step) {
      if (!(d > 0.0)) throw ArgumentError("ssm: step sizes must be positive");
    }
    for (double a : decay) {
      if (!(a <= 0.0)) throw ArgumentError("ssm: decay entries must be <= 0");
    }
  }
};

inline Tensor ssm_scan(const Tensor& x, const SSMParams& p) {
  p.validate();
  x.require_rank(2, "ssm_scan");
  if (x.dim(1) != p.channels) throw ArgumentError("ssm_scan: channel count mismatch");
  const int len = x.dim(0);
  const int c_count = p.channels;
  const int n = p.state;

  // Discretized per-(channel, state) coefficients.
  std::vector<double> a_bar(static_cast<std::size_t>(c_count) * n);
  std::vector<double> b_bar(a_bar.size());
  for (int c = 0; c < c_count; ++c) {
    for (int s = 0; s < n; ++s) {
      const std::size_t k = static_cast<std::size_t>(c) * n + s;
      a_bar[k] = std::exp(p.step[c] * p.decay[k]);
      b_bar[k] = p.step[c] * p.input[k];
    }
  }

  Tensor y({len, c_count});
  std::vector<double> h(a_bar.size(), 0.0);
  for (int t = 0; t < len; ++t) {
    for (int c = 0; c < c_count; ++c) {
      const double xt = x.at(t, c);
      const std::size_t base = static_cast<std::size_t>(c) * n;
      double acc = 0.0;
      for (int s = 0; s < n; ++s) {
        double& hs = h[base + s];
        hs = a_bar[base + s] * hs + b_bar[base + s] * xt;
        acc += p.output[base + s] * hs;
      }
      y.at(t, c) = acc;
    }
  }
  return y;
}

}  // namespace vabokeh::nn
