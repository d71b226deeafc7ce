#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vabokeh/errors.hpp"

namespace vabokeh::nn {

// Dense row-major float64 array.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape, double fill = 0.0) : shape_(std::move(shape)) {
    data_.assign(checked_numel(shape_), fill);
  }

  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != checked_numel(shape_)) {
      throw ArgumentError("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_string());
    }
  }

  const std::vector<int>& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(i); }
  std::size_t numel() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // [C,H,W] access.
  double& at(int c, int y, int x) noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  double at(int c, int y, int x) const noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  // [L,C] access.
  double& at(int l, int c) noexcept { return data_[static_cast<std::size_t>(l) * shape_[1] + c]; }
  double at(int l, int c) const noexcept {
    return data_[static_cast<std::size_t>(l) * shape_[1] + c];
  }

  std::string shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

  void require_rank(int r, const char* what) const {
    if (rank() != r) {
      throw ArgumentError(std::string(what) + ": expected rank " + std::to_string(r) +
                          " tensor, got " + shape_string());
    }
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  static std::size_t checked_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      if (d < 1) throw ArgumentError("tensor dimensions must be positive");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ArgumentError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                        b.shape_string());
  }
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
  return out;
}

inline Tensor multiply(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "multiply");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b[i];
  return out;
}

// [C,H,W] * [C,1,1] with per-channel broadcast.
inline Tensor multiply_channelwise(const Tensor& x, std::span<const double> per_channel) {
  x.require_rank(3, "multiply_channelwise");
  if (static_cast<int>(per_channel.size()) != x.dim(0)) {
    throw ArgumentError("multiply_channelwise: channel count mismatch");
  }
  Tensor out = x;
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  for (int c = 0; c < x.dim(0); ++c) {
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] *= per_channel[c];
  }
  return out;
}

inline Tensor add_channelwise(const Tensor& x, std::span<const double> per_channel) {
  x.require_rank(3, "add_channelwise");
  if (static_cast<int>(per_channel.size()) != x.dim(0)) {
    throw ArgumentError("add_channelwise: channel count mismatch");
  }
  Tensor out = x;
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  for (int c = 0; c < x.dim(0); ++c) {
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] += per_channel[c];
  }
  return out;
}

}  // namespace vabokeh::nn
