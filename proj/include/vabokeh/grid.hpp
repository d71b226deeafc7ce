#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vabokeh/errors.hpp"

namespace vabokeh {

// Row-major, channel-interleaved pixel grid. The tag parameter makes images,
// depth maps and masks distinct types even when they share a value type.
template <typename T, typename Tag>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    if (height < 1 || width < 1 || channels < 1) {
      throw ArgumentError("grid dimensions must be positive, got " + std::to_string(height) +
                          "x" + std::to_string(width) + "x" + std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  Grid(int height, int width, int channels, std::vector<T> data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (height < 1 || width < 1 || channels < 1) {
      throw ArgumentError("grid dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
      throw ArgumentError("grid data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(height) + "x" +
                          std::to_string(width) + "x" + std::to_string(channels));
    }
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  T& operator()(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  const T& operator()(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  template <typename OtherT, typename OtherTag>
  bool same_extent(const Grid<OtherT, OtherTag>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

struct RasterTag {};
struct DepthTag {};
struct MaskTag {};
struct LabelTag {};
struct RadiusTag {};

// Color or grayscale image with values in [0,1]; 1 or 3 channels.
using RasterImage = Grid<double, RasterTag>;

// Single-channel relative depth in [0,1]. Larger values are farther away.
using DepthMap = Grid<double, DepthTag>;

// Single-channel boolean mask stored as 0/1 bytes.
using BinaryMask = Grid<std::uint8_t, MaskTag>;

// Per-pixel class index.
using LabelMap = Grid<int, LabelTag>;

template <typename T, typename Tag>
void require_same_extent(const Grid<T, Tag>& a, const auto& b, const char* what) {
  if (!a.same_extent(b)) {
    throw ArgumentError(std::string(what) + ": dimension mismatch (" +
                        std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " +
                        std::to_string(b.height()) + "x" + std::to_string(b.width()) + ")");
  }
}

inline std::size_t count_set(const BinaryMask& mask) {
  std::size_t n = 0;
  for (auto v : mask.data()) n += v != 0;
  return n;
}

}  // namespace vabokeh
