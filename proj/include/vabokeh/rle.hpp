#pragma once

// Run-length transport for boolean masks. Runs alternate false/true over the
// row-major pixel order, starting with a (possibly zero-length) false run.

#include <cstdint>
#include <string>
#include <vector>

#include "vabokeh/errors.hpp"
#include "vabokeh/grid.hpp"

namespace vabokeh {

struct MaskRle {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> runs;

  friend bool operator==(const MaskRle&, const MaskRle&) = default;
};

inline MaskRle encode_rle(const BinaryMask& mask) {
  MaskRle rle{mask.width(), mask.height(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (std::uint8_t v : mask.data()) {
    const std::uint8_t bit = v ? 1 : 0;
    if (bit != current) {
      rle.runs.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  rle.runs.push_back(run);
  return rle;
}

inline BinaryMask decode_rle(const MaskRle& rle) {
  if (rle.width < 1 || rle.height < 1) throw ArgumentError("rle: dimensions must be positive");
  BinaryMask mask(rle.height, rle.width);
  const std::size_t total = mask.size();
  std::size_t pos = 0;
  std::uint8_t bit = 0;
  for (std::uint32_t run : rle.runs) {
    if (pos + run > total) throw ArgumentError("rle: runs exceed width*height");
    std::fill_n(mask.values().begin() + static_cast<std::ptrdiff_t>(pos), run, bit);
    pos += run;
    bit ^= 1;
  }
  if (pos != total) {
    throw ArgumentError("rle: runs cover " + std::to_string(pos) + " pixels, expected " +
                        std::to_string(total));
  }
  return mask;
}

}  // namespace vabokeh
