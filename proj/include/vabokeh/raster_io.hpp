#pragma once

// Low-level raster codecs: PNG (8/16-bit, via libpng), binary PNM (P5/P6) and
// PFM float maps. Decoders return raw sample codes; scaling to [0,1] is done
// by the imagery layer.

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vabokeh/errors.hpp"

namespace vabokeh::codec {

// Decoded samples, row-major top-to-bottom, channel-interleaved.
struct RawRaster {
  int height = 0;
  int width = 0;
  int channels = 0;
  // Largest representable code (255 or 65535); 0 for float maps.
  int max_code = 0;
  std::vector<double> samples;
};

enum class FileKind { png, pnm, pfm, unknown };

inline std::string lowercase_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext;
}

inline FileKind kind_from_path(const std::filesystem::path& path) {
  const std::string ext = lowercase_extension(path);
  if (ext == ".png") return FileKind::png;
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return FileKind::pnm;
  if (ext == ".pfm") return FileKind::pfm;
  return FileKind::unknown;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path,
                             const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

namespace detail {

struct PngReadSource {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset;
};

[[noreturn]] inline void png_throw(png_structp, png_const_charp message) {
  throw FormatError(std::string("png: ") + message);
}

inline void png_ignore_warning(png_structp, png_const_charp) {}

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
  if (src->offset + count > src->size) png_error(png, "unexpected end of data");
  std::memcpy(out, src->data + src->offset, count);
  src->offset += count;
}

inline void png_write_to_memory(png_structp png, png_bytep data, png_size_t count) {
  auto* dst = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  dst->insert(dst->end(), data, data + count);
}

inline void png_flush_noop(png_structp) {}

class PngReader {
 public:
  PngReader() {
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_ignore_warning);
    if (!png_) throw FormatError("png: cannot create read struct");
    info_ = png_create_info_struct(png_);
    if (!info_) {
      png_destroy_read_struct(&png_, nullptr, nullptr);
      throw FormatError("png: cannot create info struct");
    }
  }
  ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

class PngWriter {
 public:
  PngWriter() {
    png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_ignore_warning);
    if (!png_) throw FormatError("png: cannot create write struct");
    info_ = png_create_info_struct(png_);
    if (!info_) {
      png_destroy_write_struct(&png_, nullptr);
      throw FormatError("png: cannot create info struct");
    }
  }
  ~PngWriter() { png_destroy_write_struct(&png_, &info_); }
  PngWriter(const PngWriter&) = delete;
  PngWriter& operator=(const PngWriter&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

// Reads the next whitespace-delimited header token, skipping '#' comments.
inline std::string next_header_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    token.push_back(static_cast<char>(bytes[pos++]));
  }
  if (token.empty()) throw FormatError("truncated header");
  return token;
}

inline int parse_positive(const std::string& token, const char* what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(token, &used);
    if (used != token.size() || v < 1 || v > (1L << 30)) throw FormatError("");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw FormatError(std::string("invalid ") + what + " '" + token + "'");
  }
}

}  // namespace detail

inline RawRaster decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw FormatError("png: bad signature");
  }
  detail::PngReader reader;
  png_structp png = reader.png();
  png_infop info = reader.info();
  detail::PngReadSource source{bytes.data(), bytes.size(), 0};
  png_set_read_fn(png, &source, detail::png_read_from_memory);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  } else if (bit_depth != 8 && bit_depth != 16) {
    throw FormatError("png: unsupported bit depth " + std::to_string(bit_depth));
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  RawRaster raw;
  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  if (raw.channels != 1 && raw.channels != 3) {
    throw FormatError("png: unsupported channel layout");
  }
  raw.max_code = out_depth == 16 ? 65535 : 255;

  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<png_byte> pixels(row_bytes * raw.height);
  std::vector<png_bytep> rows(raw.height);
  for (int y = 0; y < raw.height; ++y) rows[y] = pixels.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  const std::size_t n = static_cast<std::size_t>(raw.height) * raw.width * raw.channels;
  raw.samples.resize(n);
  if (out_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      raw.samples[i] = static_cast<double>((pixels[2 * i] << 8) | pixels[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) raw.samples[i] = pixels[i];
  }
  return raw;
}

// codes must already be integral values in [0, 2^bit_depth - 1].
inline std::vector<std::uint8_t> encode_png(int height, int width, int channels, int bit_depth,
                                            const std::vector<std::uint16_t>& codes) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw ArgumentError("png: bit depth must be 8 or 16");
  }
  if (channels != 1 && channels != 3) throw ArgumentError("png: channels must be 1 or 3");
  std::vector<std::uint8_t> out;
  detail::PngWriter writer;
  png_structp png = writer.png();
  png_infop info = writer.info();
  png_set_write_fn(png, &out, detail::png_write_to_memory, detail::png_flush_noop);
  png_set_IHDR(png, info, width, height, bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t samples_per_row = static_cast<std::size_t>(width) * channels;
  const std::size_t bytes_per_sample = bit_depth / 8;
  std::vector<png_byte> row(samples_per_row * bytes_per_sample);
  for (int y = 0; y < height; ++y) {
    const std::uint16_t* src = codes.data() + samples_per_row * y;
    if (bit_depth == 16) {
      for (std::size_t i = 0; i < samples_per_row; ++i) {
        row[2 * i] = static_cast<png_byte>(src[i] >> 8);
        row[2 * i + 1] = static_cast<png_byte>(src[i] & 0xff);
      }
    } else {
      for (std::size_t i = 0; i < samples_per_row; ++i) row[i] = static_cast<png_byte>(src[i]);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  return out;
}

inline RawRaster decode_pnm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  const std::string magic = detail::next_header_token(bytes, pos);
  if (magic != "P5" && magic != "P6") throw FormatError("pnm: only binary P5/P6 supported");
  RawRaster raw;
  raw.channels = magic == "P5" ? 1 : 3;
  raw.width = detail::parse_positive(detail::next_header_token(bytes, pos), "width");
  raw.height = detail::parse_positive(detail::next_header_token(bytes, pos), "height");
  raw.max_code = detail::parse_positive(detail::next_header_token(bytes, pos), "maxval");
  if (raw.max_code != 255 && raw.max_code != 65535) {
    throw FormatError("pnm: unsupported bit depth (maxval " + std::to_string(raw.max_code) + ")");
  }
  ++pos;  // single whitespace byte after maxval
  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height * raw.channels;
  const std::size_t bps = raw.max_code == 65535 ? 2 : 1;
  if (pos + n * bps > bytes.size()) throw FormatError("pnm: truncated pixel data");
  raw.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw.samples[i] = bps == 2 ? static_cast<double>((bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1])
                              : static_cast<double>(bytes[pos + i]);
  }
  return raw;
}

inline std::vector<std::uint8_t> encode_pnm(int height, int width, int channels, int bit_depth,
                                            const std::vector<std::uint16_t>& codes) {
  if (channels != 1 && channels != 3) throw ArgumentError("pnm: channels must be 1 or 3");
  const int max_code = bit_depth == 16 ? 65535 : 255;
  const std::string header = std::string(channels == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(width) + " " + std::to_string(height) + "\n" +
                             std::to_string(max_code) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + codes.size() * (bit_depth / 8));
  for (std::uint16_t code : codes) {
    if (bit_depth == 16) out.push_back(static_cast<std::uint8_t>(code >> 8));
    out.push_back(static_cast<std::uint8_t>(code & 0xff));
  }
  return out;
}

// Portable float map: "Pf" (1 channel) or "PF" (3 channels), rows stored
// bottom-to-top, byte order given by the sign of the scale field.
inline RawRaster decode_pfm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  const std::string magic = detail::next_header_token(bytes, pos);
  if (magic != "Pf" && magic != "PF") throw FormatError("pfm: bad magic '" + magic + "'");
  RawRaster raw;
  raw.channels = magic == "Pf" ? 1 : 3;
  raw.width = detail::parse_positive(detail::next_header_token(bytes, pos), "width");
  raw.height = detail::parse_positive(detail::next_header_token(bytes, pos), "height");
  const std::string scale_token = detail::next_header_token(bytes, pos);
  double scale = 0.0;
  try {
    scale = std::stod(scale_token);
  } catch (const std::exception&) {
    throw FormatError("pfm: invalid scale '" + scale_token + "'");
  }
  if (scale == 0.0) throw FormatError("pfm: zero scale");
  ++pos;
  const bool little = scale < 0.0;
  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height * raw.channels;
  if (pos + n * 4 > bytes.size()) throw FormatError("pfm: truncated pixel data");
  raw.samples.resize(n);
  const std::size_t row_len = static_cast<std::size_t>(raw.width) * raw.channels;
  for (int y = 0; y < raw.height; ++y) {
    const int file_row = raw.height - 1 - y;
    for (std::size_t i = 0; i < row_len; ++i) {
      const std::uint8_t* p = bytes.data() + pos + (file_row * row_len + i) * 4;
      std::uint32_t bits = little ? (std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                                     std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24)
                                  : (std::uint32_t(p[3]) | std::uint32_t(p[2]) << 8 |
                                     std::uint32_t(p[1]) << 16 | std::uint32_t(p[0]) << 24);
      const float v = std::bit_cast<float>(bits);
      if (!std::isfinite(v)) throw FormatError("pfm: non-finite sample");
      raw.samples[y * row_len + i] = v;
    }
  }
  return raw;
}

inline std::vector<std::uint8_t> encode_pfm(int height, int width, int channels,
                                            const std::vector<double>& values) {
  if (channels != 1 && channels != 3) throw ArgumentError("pfm: channels must be 1 or 3");
  const std::string header = std::string(channels == 1 ? "Pf" : "PF") + "\n" +
                             std::to_string(width) + " " + std::to_string(height) + "\n-1.0\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t row_len = static_cast<std::size_t>(width) * channels;
  for (int file_row = 0; file_row < height; ++file_row) {
    const int y = height - 1 - file_row;
    for (std::size_t i = 0; i < row_len; ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[y * row_len + i]));
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  }
  return out;
}

inline RawRaster decode_bytes(const std::vector<std::uint8_t>& bytes, FileKind kind) {
  switch (kind) {
    case FileKind::png: return decode_png(bytes);
    case FileKind::pnm: return decode_pnm(bytes);
    case FileKind::pfm: return decode_pfm(bytes);
    case FileKind::unknown: break;
  }
  throw FormatError("unsupported raster format");
}

inline RawRaster decode_file(const std::filesystem::path& path) {
  const FileKind kind = kind_from_path(path);
  if (kind == FileKind::unknown) {
    throw FormatError("unsupported raster extension '" + path.extension().string() + "'");
  }
  return decode_bytes(read_file_bytes(path), kind);
}

}  // namespace vabokeh::codec
