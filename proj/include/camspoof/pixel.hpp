#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "camspoof/byte_io.hpp"
#include "camspoof/error.hpp"

namespace camspoof {

enum class PixelFormat : std::uint32_t { BayerRG8 = 1 };

// Raw single-channel Bayer mosaic, one byte per pixel, row-major.
// RGGB phase: R at (even row, even column), B at (odd row, odd column).
class PixelBuffer {
 public:
  PixelBuffer(std::uint32_t width, std::uint32_t height, Bytes bytes,
              PixelFormat format = PixelFormat::BayerRG8)
      : width_(width), height_(height), format_(format), bytes_(std::move(bytes)) {
    if (width == 0 || height == 0 || width % 2 != 0 || height % 2 != 0) {
      throw DimensionError("pixel buffer dimensions must be positive and even, got " +
                           std::to_string(width) + "x" + std::to_string(height));
    }
    if (bytes_.size() != static_cast<std::size_t>(width) * height) {
      throw DimensionError("pixel buffer holds " + std::to_string(bytes_.size()) +
                           " bytes, expected " + std::to_string(std::size_t{width} * height));
    }
  }

  PixelBuffer(std::uint32_t width, std::uint32_t height, std::uint8_t fill)
      : PixelBuffer(width, height, Bytes(std::size_t{width} * height, fill)) {}

  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t height() const noexcept { return height_; }
  PixelFormat format() const noexcept { return format_; }
  std::size_t size() const noexcept { return bytes_.size(); }
  const Bytes& bytes() const noexcept { return bytes_; }
  Bytes& bytes() noexcept { return bytes_; }

  std::uint8_t at(std::uint32_t row, std::uint32_t col) const { return bytes_[std::size_t{row} * width_ + col]; }
  std::uint8_t& at(std::uint32_t row, std::uint32_t col) { return bytes_[std::size_t{row} * width_ + col]; }

  std::span<const std::uint8_t> row(std::uint32_t r) const {
    return std::span<const std::uint8_t>(bytes_).subspan(std::size_t{r} * width_, width_);
  }

  // Keeps the leftmost `width` columns (camera region-of-interest).
  PixelBuffer crop_columns(std::uint32_t width) const {
    if (width > width_) throw DimensionError("crop wider than source");
    Bytes out;
    out.reserve(std::size_t{width} * height_);
    for (std::uint32_t r = 0; r < height_; ++r) {
      auto src = row(r);
      out.insert(out.end(), src.begin(), src.begin() + width);
    }
    return PixelBuffer(width, height_, std::move(out), format_);
  }

  // Rows [first, first + count).
  PixelBuffer rows(std::uint32_t first, std::uint32_t count) const {
    if (first + count > height_) throw DimensionError("row range exceeds buffer height");
    auto b = bytes_.begin() + static_cast<std::ptrdiff_t>(std::size_t{first} * width_);
    return PixelBuffer(width_, count, Bytes(b, b + static_cast<std::ptrdiff_t>(std::size_t{count} * width_)),
                       format_);
  }

  friend bool operator==(const PixelBuffer&, const PixelBuffer&) = default;

 private:
  std::uint32_t width_;
  std::uint32_t height_;
  PixelFormat format_;
  Bytes bytes_;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

class RgbImage {
 public:
  RgbImage(std::uint32_t width, std::uint32_t height, std::vector<Rgb> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != std::size_t{width} * height) throw DimensionError("rgb image pixel count mismatch");
  }
  RgbImage(std::uint32_t width, std::uint32_t height, Rgb fill = {})
      : RgbImage(width, height, std::vector<Rgb>(std::size_t{width} * height, fill)) {}

  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t height() const noexcept { return height_; }
  const std::vector<Rgb>& pixels() const noexcept { return pixels_; }

  const Rgb& at(std::uint32_t row, std::uint32_t col) const { return pixels_[std::size_t{row} * width_ + col]; }
  Rgb& at(std::uint32_t row, std::uint32_t col) { return pixels_[std::size_t{row} * width_ + col]; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::uint32_t width_;
  std::uint32_t height_;
  std::vector<Rgb> pixels_;
};

// 0 = red, 1 = green, 2 = blue at absolute mosaic position (row, col).
constexpr int bayer_channel(std::uint32_t row, std::uint32_t col) noexcept {
  const bool even_row = row % 2 == 0;
  const bool even_col = col % 2 == 0;
  if (even_row && even_col) return 0;
  if (!even_row && !even_col) return 2;
  return 1;
}

constexpr std::uint8_t channel_of(const Rgb& px, int channel) noexcept {
  return channel == 0 ? px.r : channel == 1 ? px.g : px.b;
}

// Samples an RGB image onto the RGGB mosaic.
inline PixelBuffer mosaic(const RgbImage& img) {
  Bytes out(std::size_t{img.width()} * img.height());
  for (std::uint32_t r = 0; r < img.height(); ++r)
    for (std::uint32_t c = 0; c < img.width(); ++c)
      out[std::size_t{r} * img.width() + c] = channel_of(img.at(r, c), bayer_channel(r, c));
  return PixelBuffer(img.width(), img.height(), std::move(out));
}

// Writes `img` into `buf` with its top-left at (row, col), sampling each
// pixel with the mosaic phase of its destination position.
inline void mosaic_into(PixelBuffer& buf, const RgbImage& img, std::uint32_t row, std::uint32_t col) {
  if (row + img.height() > buf.height() || col + img.width() > buf.width())
    throw DimensionError("patch does not fit inside buffer");
  for (std::uint32_t r = 0; r < img.height(); ++r)
    for (std::uint32_t c = 0; c < img.width(); ++c)
      buf.at(row + r, col + c) = channel_of(img.at(r, c), bayer_channel(row + r, col + c));
}

// Bilinear demosaic. For RGGB every missing sample is the rounded mean of the
// same-colour sites inside the 3x3 neighbourhood; borders use only in-bounds sites.
inline RgbImage demosaic(const PixelBuffer& buf) {
  const std::uint32_t w = buf.width();
  const std::uint32_t h = buf.height();
  if (w % 2 != 0 || h % 2 != 0) throw DimensionError("demosaic requires even dimensions");
  std::vector<Rgb> out(std::size_t{w} * h);
  const auto& src = buf.bytes();
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      unsigned sum[3] = {0, 0, 0};
      unsigned cnt[3] = {0, 0, 0};
      const int own = bayer_channel(r, c);
      for (int dr = -1; dr <= 1; ++dr) {
        const int rr = static_cast<int>(r) + dr;
        if (rr < 0 || rr >= static_cast<int>(h)) continue;
        for (int dc = -1; dc <= 1; ++dc) {
          const int cc = static_cast<int>(c) + dc;
          if (cc < 0 || cc >= static_cast<int>(w)) continue;
          const int ch = bayer_channel(static_cast<std::uint32_t>(rr), static_cast<std::uint32_t>(cc));
          if (ch == own) continue;
          sum[ch] += src[static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)];
          ++cnt[ch];
        }
      }
      std::uint8_t v[3];
      for (int ch = 0; ch < 3; ++ch) {
        if (ch == own) {
          v[ch] = src[std::size_t{r} * w + c];
        } else {
          v[ch] = static_cast<std::uint8_t>(std::min(255u, (sum[ch] + cnt[ch] / 2) / cnt[ch]));
        }
      }
      out[std::size_t{r} * w + c] = Rgb{v[0], v[1], v[2]};
    }
  }
  return RgbImage(w, h, std::move(out));
}

// Re-slices a byte stream laid out at `src_width` into rows of `dst_width`,
// which is what the receiver does when the true frame width differs from the
// width the content was produced at. Output pixel (r, c) is payload[r * dst_width + c].
// Trailing bytes that do not fill an even number of rows are dropped.
inline PixelBuffer reinterpret_width(std::span<const std::uint8_t> payload, std::uint32_t src_width,
                                     std::uint32_t dst_width) {
  if (src_width == 0 || dst_width == 0 || src_width % 2 != 0 || dst_width % 2 != 0)
    throw DimensionError("widths must be positive and even");
  if (payload.size() % src_width != 0) throw DimensionError("payload length is not a multiple of source width");
  if (payload.size() < dst_width) throw EmptyResultError("payload shorter than one destination row");
  auto height = static_cast<std::uint32_t>(payload.size() / dst_width);
  height -= height % 2;
  if (height == 0) throw EmptyResultError("payload yields no complete row pair at destination width");
  Bytes out(payload.begin(), payload.begin() + static_cast<std::ptrdiff_t>(std::size_t{height} * dst_width));
  return PixelBuffer(dst_width, height, std::move(out));
}

// --- PXB1 file form: "PXB1", width u32, height u32, format u32, raw bytes (big-endian) ---

inline Bytes encode_pxb(const PixelBuffer& buf) {
  Bytes out;
  out.reserve(16 + buf.size());
  ByteWriter w(out);
  w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("PXB1"), 4));
  w.u32(buf.width());
  w.u32(buf.height());
  w.u32(static_cast<std::uint32_t>(buf.format()));
  w.raw(buf.bytes());
  return out;
}

inline PixelBuffer decode_pxb(std::span<const std::uint8_t> data) {
  if (data.size() < 16) throw ParseError(ParseError::Kind::LengthMismatch, "pxb: truncated header");
  if (!std::equal(data.begin(), data.begin() + 4, "PXB1"))
    throw ParseError(ParseError::Kind::BadMagic, "pxb: bad magic");
  ByteReader r(data.subspan(4));
  const auto width = r.u32();
  const auto height = r.u32();
  const auto format = r.u32();
  if (format != static_cast<std::uint32_t>(PixelFormat::BayerRG8))
    throw ParseError(ParseError::Kind::InvalidField, "pxb: unknown pixel format " + std::to_string(format));
  if (r.remaining() != std::size_t{width} * height)
    throw ParseError(ParseError::Kind::LengthMismatch, "pxb: body length does not match dimensions");
  auto body = r.raw(r.remaining());
  return PixelBuffer(width, height, Bytes(body.begin(), body.end()));
}

inline Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

inline PixelBuffer load_pxb(const std::string& path) { return decode_pxb(read_file(path)); }
inline void save_pxb(const std::string& path, const PixelBuffer& buf) { write_file(path, encode_pxb(buf)); }

}  // namespace camspoof
