#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "camspoof/error.hpp"
#include "camspoof/pixel.hpp"

namespace camspoof {

// Synthetic driving scene standing in for road footage: band-limited value
// noise over a natural palette plus hard-edged rectangles that give the
// corner detector something to lock onto. The whole plane moves by `motion`
// pixels per frame.
struct SceneConfig {
  std::uint64_t seed = 1;
  std::uint32_t width = 256;
  std::uint32_t height = 128;
  int motion_dx = 2;
  int motion_dy = 0;
  double texture_scale = 24.0;      // lattice spacing of the coarsest noise octave, pixels
  double corner_density = 2000.0;   // target corners per megapixel

  void validate() const {
    if (width == 0 || height == 0 || width % 2 != 0 || height % 2 != 0)
      throw ConfigError("scene width and height must be positive and even");
    if (!(corner_density > 0.0)) throw ConfigError("scene corner_density must be positive");
    if (!(texture_scale >= 2.0)) throw ConfigError("scene texture_scale must be at least 2");
  }
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_cell(std::uint64_t seed, std::int64_t x, std::int64_t y, std::uint64_t salt) noexcept {
  std::uint64_t h = splitmix64(seed ^ (salt * 0xD6E8FEB86659FD93ull));
  h = splitmix64(h ^ static_cast<std::uint64_t>(x));
  return splitmix64(h ^ (static_cast<std::uint64_t>(y) * 0x9E3779B97F4A7C15ull));
}

inline double unit(std::uint64_t h) noexcept { return static_cast<double>(h >> 11) * 0x1.0p-53; }

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept {
  const std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

// Smooth value noise in [0, 1) on a lattice of the given spacing.
inline double value_noise(std::uint64_t seed, std::uint64_t salt, double x, double y, double spacing) noexcept {
  const double fx = x / spacing;
  const double fy = y / spacing;
  const double x0 = std::floor(fx);
  const double y0 = std::floor(fy);
  const double tx = fx - x0;
  const double ty = fy - y0;
  const double sx = tx * tx * (3.0 - 2.0 * tx);
  const double sy = ty * ty * (3.0 - 2.0 * ty);
  const auto ix = static_cast<std::int64_t>(x0);
  const auto iy = static_cast<std::int64_t>(y0);
  const double v00 = unit(hash_cell(seed, ix, iy, salt));
  const double v10 = unit(hash_cell(seed, ix + 1, iy, salt));
  const double v01 = unit(hash_cell(seed, ix, iy + 1, salt));
  const double v11 = unit(hash_cell(seed, ix + 1, iy + 1, salt));
  const double a = v00 + (v10 - v00) * sx;
  const double b = v01 + (v11 - v01) * sx;
  return a + (b - a) * sy;
}

struct Color {
  double r, g, b;
};

// Road-scene palette; deliberately free of saturated reds so that injected
// signs stand out from the background.
inline constexpr std::array<Color, 4> kGroundPalette = {{
    {96, 122, 78},    // foliage
    {128, 128, 124},  // asphalt
    {118, 146, 184},  // sky
    {132, 108, 84},   // soil
}};

inline constexpr std::array<Color, 6> kBlobPalette = {{
    {24, 26, 30},
    {236, 236, 228},
    {52, 84, 150},
    {200, 186, 60},
    {40, 120, 60},
    {150, 150, 160},
}};

inline Rgb to_rgb(double r, double g, double b) noexcept {
  auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); };
  return Rgb{q(r), q(g), q(b)};
}

// Colour of world point (x, y).
inline Rgb scene_color(const SceneConfig& s, std::int64_t x, std::int64_t y) {
  // Rectangles: at most one per lattice cell, fully inside the cell.
  const double cell_d = std::sqrt(4.0e6 / s.corner_density);
  const auto cell = static_cast<std::int64_t>(std::max(8.0, std::round(cell_d)));
  const std::int64_t cx = floor_div(x, cell);
  const std::int64_t cy = floor_div(y, cell);
  const std::uint64_t h = hash_cell(s.seed, cx, cy, 0xB10B);
  if ((h & 0xFF) < 218) {  // ~85% of cells carry a rectangle
    const std::uint64_t h2 = splitmix64(h);
    const std::int64_t min_side = std::max<std::int64_t>(4, cell / 4);
    const std::int64_t span = std::max<std::int64_t>(1, cell * 3 / 5 - min_side);
    const std::int64_t rw = min_side + static_cast<std::int64_t>(h2 % static_cast<std::uint64_t>(span));
    const std::int64_t rh = min_side + static_cast<std::int64_t>((h2 >> 16) % static_cast<std::uint64_t>(span));
    const std::int64_t ox = static_cast<std::int64_t>((h2 >> 32) % static_cast<std::uint64_t>(cell - rw));
    const std::int64_t oy = static_cast<std::int64_t>((h2 >> 48) % static_cast<std::uint64_t>(cell - rh));
    const std::int64_t lx = x - cx * cell;
    const std::int64_t ly = y - cy * cell;
    if (lx >= ox && lx < ox + rw && ly >= oy && ly < oy + rh) {
      const auto& c = kBlobPalette[(h >> 8) % kBlobPalette.size()];
      return to_rgb(c.r, c.g, c.b);
    }
  }

  const auto fx = static_cast<double>(x);
  const auto fy = static_cast<double>(y);
  const double lum = 0.65 * value_noise(s.seed, 1, fx, fy, s.texture_scale) +
                     0.35 * value_noise(s.seed, 2, fx, fy, s.texture_scale / 3.0);
  const double mix = value_noise(s.seed, 3, fx, fy, s.texture_scale * 4.0) * 3.0;
  const auto i0 = static_cast<std::size_t>(std::min(2.0, std::floor(mix)));
  const double t = mix - static_cast<double>(i0);
  const Color& a = kGroundPalette[i0];
  const Color& b = kGroundPalette[i0 + 1];
  const double k = 0.45 + 1.1 * lum;
  return to_rgb((a.r + (b.r - a.r) * t) * k, (a.g + (b.g - a.g) * t) * k, (a.b + (b.b - a.b) * t) * k);
}

}  // namespace detail

// Full-colour rendering of frame `frame_index`; content at frame t sits
// t * motion pixels from where it was at frame 0.
inline RgbImage render_scene(const SceneConfig& scene, std::uint64_t frame_index) {
  scene.validate();
  const auto t = static_cast<std::int64_t>(frame_index);
  const std::int64_t ox = t * scene.motion_dx;
  const std::int64_t oy = t * scene.motion_dy;
  RgbImage img(scene.width, scene.height);
  for (std::uint32_t r = 0; r < scene.height; ++r)
    for (std::uint32_t c = 0; c < scene.width; ++c)
      img.at(r, c) = detail::scene_color(scene, static_cast<std::int64_t>(c) - ox, static_cast<std::int64_t>(r) - oy);
  return img;
}

inline PixelBuffer synth_frame(const SceneConfig& scene, std::uint64_t frame_index) {
  return mosaic(render_scene(scene, frame_index));
}

// ---------------------------------------------------------------------------
// Sign templates

enum class SignLabel { StopSign, RedLight };

inline std::string to_string(SignLabel l) { return l == SignLabel::StopSign ? "stop_sign" : "red_light"; }

struct SignTemplate {
  RgbImage image;
  SignLabel label;

  std::uint32_t width() const noexcept { return image.width(); }
  std::uint32_t height() const noexcept { return image.height(); }
};

// Red octagon with a white rim and white block lettering on a pale backdrop.
inline SignTemplate make_stop_sign(std::uint32_t size) {
  if (size < 16 || size % 2 != 0) throw DimensionError("stop sign size must be even and at least 16");
  const Rgb backdrop{168, 180, 196};
  const Rgb red{204, 24, 36};
  const Rgb white{246, 246, 246};
  RgbImage img(size, size, backdrop);
  const double c = (size - 1) / 2.0;
  const double rad = size * 0.47;
  const double rim = std::max(1.0, size * 0.05);
  // Regular octagon norm: max(|x|, |y|, (|x| + |y|) / sqrt 2).
  auto oct = [](double x, double y) {
    return std::max({std::abs(x), std::abs(y), (std::abs(x) + std::abs(y)) / std::sqrt(2.0)});
  };
  for (std::uint32_t r = 0; r < size; ++r) {
    for (std::uint32_t col = 0; col < size; ++col) {
      const double d = oct(col - c, r - c);
      if (d <= rad - rim) img.at(r, col) = red;
      else if (d <= rad) img.at(r, col) = white;
    }
  }
  // Four letter blocks across the middle band, each with a vertical slot.
  const auto band_top = static_cast<std::uint32_t>(size * 0.40);
  const auto band_bot = static_cast<std::uint32_t>(size * 0.60);
  const auto left = static_cast<std::uint32_t>(size * 0.18);
  const auto right = static_cast<std::uint32_t>(size * 0.82);
  const std::uint32_t letter = (right - left) / 4;
  for (std::uint32_t k = 0; k < 4; ++k) {
    const std::uint32_t x0 = left + k * letter + letter / 6;
    const std::uint32_t x1 = left + (k + 1) * letter - letter / 6;
    const std::uint32_t slot0 = x0 + (x1 - x0) / 3;
    const std::uint32_t slot1 = x1 - (x1 - x0) / 3;
    for (std::uint32_t r = band_top; r < band_bot; ++r)
      for (std::uint32_t col = x0; col < x1; ++col) {
        const bool in_slot = col >= slot0 && col < slot1 && r > band_top + 1 && r + 2 < band_bot && (k % 2 == 0);
        if (!in_slot) img.at(r, col) = white;
      }
  }
  return SignTemplate{std::move(img), SignLabel::StopSign};
}

// Vertical three-lamp traffic light with the top (red) lamp lit.
inline SignTemplate make_red_light(std::uint32_t width, std::uint32_t height) {
  if (width < 8 || height < 16 || width % 2 != 0 || height % 2 != 0)
    throw DimensionError("red light template must be even and at least 8x16");
  const Rgb backdrop{150, 176, 210};
  const Rgb housing{22, 22, 24};
  const Rgb lit{255, 48, 40};
  const Rgb amber_off{70, 58, 20};
  const Rgb green_off{20, 58, 32};
  RgbImage img(width, height, backdrop);
  const std::uint32_t mx = 0;
  for (std::uint32_t r = 0; r < height; ++r)
    for (std::uint32_t c = mx; c < width - mx; ++c) img.at(r, c) = housing;
  const double cx = (width - 1) / 2.0;
  const double lamp_r = (width - 2.0 * mx) * 0.40;
  const std::array<Rgb, 3> lamps = {lit, amber_off, green_off};
  for (int k = 0; k < 3; ++k) {
    const double cy = height * (k + 0.5) / 3.0;
    for (std::uint32_t r = 0; r < height; ++r)
      for (std::uint32_t c = 0; c < width; ++c)
        if (std::hypot(c - cx, r - cy) <= lamp_r) img.at(r, c) = lamps[static_cast<std::size_t>(k)];
  }
  return SignTemplate{std::move(img), SignLabel::RedLight};
}

inline SignTemplate make_template(SignLabel label, std::uint32_t size) {
  return label == SignLabel::StopSign ? make_stop_sign(size) : make_red_light(size / 2 + (size / 2) % 2, size);
}

// Copies `src` into `dst` with its top-left corner at (row, col).
inline void paste(RgbImage& dst, const RgbImage& src, std::uint32_t row, std::uint32_t col) {
  if (row + src.height() > dst.height() || col + src.width() > dst.width())
    throw DimensionError("pasted image does not fit");
  for (std::uint32_t r = 0; r < src.height(); ++r)
    for (std::uint32_t c = 0; c < src.width(); ++c) dst.at(row + r, col + c) = src.at(r, c);
}

enum class Backdrop { Plain, Scene };

// Attacker-side fabricated image: a sign on either a plain sky/road backdrop
// or an unrelated synthetic scene, mosaiced at the attacker's chosen width.
inline PixelBuffer compose_injection(std::uint32_t width, std::uint32_t height, const SignTemplate& sign,
                                     std::uint32_t row, std::uint32_t col, Backdrop backdrop,
                                     std::uint64_t seed = 0xF00D) {
  RgbImage img(width, height);
  if (backdrop == Backdrop::Plain) {
    for (std::uint32_t r = 0; r < height; ++r)
      for (std::uint32_t c = 0; c < width; ++c)
        img.at(r, c) = r < height / 2 ? Rgb{126, 170, 222} : Rgb{70, 70, 74};
  } else {
    SceneConfig s;
    s.seed = seed;
    s.width = width;
    s.height = height;
    img = render_scene(s, 0);
  }
  paste(img, sign.image, row, col);
  return mosaic(img);
}

}  // namespace camspoof
