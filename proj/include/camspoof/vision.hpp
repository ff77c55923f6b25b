#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "camspoof/error.hpp"
#include "camspoof/pixel.hpp"

namespace camspoof {

// ---------------------------------------------------------------------------
// Hue-saturation histogram

struct Hsv {
  double h = 0.0;  // degrees in [0, 360)
  double s = 0.0;  // [0, 1]
  double v = 0.0;  // [0, 1]
};

inline Hsv to_hsv(const Rgb& px) noexcept {
  const double r = px.r / 255.0;
  const double g = px.g / 255.0;
  const double b = px.b / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? delta / mx : 0.0;
  if (delta > 0.0) {
    double h;
    if (mx == r) h = 60.0 * std::fmod((g - b) / delta, 6.0);
    else if (mx == g) h = 60.0 * ((b - r) / delta + 2.0);
    else h = 60.0 * ((r - g) / delta + 4.0);
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    out.h = h;
  }
  return out;
}

struct Histogram2D {
  std::uint32_t hue_bins = 50;
  std::uint32_t sat_bins = 60;
  std::vector<double> bins;

  Histogram2D(std::uint32_t hb, std::uint32_t sb) : hue_bins(hb), sat_bins(sb), bins(std::size_t{hb} * sb, 0.0) {}
  explicit Histogram2D(std::vector<double> counts) : hue_bins(static_cast<std::uint32_t>(counts.size())), sat_bins(1), bins(std::move(counts)) {}

  std::size_t size() const noexcept { return bins.size(); }
  double total() const noexcept {
    double t = 0.0;
    for (double b : bins) t += b;
    return t;
  }
  double mean() const noexcept { return bins.empty() ? 0.0 : total() / static_cast<double>(bins.size()); }
};

// Hue binned over [0, 360), saturation over [0, 1]; value ignored.
inline Histogram2D hs_histogram(const RgbImage& img, std::uint32_t hue_bins = 50, std::uint32_t sat_bins = 60) {
  Histogram2D hist(hue_bins, sat_bins);
  for (const Rgb& px : img.pixels()) {
    const Hsv hsv = to_hsv(px);
    const auto hb = std::min(hue_bins - 1, static_cast<std::uint32_t>(hsv.h / 360.0 * hue_bins));
    const auto sb = std::min(sat_bins - 1, static_cast<std::uint32_t>(hsv.s * sat_bins));
    hist.bins[std::size_t{hb} * sat_bins + sb] += 1.0;
  }
  return hist;
}

// sqrt(1 - sum_k sqrt(H1(k) H2(k)) / sqrt(mean1 * mean2 * N^2)), N the bin count.
inline double bhattacharyya_distance(const Histogram2D& a, const Histogram2D& b) {
  if (a.size() != b.size()) throw DimensionError("histograms have different bin counts");
  const double n = static_cast<double>(a.size());
  const double norm = std::sqrt(a.mean() * b.mean() * n * n);
  if (norm <= 0.0) return 1.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += std::sqrt(a.bins[k] * b.bins[k]);
  const double x = 1.0 - acc / norm;
  // Round-off of order 1e-16 would otherwise surface as 1e-8 after the root.
  return x < 1e-12 ? 0.0 : std::sqrt(x);
}

// ---------------------------------------------------------------------------
// Grayscale, corners, pyramidal Lucas-Kanade

struct GrayImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<float> px;

  float at(int r, int c) const noexcept {
    r = std::clamp(r, 0, static_cast<int>(height) - 1);
    c = std::clamp(c, 0, static_cast<int>(width) - 1);
    return px[static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c)];
  }

  // Bilinear sample with border clamping.
  float sample(float x, float y) const noexcept {
    const float fx = std::floor(x);
    const float fy = std::floor(y);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const float ax = x - fx;
    const float ay = y - fy;
    const float top = at(y0, x0) * (1 - ax) + at(y0, x0 + 1) * ax;
    const float bot = at(y0 + 1, x0) * (1 - ax) + at(y0 + 1, x0 + 1) * ax;
    return top * (1 - ay) + bot * ay;
  }
};

inline GrayImage to_gray(const RgbImage& img) {
  GrayImage g{img.width(), img.height(), std::vector<float>(img.pixels().size())};
  for (std::size_t i = 0; i < g.px.size(); ++i) {
    const Rgb& p = img.pixels()[i];
    g.px[i] = 0.299f * p.r + 0.587f * p.g + 0.114f * p.b;
  }
  return g;
}

struct Point2f {
  float x = 0.0f;
  float y = 0.0f;
};

struct CornerParams {
  std::size_t max_corners = 200;
  double quality = 0.01;
  double min_distance = 10.0;
  int block_radius = 1;  // 3x3 structure-tensor window
};

// Shi-Tomasi: minimum eigenvalue of the structure tensor, 3x3 non-maximum
// suppression, quality cut relative to the strongest response, greedy minimum spacing.
inline std::vector<Point2f> shi_tomasi(const GrayImage& img, const CornerParams& params = {}) {
  const int w = static_cast<int>(img.width);
  const int h = static_cast<int>(img.height);
  if (w < 3 || h < 3) return {};
  std::vector<float> ix(img.px.size()), iy(img.px.size());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const float gx = (img.at(r - 1, c + 1) + 2 * img.at(r, c + 1) + img.at(r + 1, c + 1)) -
                       (img.at(r - 1, c - 1) + 2 * img.at(r, c - 1) + img.at(r + 1, c - 1));
      const float gy = (img.at(r + 1, c - 1) + 2 * img.at(r + 1, c) + img.at(r + 1, c + 1)) -
                       (img.at(r - 1, c - 1) + 2 * img.at(r - 1, c) + img.at(r - 1, c + 1));
      ix[static_cast<std::size_t>(r) * w + c] = gx / 8.0f;
      iy[static_cast<std::size_t>(r) * w + c] = gy / 8.0f;
    }
  std::vector<float> score(img.px.size(), 0.0f);
  const int br = params.block_radius;
  float best = 0.0f;
  for (int r = br + 1; r < h - br - 1; ++r)
    for (int c = br + 1; c < w - br - 1; ++c) {
      double a = 0, b = 0, d = 0;
      for (int dr = -br; dr <= br; ++dr)
        for (int dc = -br; dc <= br; ++dc) {
          const std::size_t i = static_cast<std::size_t>(r + dr) * w + (c + dc);
          a += double{ix[i]} * ix[i];
          b += double{ix[i]} * iy[i];
          d += double{iy[i]} * iy[i];
        }
      const double half_tr = (a + d) / 2.0;
      const double lam = half_tr - std::sqrt((a - d) * (a - d) / 4.0 + b * b);
      const auto s = static_cast<float>(std::max(0.0, lam));
      score[static_cast<std::size_t>(r) * w + c] = s;
      best = std::max(best, s);
    }
  if (best <= 0.0f) return {};
  const float cut = static_cast<float>(params.quality * best);

  struct Cand {
    float s;
    int r, c;
  };
  std::vector<Cand> cands;
  for (int r = 1; r < h - 1; ++r)
    for (int c = 1; c < w - 1; ++c) {
      const float s = score[static_cast<std::size_t>(r) * w + c];
      if (s < cut || s <= 0.0f) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
          if ((dr || dc) && score[static_cast<std::size_t>(r + dr) * w + (c + dc)] > s) {
            is_max = false;
            break;
          }
      if (is_max) cands.push_back({s, r, c});
    }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.s > y.s; });

  std::vector<Point2f> out;
  const double md2 = params.min_distance * params.min_distance;
  for (const auto& cd : cands) {
    if (out.size() >= params.max_corners) break;
    bool ok = true;
    for (const auto& p : out) {
      const double dx = p.x - cd.c;
      const double dy = p.y - cd.r;
      if (dx * dx + dy * dy < md2) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(Point2f{static_cast<float>(cd.c), static_cast<float>(cd.r)});
  }
  return out;
}

inline GrayImage pyr_down(const GrayImage& src) {
  GrayImage dst{std::max(1u, (src.width + 1) / 2), std::max(1u, (src.height + 1) / 2), {}};
  dst.px.resize(std::size_t{dst.width} * dst.height);
  static constexpr float k[5] = {1 / 16.f, 4 / 16.f, 6 / 16.f, 4 / 16.f, 1 / 16.f};
  for (std::uint32_t r = 0; r < dst.height; ++r)
    for (std::uint32_t c = 0; c < dst.width; ++c) {
      float acc = 0.0f;
      for (int i = -2; i <= 2; ++i)
        for (int j = -2; j <= 2; ++j)
          acc += k[i + 2] * k[j + 2] * src.at(static_cast<int>(2 * r) + i, static_cast<int>(2 * c) + j);
      dst.px[std::size_t{r} * dst.width + c] = acc;
    }
  return dst;
}

struct LkParams {
  int levels = 3;            // pyramid levels including full resolution
  int window = 21;           // square window side
  int max_iterations = 30;
  double epsilon = 0.01;     // convergence, pixels
  double min_eigen = 0.5;    // per-pixel minimum eigenvalue of the gradient matrix
};

struct TrackedFeature {
  Point2f from;
  Point2f to;
  bool ok = false;
  double residual = 0.0;  // mean absolute intensity difference over the window at full resolution
};

// Bouguet-style pyramidal Lucas-Kanade tracking of `points` from `prev` into `cur`.
inline std::vector<TrackedFeature> track_features(const GrayImage& prev, const GrayImage& cur,
                                                  const std::vector<Point2f>& points, const LkParams& params = {}) {
  std::vector<GrayImage> pp{prev}, pc{cur};
  for (int l = 1; l < params.levels; ++l) {
    if (pp.back().width < 8 || pp.back().height < 8 || pc.back().width < 8 || pc.back().height < 8) break;
    pp.push_back(pyr_down(pp.back()));
    pc.push_back(pyr_down(pc.back()));
  }
  const int levels = static_cast<int>(pp.size());
  const int half = params.window / 2;
  const double n_win = static_cast<double>(params.window) * params.window;

  std::vector<TrackedFeature> out;
  out.reserve(points.size());
  std::vector<float> patch(static_cast<std::size_t>(params.window) * params.window);
  std::vector<float> gx(patch.size()), gy(patch.size());

  for (const auto& pt : points) {
    TrackedFeature tf;
    tf.from = pt;
    float gux = 0.0f, guy = 0.0f;  // guess carried down the pyramid
    bool ok = true;
    for (int l = levels - 1; l >= 0; --l) {
      const GrayImage& I = pp[static_cast<std::size_t>(l)];
      const GrayImage& J = pc[static_cast<std::size_t>(l)];
      const float scale = 1.0f / static_cast<float>(1 << l);
      const float px = pt.x * scale;
      const float py = pt.y * scale;
      double a = 0, b = 0, d = 0;
      std::size_t k = 0;
      for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx, ++k) {
          const float x = px + static_cast<float>(dx);
          const float y = py + static_cast<float>(dy);
          patch[k] = I.sample(x, y);
          gx[k] = (I.sample(x + 1, y) - I.sample(x - 1, y)) * 0.5f;
          gy[k] = (I.sample(x, y + 1) - I.sample(x, y - 1)) * 0.5f;
          a += double{gx[k]} * gx[k];
          b += double{gx[k]} * gy[k];
          d += double{gy[k]} * gy[k];
        }
      const double det = a * d - b * b;
      const double min_eig = (a + d) / 2.0 - std::sqrt((a - d) * (a - d) / 4.0 + b * b);
      if (min_eig / n_win < params.min_eigen || det <= 0.0) {
        ok = false;
        break;
      }
      float vx = 0.0f, vy = 0.0f;
      for (int it = 0; it < params.max_iterations; ++it) {
        double bx = 0, by = 0;
        k = 0;
        for (int dy = -half; dy <= half; ++dy)
          for (int dx = -half; dx <= half; ++dx, ++k) {
            const float diff =
                patch[k] - J.sample(px + gux + vx + static_cast<float>(dx), py + guy + vy + static_cast<float>(dy));
            bx += double{diff} * gx[k];
            by += double{diff} * gy[k];
          }
        const auto ex = static_cast<float>((d * bx - b * by) / det);
        const auto ey = static_cast<float>((a * by - b * bx) / det);
        vx += ex;
        vy += ey;
        if (std::hypot(ex, ey) < params.epsilon) break;
      }
      if (l > 0) {
        gux = 2.0f * (gux + vx);
        guy = 2.0f * (guy + vy);
      } else {
        gux += vx;
        guy += vy;
      }
    }
    tf.to = Point2f{pt.x + gux, pt.y + guy};
    if (ok && (tf.to.x < 0 || tf.to.y < 0 || tf.to.x > static_cast<float>(cur.width - 1) ||
               tf.to.y > static_cast<float>(cur.height - 1) || !std::isfinite(tf.to.x) || !std::isfinite(tf.to.y)))
      ok = false;
    if (ok) {
      double err = 0.0;
      for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx)
          err += std::abs(prev.sample(pt.x + static_cast<float>(dx), pt.y + static_cast<float>(dy)) -
                          cur.sample(tf.to.x + static_cast<float>(dx), tf.to.y + static_cast<float>(dy)));
      tf.residual = err / n_win;
    }
    tf.ok = ok;
    out.push_back(tf);
  }
  return out;
}

}  // namespace camspoof
