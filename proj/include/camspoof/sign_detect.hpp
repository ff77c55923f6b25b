#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "camspoof/pixel.hpp"
#include "camspoof/scene.hpp"

namespace camspoof {

// Confidence threshold of the stand-in sign recogniser.
inline constexpr double kSignThreshold = 0.3;

struct SignSearch {
  std::uint32_t stride = 1;
  // When set, only placements whose window intersects rows [row_begin, row_end) are scored.
  std::optional<std::uint32_t> row_begin;
  std::optional<std::uint32_t> row_end;
};

struct SignMatch {
  double score = 0.0;
  std::uint32_t row = 0;
  std::uint32_t col = 0;

  bool recognized() const noexcept { return score >= kSignThreshold; }
};

namespace detail {

// Horizontal first differences, three channels interleaved: (h, w - 1, 3).
struct DiffPlane {
  std::uint32_t width = 0;  // columns of differences
  std::uint32_t height = 0;
  std::vector<float> v;
  const float* row(std::uint32_t r) const { return v.data() + std::size_t{r} * width * 3; }
};

inline DiffPlane horizontal_diffs(const RgbImage& img) {
  DiffPlane d;
  d.width = img.width() - 1;
  d.height = img.height();
  d.v.resize(std::size_t{d.width} * d.height * 3);
  std::size_t k = 0;
  for (std::uint32_t r = 0; r < img.height(); ++r)
    for (std::uint32_t c = 0; c < d.width; ++c) {
      const Rgb& a = img.at(r, c);
      const Rgb& b = img.at(r, c + 1);
      d.v[k++] = static_cast<float>(b.r) - a.r;
      d.v[k++] = static_cast<float>(b.g) - a.g;
      d.v[k++] = static_cast<float>(b.b) - a.b;
    }
  return d;
}

}  // namespace detail

// Maximum normalized cross-correlation of the template against every
// placement, computed on horizontal first differences (taken inside the
// window, so an exact copy still scores 1). Channels form one vector.
// Windows or templates with zero variance score 0.
inline SignMatch find_sign(const RgbImage& img, const SignTemplate& tpl, const SignSearch& search = {}) {
  const std::uint32_t tw = tpl.width();
  const std::uint32_t th = tpl.height();
  if (tw > img.width() || th > img.height()) throw DimensionError("template larger than image");
  SignMatch best;
  if (tw < 2) return best;
  const std::uint32_t stride = std::max(1u, search.stride);

  const detail::DiffPlane td = detail::horizontal_diffs(tpl.image);
  const std::size_t n = td.v.size();
  std::vector<double> t(td.v.begin(), td.v.end());
  double tmean = 0.0;
  for (double v : t) tmean += v;
  tmean /= static_cast<double>(n);
  double tnorm2 = 0.0;
  for (double& v : t) {
    v -= tmean;
    tnorm2 += v * v;
  }
  if (tnorm2 <= 0.0) return best;
  const double tnorm = std::sqrt(tnorm2);

  const detail::DiffPlane id = detail::horizontal_diffs(img);
  const std::uint32_t W = id.width;
  const std::uint32_t H = id.height;
  const std::uint32_t fw = td.width;
  // Integral images of per-position channel sum and sum of squares.
  std::vector<double> s1(std::size_t{W + 1} * (H + 1), 0.0);
  std::vector<double> s2(s1.size(), 0.0);
  for (std::uint32_t r = 0; r < H; ++r) {
    const float* p = id.row(r);
    double a1 = 0.0, a2 = 0.0;
    for (std::uint32_t c = 0; c < W; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        const double x = p[c * 3 + static_cast<std::uint32_t>(ch)];
        a1 += x;
        a2 += x * x;
      }
      const std::size_t i = std::size_t{r + 1} * (W + 1) + c + 1;
      s1[i] = s1[i - (W + 1)] + a1;
      s2[i] = s2[i - (W + 1)] + a2;
    }
  }
  auto box = [&](const std::vector<double>& s, std::uint32_t r, std::uint32_t c) {
    const std::size_t a = std::size_t{r} * (W + 1) + c;
    const std::size_t b = std::size_t{r + th} * (W + 1) + c;
    return s[b + fw] - s[b] - s[a + fw] + s[a];
  };

  std::uint32_t r_lo = 0;
  std::uint32_t r_hi = H - th;
  if (search.row_begin) r_lo = *search.row_begin + 1 > th ? *search.row_begin + 1 - th : 0;
  if (search.row_end) r_hi = std::min(r_hi, *search.row_end > 0 ? *search.row_end - 1 : 0);

  bool scored = false;
  const std::size_t row_len = std::size_t{fw} * 3;
  for (std::uint32_t r = r_lo; r <= r_hi; r += stride) {
    for (std::uint32_t c = 0; c + fw <= W; c += stride) {
      const double sum = box(s1, r, c);
      const double var = box(s2, r, c) - sum * sum / static_cast<double>(n);
      double score = 0.0;
      if (var > 1e-9 * static_cast<double>(n)) {
        double dot = 0.0;
        const double* tk = t.data();
        for (std::uint32_t y = 0; y < th; ++y, tk += row_len) {
          const float* row = id.row(r + y) + std::size_t{c} * 3;
          for (std::size_t x = 0; x < row_len; ++x) dot += row[x] * tk[x];
        }
        score = dot / (std::sqrt(var) * tnorm);
      }
      if (!scored || score > best.score) best = SignMatch{score, r, c};
      scored = true;
    }
  }
  return best;
}

inline double toy_sign_detect(const RgbImage& img, const SignTemplate& tpl, const SignSearch& search = {}) {
  return find_sign(img, tpl, search).score;
}

}  // namespace camspoof
