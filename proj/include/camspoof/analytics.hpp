#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "camspoof/attacker.hpp"
#include "camspoof/defense.hpp"
#include "camspoof/detectors.hpp"
#include "camspoof/error.hpp"
#include "camspoof/pixel.hpp"
#include "camspoof/scene.hpp"
#include "camspoof/sign_detect.hpp"
#include "camspoof/sim.hpp"

namespace camspoof {

// ---------------------------------------------------------------------------
// Closed forms

// Probability that one fabricated frame at a fixed width falls outside all
// d_max + 1 requested widths.
inline double p_detection(unsigned b, unsigned d_max) {
  return std::pow(1.0 - std::ldexp(1.0, -static_cast<int>(b)), static_cast<double>(d_max) + 1.0);
}

inline double p_protection(unsigned b) { return 1.0 - std::ldexp(1.0, -static_cast<int>(b)); }

inline double binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  if (n > 1000) {
    return std::exp(std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
                    std::lgamma(static_cast<double>(n - k) + 1));
  }
  double v = 1.0;
  for (std::uint64_t i = 1; i <= k; ++i) v = v * static_cast<double>(n - k + i) / static_cast<double>(i);
  return v;
}

namespace detail {

// sum_l (-1)^l C(n - l r, l) (q p^r)^l; also reports the largest term magnitude.
inline double beta_sum(std::int64_t n, std::int64_t r, double p, double* max_term = nullptr) {
  if (n < 0) return 0.0;
  const double x = (1.0 - p) * std::pow(p, static_cast<double>(r));
  double s = 0.0;
  double big = 0.0;
  for (std::int64_t l = 0; l * (r + 1) <= n; ++l) {
    const double term = binomial(static_cast<std::uint64_t>(n - l * r), static_cast<std::uint64_t>(l)) *
                        std::pow(x, static_cast<double>(l));
    big = std::max(big, term);
    s += (l % 2 == 0) ? term : -term;
  }
  if (max_term) *max_term = big;
  return s;
}

// The binomial as printed in the source formula: C(n, n - l r).
inline double beta_sum_literal(std::int64_t n, std::int64_t r, double p) {
  if (n < 0) return 0.0;
  const double x = (1.0 - p) * std::pow(p, static_cast<double>(r));
  double s = 0.0;
  for (std::int64_t l = 0; l * (r + 1) <= n; ++l) {
    const double term = binomial(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(n - l * r)) *
                        std::pow(x, static_cast<double>(l));
    s += (l % 2 == 0) ? term : -term;
  }
  return s;
}

// P(no run of r successes in n trials) by a_n = a_{n-1} - q p^r a_{n-r-1}.
inline double no_run_recurrence(std::uint64_t n, std::uint64_t r, double p) {
  const double x = (1.0 - p) * std::pow(p, static_cast<double>(r));
  std::vector<double> a(n + 1, 1.0);
  for (std::uint64_t m = r; m <= n; ++m) {
    if (m == r) a[m] = 1.0 - std::pow(p, static_cast<double>(r));
    else a[m] = a[m - 1] - x * a[m - r - 1];
  }
  return a[n];
}

}  // namespace detail

inline void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must be in [0, 1]");
}

// P(at least one run of r consecutive successes in n Bernoulli(p) trials)
// as 1 - beta(n, r) + p^r beta(n - r, r).
inline double p_run(std::uint64_t n, std::uint64_t r, double p) {
  check_probability(p, "p");
  if (r == 0) return 1.0;
  if (r > n) return 0.0;
  double big1 = 0.0, big2 = 0.0;
  const auto N = static_cast<std::int64_t>(n), R = static_cast<std::int64_t>(r);
  const double b1 = detail::beta_sum(N, R, p, &big1);
  const double b2 = detail::beta_sum(N - R, R, p, &big2);
  // The alternating sum loses precision once its terms dwarf the result.
  if (std::max(big1, big2) > 1e4) return 1.0 - detail::no_run_recurrence(n, r, p);
  return std::clamp(1.0 - b1 + std::pow(p, static_cast<double>(r)) * b2, 0.0, 1.0);
}

inline double p_run_literal(std::uint64_t n, std::uint64_t r, double p) {
  if (r == 0) return 1.0;
  if (r > n) return 0.0;
  const auto N = static_cast<std::int64_t>(n), R = static_cast<std::int64_t>(r);
  return 1.0 - detail::beta_sum_literal(N, R, p) + std::pow(p, static_cast<double>(r)) * detail::beta_sum_literal(N - R, R, p);
}

// Number of length-n outcome strings that contain a run of >= r successes,
// indexed by their success count. Full enumeration.
inline std::vector<std::uint64_t> run_counts_by_weight(unsigned n, unsigned r) {
  if (n > 20) throw ConfigError("enumeration limited to n <= 20");
  std::vector<std::uint64_t> counts(n + 1, 0);
  if (r == 0) {
    for (std::uint32_t m = 0; m < (1u << n); ++m) ++counts[static_cast<std::size_t>(std::popcount(m))];
    return counts;
  }
  for (std::uint32_t m = 0; m < (1u << n); ++m) {
    std::uint32_t y = m;
    for (unsigned i = 1; i < r && y; ++i) y &= m >> i;
    if (y) ++counts[static_cast<std::size_t>(std::popcount(m))];
  }
  return counts;
}

inline double brute_force_run_prob(unsigned n, unsigned r, double p) {
  check_probability(p, "p");
  if (r > n) return 0.0;
  const auto counts = run_counts_by_weight(n, r);
  double s = 0.0;
  for (unsigned k = 0; k <= n; ++k)
    if (counts[k]) s += static_cast<double>(counts[k]) * std::pow(p, k) * std::pow(1.0 - p, n - k);
  return s;
}

// Mean number of attempts until the first run of r successes: sum_{l=1..r} p^-l.
inline double expected_attempts(unsigned r, double p) {
  check_probability(p, "p");
  if (r == 0) return 0.0;
  if (p == 0.0) return std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (unsigned l = 1; l <= r; ++l) s += std::pow(p, -static_cast<double>(l));
  return s;
}

// Same sum starting at l = 0, as printed in the source formula.
inline double expected_attempts_literal(unsigned r, double p) {
  if (p == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 + expected_attempts(r, p);
}

inline double expected_time(unsigned r, double p, double fps) {
  if (!(fps > 0.0)) throw ConfigError("fps must be positive");
  return expected_attempts(r, p) / fps;
}

inline std::uint64_t n_stop(double t_stop_s, double fps) {
  if (t_stop_s < 0.0 || !(fps > 0.0)) throw ConfigError("n_stop: need t_stop >= 0 and fps > 0");
  // Guard against 5.25 * 20 landing a hair above 105.
  return static_cast<std::uint64_t>(std::ceil(t_stop_s * fps - 1e-9));
}

enum class RunVariant { FullFrame, StripePatch };

// Per-attempt evasion probability p for the run analysis.
inline double evasion_probability(RunVariant v, unsigned b, unsigned d_max) {
  return v == RunVariant::FullFrame ? 1.0 - p_detection(b, d_max) : 1.0 - p_protection(b);
}

// Mean attempts from simulated Bernoulli sequences.
inline double monte_carlo_attempts(unsigned r, double p, std::uint64_t episodes, std::uint64_t seed) {
  check_probability(p, "p");
  if (p == 0.0 && r > 0) throw ConfigError("monte_carlo_attempts: p = 0 never terminates");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (std::uint64_t e = 0; e < episodes; ++e) {
    std::uint64_t n = 0;
    unsigned run = 0;
    while (run < r) {
      ++n;
      run = detail::unit_draw_below(rng, p) ? run + 1 : 0;
    }
    total += static_cast<double>(n);
  }
  return total / static_cast<double>(episodes);
}

// ---------------------------------------------------------------------------
// End-to-end Monte Carlo of the width defense against a full-frame attacker

struct AttackRecipe {
  unsigned bits = 3;
  unsigned d_max = 1;
  std::uint64_t frames = 100'000;   // fabricated frames
  std::uint32_t w_max = 32;
  std::uint32_t height = 8;
  double fps = 20.0;
  unsigned camera_delay_frames = 0;
  std::optional<std::uint32_t> attacker_width;  // defaults to w_max
  std::uint64_t seed = 1;
};

struct AttackMonteCarlo {
  AttackRecipe recipe;
  std::uint64_t attack_frames = 0;
  std::uint64_t detected = 0;
  double detection_rate = 0.0;
  double closed_form = 0.0;
  std::map<std::uint64_t, std::uint64_t> run_histogram;  // maximal undetected runs, length >= 1
  std::uint64_t max_run = 0;
  double max_run_seconds = 0.0;
  double max_run_share = 0.0;  // fraction of runs at the maximum length
  std::uint64_t mode_run = 0;
};

inline Bytes key_from_seed(std::uint64_t seed, std::size_t n = 16) {
  Bytes key(n);
  std::uint64_t s = seed;
  for (std::size_t i = 0; i < n; ++i) {
    s = detail::splitmix64(s);
    key[i] = static_cast<std::uint8_t>(s >> 56);
  }
  return key;
}

inline std::map<std::uint64_t, std::uint64_t> undetected_runs(const std::vector<bool>& detected) {
  std::map<std::uint64_t, std::uint64_t> h;
  std::uint64_t run = 0;
  for (bool d : detected) {
    if (!d) {
      ++run;
    } else if (run) {
      ++h[run];
      run = 0;
    }
  }
  if (run) ++h[run];
  return h;
}

inline AttackMonteCarlo monte_carlo_attack(const AttackRecipe& rc) {
  SimConfig cfg;
  cfg.fps = rc.fps;
  cfg.scene.width = rc.w_max;
  cfg.scene.height = rc.height;
  cfg.scene.seed = rc.seed;
  cfg.camera_delay_frames = rc.camera_delay_frames;
  cfg.duration_frames = rc.frames + 2;
  cfg.seed = rc.seed;
  cfg.record_capture = false;

  const std::uint32_t w = rc.attacker_width.value_or(rc.w_max);
  AttackPlan plan;
  plan.kind = AttackKind::FullFrame;
  plan.start_frame = 1;
  plan.duration_frames = rc.frames;
  plan.injected_width = w;
  plan.payload = PixelBuffer(w, rc.height, std::uint8_t{128});
  plan.payload_source = "flat_grey";
  DefensePlan def{key_from_seed(rc.seed), rc.bits, rc.d_max};

  const SessionResult s = run_session(cfg, plan, def);
  AttackMonteCarlo out;
  out.recipe = rc;
  out.closed_form = p_detection(rc.bits, rc.d_max);
  std::vector<bool> det;
  for (const auto& f : s.frames) {
    if (f.source != Link::AttackerToAdas) continue;
    const bool d = f.width_verdict && !f.width_verdict->valid();
    det.push_back(d);
  }
  out.attack_frames = det.size();
  out.detected = static_cast<std::uint64_t>(std::count(det.begin(), det.end(), true));
  out.detection_rate = det.empty() ? 0.0 : static_cast<double>(out.detected) / static_cast<double>(det.size());
  out.run_histogram = undetected_runs(det);
  std::uint64_t runs = 0, best = 0;
  for (const auto& [len, n] : out.run_histogram) {
    runs += n;
    out.max_run = std::max(out.max_run, len);
    if (n > best) {
      best = n;
      out.mode_run = len;
    }
  }
  out.max_run_seconds = static_cast<double>(out.max_run) / rc.fps;
  if (runs) out.max_run_share = static_cast<double>(out.run_histogram[out.max_run]) / static_cast<double>(runs);
  return out;
}

// ---------------------------------------------------------------------------
// DET curves

struct DetPoint {
  double false_positive_rate = 0.0;
  double false_negative_rate = 0.0;
  double threshold = 0.0;
};

struct DetCurve {
  std::vector<DetPoint> points;
};

// flag_below: the detector alerts when score < threshold (MSE); otherwise when score > threshold.
inline DetCurve det_curve(const std::vector<double>& normal, const std::vector<double>& attack,
                          std::vector<double> thresholds, bool flag_below) {
  if (normal.empty() || attack.empty()) throw EmptyResultError("det_curve needs normal and attack scores");
  std::sort(thresholds.begin(), thresholds.end());
  auto flagged = [&](double s, double t) { return flag_below ? s < t : s > t; };
  DetCurve c;
  for (double t : thresholds) {
    std::size_t fp = 0, fn = 0;
    for (double s : normal) fp += flagged(s, t);
    for (double s : attack) fn += !flagged(s, t);
    c.points.push_back({static_cast<double>(fp) / static_cast<double>(normal.size()),
                        static_cast<double>(fn) / static_cast<double>(attack.size()), t});
  }
  return c;
}

// Score sets for the video detectors: consecutive real frames (normal)
// against a real frame followed by a fabricated one (attack). For MSE the
// attack pair is two fabricated frames, the loop the attacker replays.
struct DetScores {
  std::vector<double> normal;
  std::vector<double> attack;
};

struct DetExperiment {
  DetScores mse;
  DetScores histogram;
  DetScores flow;  // median residual; a failed match scores 255
};

inline DetExperiment det_experiment(std::uint64_t trials, std::uint64_t seed, std::uint32_t width = 256,
                                    std::uint32_t height = 128) {
  DetectorConfig cfg = DetectorConfig::for_stream(width, height, 20.0);
  std::mt19937_64 rng(seed);
  const std::array<SignTemplate, 2> templates = {make_stop_sign(40), make_red_light(20, 44)};
  auto flow_score = [&](const RgbImage& cur, const RgbImage& prev) {
    const FlowResult f = optical_flow(to_gray(cur), to_gray(prev), cfg);
    if (f.abstained) return 0.0;
    return f.matched_fraction < cfg.flow_min_match_fraction ? 255.0 : f.median_error;
  };
  DetExperiment out;
  for (std::uint64_t t = 0; t < trials; ++t) {
    SceneConfig scene;
    scene.seed = rng();
    scene.width = width;
    scene.height = height;
    const std::uint64_t k = rng() % 1000;
    const PixelBuffer a = synth_frame(scene, k);
    const PixelBuffer b = synth_frame(scene, k + 1);
    const SignTemplate& tpl = templates[rng() % 2];
    const PixelBuffer fake = compose_injection(width, height, tpl, ((height - tpl.height()) / 2) & ~1u,
                                               ((width - tpl.width()) / 2) & ~1u, Backdrop::Plain);
    const RgbImage ra = demosaic(a), rb = demosaic(b), rf = demosaic(fake);
    out.mse.normal.push_back(frame_mse(b, a));
    out.mse.attack.push_back(frame_mse(fake, fake));
    out.histogram.normal.push_back(histogram_score(rb, ra, cfg));
    out.histogram.attack.push_back(histogram_score(rf, ra, cfg));
    out.flow.normal.push_back(flow_score(rb, ra));
    out.flow.attack.push_back(flow_score(rf, ra));
  }
  return out;
}

inline std::vector<double> threshold_grid(double lo, double hi, double step) {
  std::vector<double> v;
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
  for (std::size_t i = 0; i <= n; ++i) v.push_back(lo + step * static_cast<double>(i));
  return v;
}

// ---------------------------------------------------------------------------
// Distortion protection

struct ProtectionRecipe {
  unsigned bits = 2;
  std::uint64_t trials = 500;        // injections per (kind, width difference)
  std::uint32_t w_max = 128;
  std::uint32_t height = 64;
  std::uint32_t stripe_rows = 48;
  std::uint32_t stop_size = 40;
  std::uint32_t light_width = 20;
  std::uint32_t light_height = 44;
  std::uint64_t seed = 1;
  bool stripe = true;
  bool patch = true;
};

struct ProtectionBucket {
  AttackKind kind = AttackKind::Stripe;
  int width_difference = 0;  // width the injection was laid out at minus the received width
  std::uint64_t injections = 0;
  std::uint64_t recognized = 0;
  double recognition_rate() const { return injections ? static_cast<double>(recognized) / injections : 0.0; }
  double defense_rate() const { return injections ? 1.0 - recognition_rate() : 0.0; }
};

struct ProtectionReport {
  ProtectionRecipe recipe;
  std::vector<ProtectionBucket> buckets;
  double stripe_total_defense = 0.0;  // with the received width drawn uniformly from the schedule
  double patch_total_defense = 0.0;   // with both widths drawn independently
  double closed_form = 0.0;
};

namespace detail {

// Overwrites the first rows of `frame` with `stripe_bytes` re-sliced at the
// frame's width, then scores the template over the stripe region.
inline double score_injection(const PixelBuffer& frame, std::span<const std::uint8_t> stripe_bytes,
                              std::uint32_t src_width, const SignTemplate& tpl) {
  PixelBuffer received = frame;
  const PixelBuffer sliced = reinterpret_width(stripe_bytes, src_width, frame.width());
  const std::uint32_t rows = std::min(sliced.height(), frame.height());
  std::copy_n(sliced.bytes().begin(), std::size_t{rows} * frame.width(), received.bytes().begin());
  // Only the rows that can hold the sign matter; skip demosaicing the rest.
  const std::uint32_t keep = std::min(frame.height(), (rows + tpl.height() + 2) & ~1u);
  const RgbImage rgb = demosaic(received.rows(0, keep));
  SignSearch search;
  search.row_begin = 0;
  search.row_end = rows;
  return toy_sign_detect(rgb, tpl, search);
}

}  // namespace detail

inline ProtectionReport protection_eval(const ProtectionRecipe& rc) {
  if (rc.bits < 1 || rc.bits > 8) throw ConfigError("protection_eval: bits must be in [1, 8]");
  if (rc.stripe_rows % 2 || rc.stripe_rows > rc.height) throw ConfigError("protection_eval: bad stripe_rows");
  const unsigned symbols = 1u << rc.bits;
  const std::uint32_t w_min = rc.w_max - 2 * (symbols - 1);
  const std::array<SignTemplate, 2> templates = {make_stop_sign(rc.stop_size),
                                                 make_red_light(rc.light_width, rc.light_height)};
  for (const auto& t : templates)
    if (t.height() > rc.stripe_rows || t.width() > w_min) throw ConfigError("protection_eval: template does not fit");

  ProtectionReport rep;
  rep.recipe = rc;
  rep.closed_form = p_protection(rc.bits);
  std::mt19937_64 rng(rc.seed);
  auto pick = [&](std::uint64_t n) { return static_cast<std::uint32_t>(rng() % n); };
  auto even_below = [&](std::uint32_t n) { return 2 * pick(n / 2 + 1); };  // even value in [0, n]

  auto scene_for = [&](std::uint64_t trial_seed) {
    SceneConfig s;
    s.seed = trial_seed;
    s.width = rc.w_max;
    s.height = rc.height;
    return s;
  };

  const int max_diff = 2 * static_cast<int>(symbols - 1);
  if (rc.stripe) {
    // The attacker lays the stripe out at w_max; the received width is w_max - d.
    for (int d = 0; d <= max_diff; d += 2) {
      ProtectionBucket bucket{AttackKind::Stripe, d, 0, 0};
      const std::uint32_t w_cur = rc.w_max - static_cast<std::uint32_t>(d);
      for (std::uint64_t t = 0; t < rc.trials; ++t) {
        const SignTemplate& tpl = templates[pick(2)];
        const SceneConfig scene = scene_for(rng());
        const std::uint64_t when = pick(1000);
        const PixelBuffer frame = synth_frame(scene, when).crop_columns(w_cur);
        const std::uint32_t row = even_below(rc.stripe_rows - tpl.height());
        const std::uint32_t col = even_below(w_min - tpl.width());
        const PixelBuffer injected = compose_injection(rc.w_max, rc.stripe_rows, tpl, row, col, Backdrop::Scene, rng());
        const double score = detail::score_injection(frame, injected.bytes(), rc.w_max, tpl);
        ++bucket.injections;
        bucket.recognized += score >= kSignThreshold;
      }
      rep.buckets.push_back(bucket);
    }
    double total = 0.0;
    for (const auto& b : rep.buckets)
      if (b.kind == AttackKind::Stripe) total += b.defense_rate() / symbols;
    rep.stripe_total_defense = total;
  }
  if (rc.patch) {
    // The stripe comes from the previous frame at w_prev; the received width is w_cur.
    for (int d = -max_diff; d <= max_diff; d += 2) {
      ProtectionBucket bucket{AttackKind::Patch, d, 0, 0};
      std::vector<std::pair<unsigned, unsigned>> pairs;  // (k_prev, k_cur)
      for (unsigned kp = 0; kp < symbols; ++kp)
        for (unsigned kc = 0; kc < symbols; ++kc)
          if (2 * (static_cast<int>(kc) - static_cast<int>(kp)) == d) pairs.emplace_back(kp, kc);
      for (std::uint64_t t = 0; t < rc.trials; ++t) {
        const auto [kp, kc] = pairs[pick(pairs.size())];
        const std::uint32_t w_prev = rc.w_max - 2 * kp;
        const std::uint32_t w_cur = rc.w_max - 2 * kc;
        const SignTemplate& tpl = templates[pick(2)];
        const SceneConfig scene = scene_for(rng());
        const std::uint64_t when = pick(1000);
        PixelBuffer prev = synth_frame(scene, when).crop_columns(w_prev);
        const PixelBuffer cur = synth_frame(scene, when + 1).crop_columns(w_cur);
        const std::uint32_t row = even_below(rc.stripe_rows - tpl.height());
        const std::uint32_t col = even_below(w_min - tpl.width());
        mosaic_into(prev, tpl.image, row, col);
        const auto stripe = std::span<const std::uint8_t>(prev.bytes()).first(std::size_t{rc.stripe_rows} * w_prev);
        const double score = detail::score_injection(cur, stripe, w_prev, tpl);
        ++bucket.injections;
        bucket.recognized += score >= kSignThreshold;
      }
      rep.buckets.push_back(bucket);
    }
    double total = 0.0;
    for (const auto& b : rep.buckets) {
      if (b.kind != AttackKind::Patch) continue;
      const double pairs = symbols - std::abs(b.width_difference) / 2;
      total += b.defense_rate() * pairs / (static_cast<double>(symbols) * symbols);
    }
    rep.patch_total_defense = total;
  }
  return rep;
}

}  // namespace camspoof
