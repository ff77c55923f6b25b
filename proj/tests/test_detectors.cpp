#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "camspoof/detectors.hpp"
#include "camspoof/scene.hpp"
#include "camspoof/sim.hpp"
#include "support/sim_helpers.hpp"

using namespace camspoof;

namespace {

DetectorConfig cfg1936() { return DetectorConfig::for_stream(1936, 1216, 20.0); }

LeaderPacket leader(std::uint64_t id, std::uint64_t ts, std::uint32_t w = 1936, std::uint32_t fmt = 1) {
  return LeaderPacket{id, w, 1216, fmt, ts};
}

// Blurred bright squares on a grid, shifted by (dx, dy).
GrayImage corner_grid(std::uint32_t w, std::uint32_t h, double dx, double dy) {
  GrayImage g{w, h, std::vector<float>(std::size_t{w} * h)};
  auto sharp = [&](double x, double y) {
    const double gx = std::fmod(x - dx + 1600.0, 16.0), gy = std::fmod(y - dy + 1600.0, 16.0);
    return (gx >= 4 && gx < 12 && gy >= 4 && gy < 12) ? 200.0 : 40.0;
  };
  for (std::uint32_t r = 0; r < h; ++r)
    for (std::uint32_t c = 0; c < w; ++c) {
      // 5x5 supersampled box filter keeps edges smooth enough for sub-pixel tracking.
      double acc = 0;
      for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 2; ++b) acc += sharp(c + b * 0.5, r + a * 0.5);
      g.px[std::size_t{r} * w + c] = static_cast<float>(acc / 25.0);
    }
  return g;
}

double scalar_bhattacharyya(const std::vector<double>& h1, const std::vector<double>& h2) {
  const double n = static_cast<double>(h1.size());
  double m1 = 0, m2 = 0, s = 0;
  for (std::size_t i = 0; i < h1.size(); ++i) {
    m1 += h1[i] / n;
    m2 += h2[i] / n;
    s += std::sqrt(h1[i] * h2[i]);
  }
  return std::sqrt(1.0 - s / std::sqrt(m1 * m2 * n * n));
}

}  // namespace

TEST(ConstantMeta, Checks) {
  const auto cfg = cfg1936();
  EXPECT_FALSE(constant_meta_check(leader(1, 0), cfg));
  EXPECT_TRUE(constant_meta_check(leader(1, 0, 1934), cfg));
  EXPECT_TRUE(constant_meta_check(leader(1, 0, 1936, 2), cfg));
}

TEST(FrameId, Window) {
  const auto cfg = cfg1936();
  const auto p = leader(5, 0);
  EXPECT_FALSE(frame_id_check(leader(6, 0), &p, cfg));
  EXPECT_TRUE(frame_id_check(leader(5, 0), &p, cfg));
  EXPECT_FALSE(frame_id_check(leader(8, 0), &p, cfg));
  EXPECT_TRUE(frame_id_check(leader(9, 0), &p, cfg));
  EXPECT_TRUE(frame_id_check(leader(1, 0), &p, cfg));
  EXPECT_FALSE(frame_id_check(leader(1, 0), nullptr, cfg));
}

TEST(Timestamp, GapScaled) {
  const auto cfg = cfg1936();
  const std::uint64_t T = cfg.period_ns;
  const auto p = leader(5, 10 * T);
  EXPECT_FALSE(timestamp_check(leader(6, 11 * T), &p, cfg));
  EXPECT_FALSE(timestamp_check(leader(7, 12 * T), &p, cfg));
  EXPECT_TRUE(timestamp_check(leader(6, 10 * T), &p, cfg));
  EXPECT_TRUE(timestamp_check(leader(6, 12 * T), &p, cfg));
  EXPECT_FALSE(timestamp_check(leader(6, 0), nullptr, cfg));
}

TEST(TimestampRate, AgainstExternalClock) {
  const auto cfg = cfg1936();
  const std::uint64_t T = cfg.period_ns;
  const auto p = leader(5, 10 * T);
  const auto cur = leader(6, 11 * T);
  EXPECT_FALSE(timestamp_rate_check(cur, &p, static_cast<std::int64_t>(T), cfg));
  // Nominal leader timestamps, frames arriving twice as fast.
  EXPECT_TRUE(timestamp_rate_check(cur, &p, static_cast<std::int64_t>(T / 2), cfg));
  EXPECT_FALSE(timestamp_rate_check(cur, nullptr, static_cast<std::int64_t>(T / 2), cfg));
  EXPECT_FALSE(timestamp_rate_check(cur, &p, std::nullopt, cfg));
}

TEST(Mse, Examples) {
  DetectorConfig cfg = cfg1936();
  const PixelBuffer a(8, 8, std::uint8_t{0}), b(8, 8, std::uint8_t{16});
  EXPECT_EQ(frame_mse(a, a), 0.0);
  EXPECT_TRUE(mse_check(a, a, cfg));
  cfg.mse_threshold = 100;
  EXPECT_EQ(frame_mse(a, b), 256.0);
  EXPECT_FALSE(mse_check(a, b, cfg));
}

TEST(Mse, UniformRandomFrames) {
  std::mt19937_64 rng(8);
  Bytes x(512 * 512), y(512 * 512);
  for (auto& v : x) v = static_cast<std::uint8_t>(rng());
  for (auto& v : y) v = static_cast<std::uint8_t>(rng());
  // E[(A - B)^2] = 2 Var(U{0..255}) = (256^2 - 1) / 6.
  const double expect = (256.0 * 256.0 - 1.0) / 6.0;
  EXPECT_NEAR(expect, 10922.5, 1e-12);
  const double got = frame_mse(PixelBuffer(512, 512, x), PixelBuffer(512, 512, y));
  EXPECT_NEAR(got, expect, 100.0);
}

TEST(Mse, ScalarOracleAndSymmetry) {
  std::mt19937_64 rng(9);
  Bytes x(6 * 4), y(6 * 4);
  for (auto& v : x) v = static_cast<std::uint8_t>(rng());
  for (auto& v : y) v = static_cast<std::uint8_t>(rng());
  double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (double(x[i]) - double(y[i])) * (double(x[i]) - double(y[i]));
  const PixelBuffer a(6, 4, x), b(6, 4, y);
  EXPECT_NEAR(frame_mse(a, b), acc / 24.0, 1e-12);
  EXPECT_EQ(frame_mse(a, b), frame_mse(b, a));
}

TEST(Histogram, HandBuiltTwoBin) {
  const Histogram2D a(std::vector<double>{3, 1}), b(std::vector<double>{1, 3});
  const double expect = std::sqrt(1.0 - std::sqrt(3.0) / 2.0);
  EXPECT_NEAR(bhattacharyya_distance(a, b), expect, 1e-12);
  EXPECT_NEAR(bhattacharyya_distance(a, b), scalar_bhattacharyya({3, 1}, {1, 3}), 1e-12);
  EXPECT_EQ(bhattacharyya_distance(a, b), bhattacharyya_distance(b, a));
}

TEST(Histogram, Extremes) {
  const Histogram2D a(std::vector<double>{5, 0, 2}), b(std::vector<double>{0, 4, 0});
  EXPECT_EQ(bhattacharyya_distance(a, a), 0.0);
  EXPECT_NEAR(bhattacharyya_distance(a, b), 1.0, 1e-12);
  const Histogram2D c(std::vector<double>{10, 0, 4});
  EXPECT_EQ(bhattacharyya_distance(a, c), 0.0);
}

TEST(Histogram, RandomAgainstScalarOracle) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> h1(3000), h2(3000);
    for (auto& v : h1) v = static_cast<double>(rng() % 50);
    for (auto& v : h2) v = static_cast<double>(rng() % 50);
    const double d = bhattacharyya_distance(Histogram2D(h1), Histogram2D(h2));
    EXPECT_NEAR(d, scalar_bhattacharyya(h1, h2), 1e-12);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
}

TEST(Histogram, ImageLevel) {
  const auto cfg = cfg1936();
  const RgbImage red(16, 16, Rgb{220, 10, 10}), blue(16, 16, Rgb{10, 10, 220});
  EXPECT_FALSE(histogram_check(red, red, cfg));
  EXPECT_TRUE(histogram_check(red, blue, cfg));
  EXPECT_NEAR(histogram_score(red, blue, cfg), 1.0, 1e-12);
  const auto hist = hs_histogram(red);
  EXPECT_EQ(hist.size(), 50u * 60u);
  EXPECT_EQ(hist.total(), 256.0);
}

TEST(Hsv, Conversion) {
  const auto r = to_hsv(Rgb{255, 0, 0});
  EXPECT_NEAR(r.h, 0.0, 1e-12);
  EXPECT_NEAR(r.s, 1.0, 1e-12);
  EXPECT_NEAR(to_hsv(Rgb{0, 255, 0}).h, 120.0, 1e-12);
  EXPECT_NEAR(to_hsv(Rgb{0, 0, 255}).h, 240.0, 1e-12);
  EXPECT_NEAR(to_hsv(Rgb{255, 0, 255}).h, 300.0, 1e-12);
  EXPECT_EQ(to_hsv(Rgb{90, 90, 90}).s, 0.0);
}

TEST(Flow, RecoversTwoPixelTranslation) {
  const GrayImage prev = corner_grid(160, 120, 0, 0), cur = corner_grid(160, 120, 2, 0);
  const auto corners = shi_tomasi(prev);
  ASSERT_GE(corners.size(), 20u);
  const auto tracks = track_features(prev, cur, corners);
  std::vector<double> ex, ey;
  for (const auto& t : tracks)
    if (t.ok) {
      ex.push_back(t.to.x - t.from.x);
      ey.push_back(t.to.y - t.from.y);
    }
  ASSERT_GE(ex.size(), corners.size() / 2);
  EXPECT_NEAR(median(ex), 2.0, 0.25);
  EXPECT_NEAR(median(ey), 0.0, 0.25);
}

TEST(Flow, SelfMatchNeverAlerts) {
  const auto cfg = cfg1936();
  SceneConfig s;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    s.seed = seed;
    const auto img = render_scene(s, 0);
    const auto r = optical_flow(to_gray(img), to_gray(img), cfg);
    EXPECT_FALSE(r.abstained);
    EXPECT_NEAR(r.matched_fraction, 1.0, 1e-12);
    EXPECT_LT(r.median_error, 1e-3);
    EXPECT_FALSE(optical_flow_check(img, img, cfg));
  }
}

TEST(Flow, UnrelatedImageAlerts) {
  const auto cfg = cfg1936();
  SceneConfig a, b;
  a.seed = 1;
  b.seed = 99;
  EXPECT_TRUE(optical_flow_check(render_scene(b, 0), render_scene(a, 0), cfg));
}

TEST(Flow, LowTextureAbstains) {
  const auto cfg = cfg1936();
  const RgbImage flat(64, 64, Rgb{80, 80, 80});
  const auto r = optical_flow(to_gray(flat), to_gray(flat), cfg);
  EXPECT_TRUE(r.abstained);
  EXPECT_FALSE(flow_alert(r, cfg));
}

TEST(RunDetectors, CleanRunQuiet) {
  SimConfig cfg = test_support::small_sim(10, 256, 128, 1024);
  const auto s = run_session(cfg, std::nullopt, std::nullopt);
  const auto v = run_detectors(observed_frames(s.frames), DetectorConfig::for_stream(256, 128, 20.0));
  ASSERT_EQ(v.size(), 10u);
  for (const auto& x : v) EXPECT_FALSE(x.combined) << x.frame_index;
}

TEST(RunDetectors, FirstFrameAllFalse) {
  SimConfig cfg = test_support::small_sim(2, 256, 128, 1024);
  const auto s = run_session(cfg, std::nullopt, std::nullopt);
  // Expectations that would fail every check if the first frame were tested.
  DetectorConfig dc = DetectorConfig::for_stream(1000, 1000, 20.0);
  const auto v = run_detectors(observed_frames(s.frames), dc);
  EXPECT_FALSE(v[0].combined);
  EXPECT_TRUE(v[1].constant_meta);
}

TEST(RunDetectors, VerdictDependsOnlyOnPair) {
  SimConfig cfg = test_support::small_sim(6, 256, 128, 1024);
  const auto s = run_session(cfg, std::nullopt, std::nullopt);
  auto frames = observed_frames(s.frames);
  const auto dc = DetectorConfig::for_stream(256, 128, 20.0);
  const auto base = run_detectors(frames, dc);
  std::swap(frames[0], frames[1]);  // far from the pair (4, 5)
  const auto perm = run_detectors(frames, dc);
  EXPECT_EQ(base[5].combined, perm[5].combined);
  EXPECT_EQ(base[5].scores.mse, perm[5].scores.mse);
  EXPECT_EQ(base[5].scores.histogram, perm[5].scores.histogram);
  EXPECT_EQ(base[5].scores.flow_median_error, perm[5].scores.flow_median_error);
}

TEST(RunDetectors, CsvHasOneRowPerFrame) {
  SimConfig cfg = test_support::small_sim(3, 256, 128, 1024);
  const auto s = run_session(cfg, std::nullopt, std::nullopt);
  const auto csv = verdict_csv(run_detectors(observed_frames(s.frames), DetectorConfig::for_stream(256, 128, 20.0)), "hello");
  EXPECT_EQ(csv.rfind("# hello\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 1 + 3);
}
