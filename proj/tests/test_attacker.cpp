#include <gtest/gtest.h>

#include <random>

#include "camspoof/attacker.hpp"
#include "camspoof/sign_detect.hpp"
#include "camspoof/sim.hpp"
#include "support/sim_helpers.hpp"

using namespace camspoof;
using namespace camspoof::test_support;

namespace {

AttackPlan full_frame(MetadataPolicy policy, std::uint64_t start, std::uint64_t dur) {
  AttackPlan p;
  p.kind = AttackKind::FullFrame;
  p.start_frame = start;
  p.duration_frames = dur;
  p.injected_width = 64;
  p.payload = PixelBuffer(64, 32, std::uint8_t{120});
  p.metadata_policy = policy;
  return p;
}

AttackPlan stripe(SignTemplate tpl, std::uint32_t width, std::uint32_t rows) {
  AttackPlan p;
  p.kind = AttackKind::Stripe;
  p.payload = std::move(tpl);
  p.injected_width = width;
  p.stripe_rows = rows;
  p.duration_frames = 1;
  return p;
}

AttackPlan patch(SignTemplate tpl, std::uint32_t rows, std::uint32_t row, std::uint32_t col) {
  AttackPlan p;
  p.kind = AttackKind::Patch;
  p.payload = std::move(tpl);
  p.stripe_rows = rows;
  p.patch_row = row;
  p.patch_col = col;
  p.duration_frames = 1;
  return p;
}

AttackerView view_of(const PixelBuffer& prev, std::uint64_t block_id, std::uint64_t arrival) {
  AttackerView v;
  v.last_seen_leader = LeaderPacket{block_id, prev.width(), prev.height(), 1, arrival};
  v.last_frame = prev;
  v.last_leader_arrival_ns = arrival;
  return v;
}

// Receiver-side result of racing the forged packets against the camera's frame.
PixelBuffer race(const PixelBuffer& camera, std::uint64_t block_id, const AttackOutput& forged,
                 std::uint32_t max_payload) {
  const auto cam = fragment_frame(camera, block_id, 0, max_payload);
  std::vector<StreamPacket> seq{cam.front()};
  for (const auto& s : forged.packets) seq.push_back(s.packet);
  seq.insert(seq.end(), cam.begin() + 1, cam.end());
  const auto res = reassemble(seq, std::nullopt, max_payload);
  EXPECT_EQ(res.overwritten_packet_ids.size(), forged.packets.size());
  return res.buffer;
}

SignMatch stripe_match(const PixelBuffer& frame, const SignTemplate& tpl, std::uint32_t rows) {
  SignSearch s;
  s.row_begin = 0;
  s.row_end = rows;
  return find_sign(demosaic(frame.rows(0, rows)), tpl, s);
}

}  // namespace

TEST(FullFrame, StaticPolicyIdsStartAtOne) {
  const auto s = run_session(small_sim(20), full_frame(MetadataPolicy::Static, 8, 5), std::nullopt);
  const auto fake = leaders_of(s.frames, Link::AttackerToAdas);
  ASSERT_EQ(fake.size(), 5u);
  for (std::size_t i = 0; i < fake.size(); ++i) {
    EXPECT_EQ(fake[i].block_id, 1 + i);
    EXPECT_EQ(fake[i].timestamp_ns, i * 50'000'000u);
  }
}

TEST(FullFrame, SniffPolicyContinuesIds) {
  const auto s = run_session(small_sim(20), full_frame(MetadataPolicy::SniffAdaptive, 8, 5), std::nullopt);
  const auto fake = leaders_of(s.frames, Link::AttackerToAdas);
  ASSERT_EQ(fake.size(), 5u);
  // Slot 7's frame (block 8) is complete before the hook fires at slot 8 - period/4.
  for (std::size_t i = 0; i < fake.size(); ++i) EXPECT_EQ(fake[i].block_id, 9 + i);
  // The camera resumes with its own counter.
  const auto cam = leaders_of(s.frames, Link::CameraToAdas);
  EXPECT_EQ(cam[8].block_id, 9u);
}

TEST(FullFrame, SniffedTimestampsOptional) {
  auto plan = full_frame(MetadataPolicy::SniffAdaptive, 4, 3);
  plan.sniff_timestamps = true;
  const auto s = run_session(small_sim(10), plan, std::nullopt);
  const auto fake = leaders_of(s.frames, Link::AttackerToAdas);
  ASSERT_EQ(fake.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(fake[i].timestamp_ns, (5 + i) * 50'000'000u);
}

TEST(FullFrame, ZeroDurationOnlyAddsStopStart) {
  const SimConfig cfg = small_sim(10);
  const auto clean = run_session(cfg, std::nullopt, std::nullopt);
  const auto empty = run_session(cfg, full_frame(MetadataPolicy::Static, 4, 0), std::nullopt);
  std::vector<CaptureRecord> rest;
  std::vector<GvcpCommand> gvcp;
  for (const auto& r : empty.capture.records) {
    if (r.link == Link::AttackerToCamera) gvcp.push_back(std::get<GvcpCommand>(decode_packet(r.bytes)));
    else rest.push_back(r);
  }
  EXPECT_EQ(rest, clean.capture.records);
  ASSERT_EQ(gvcp.size(), 2u);
  EXPECT_EQ(gvcp[0], acquisition_command(false));
  EXPECT_EQ(gvcp[1], acquisition_command(true));
}

TEST(FullFrame, RateMultiplierCompressesSchedule) {
  auto plan = full_frame(MetadataPolicy::Static, 2, 4);
  plan.rate_multiplier = 2.0;
  const StreamTiming t{50'000'000, 1000, 256};
  const auto out = full_frame_attack(plan, {}, 150'000'000, t);
  std::vector<std::uint64_t> leader_times;
  for (const auto& p : out.packets)
    if (std::holds_alternative<LeaderPacket>(p.packet)) leader_times.push_back(p.time_ns);
  ASSERT_EQ(leader_times.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(leader_times[i], 150'000'000u + i * 25'000'000u);
}

TEST(Stripe, FullWidthStopSignRecognized) {
  // 136 rows of a 1936-wide frame (135 rounded up to the Bayer tile).
  SimConfig cfg = small_sim(3, 1936, 256, 8950);
  auto plan = stripe(make_stop_sign(128), 1936, 136);
  plan.start_frame = 1;
  const auto s = run_session(cfg, plan, std::nullopt);
  ASSERT_EQ(s.frames.size(), 3u);
  EXPECT_EQ(s.frames[1].source, Link::CameraToAdas);
  EXPECT_GT(s.frames[1].injected_payloads, 0u);
  EXPECT_TRUE(s.frames[1].attacked());
  EXPECT_FALSE(s.frames[0].attacked());
  const auto tpl = make_stop_sign(128);
  EXPECT_TRUE(stripe_match(s.frames[1].reassembly.buffer, tpl, 136).recognized());
  EXPECT_FALSE(stripe_match(s.frames[0].reassembly.buffer, tpl, 136).recognized());
}

TEST(Stripe, RedLightNeedsFewerRows) {
  SimConfig cfg = small_sim(3, 1936, 256, 8950);
  auto plan = stripe(make_red_light(32, 64), 1936, 66);
  plan.start_frame = 1;
  const auto s = run_session(cfg, plan, std::nullopt);
  EXPECT_TRUE(stripe_match(s.frames[1].reassembly.buffer, make_red_light(32, 64), 66).recognized());
}

TEST(Stripe, LeaderUntouched) {
  SimConfig cfg = small_sim(12, 256, 128, 1024);
  auto plan = stripe(make_stop_sign(40), 256, 48);
  plan.start_frame = 2;
  plan.duration_frames = 8;
  const auto s = run_session(cfg, plan, DefensePlan{{1, 2, 3, 4}, 2, 1});
  for (const auto& f : s.frames) {
    EXPECT_EQ(f.source, Link::CameraToAdas);
    ASSERT_TRUE(f.width_verdict.has_value());
    EXPECT_TRUE(f.width_verdict->valid());
  }
  EXPECT_TRUE(records_on(s.capture, Link::AttackerToCamera).empty());
}

TEST(Stripe, WidthPlusTwoDefeatsRecognition) {
  // The camera streams at W while the attacker forges content laid out at W + 2.
  const std::uint32_t w = 254, h = 128, mp = 1024;
  int unrecognized = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto tpl = make_stop_sign(32 + 2 * static_cast<std::uint32_t>(trial % 9));
    SceneConfig sc;
    sc.seed = 100 + static_cast<std::uint64_t>(trial);
    sc.width = w;
    sc.height = h;
    const PixelBuffer prev = synth_frame(sc, 0), cur = synth_frame(sc, 1);
    auto plan = stripe(tpl, w + 2, 48);
    const auto forged = stripe_attack(plan, view_of(prev, 7, 0), StreamTiming{50'000'000, 1000, mp});
    unrecognized += !stripe_match(race(cur, 8, forged, mp), tpl, 48).recognized();
  }
  EXPECT_GE(unrecognized, 95);
}

TEST(Stripe, MatchingWidthRecognizedInRace) {
  const std::uint32_t w = 256, mp = 1024;
  SceneConfig sc;
  sc.width = w;
  const auto tpl = make_stop_sign(40);
  const auto forged = stripe_attack(stripe(tpl, w, 48), view_of(synth_frame(sc, 0), 7, 0), StreamTiming{50'000'000, 1000, mp});
  EXPECT_TRUE(stripe_match(race(synth_frame(sc, 1), 8, forged, mp), tpl, 48).recognized());
}

TEST(Patch, EqualWidthsRecognizedAndStealthy) {
  const std::uint32_t mp = 1024;
  SceneConfig sc;
  sc.motion_dx = 0;
  const auto tpl = make_stop_sign(40);
  const PixelBuffer prev = synth_frame(sc, 0);
  const auto forged = patch_attack(patch(tpl, 48, 4, 160), view_of(prev, 3, 0), StreamTiming{50'000'000, 1000, mp});
  const PixelBuffer got = race(synth_frame(sc, 1), 4, forged, mp);
  EXPECT_TRUE(stripe_match(got, tpl, 48).recognized());
  // Outside the patch the stripe is the previous frame's background.
  std::size_t differing = 0;
  for (std::uint32_t r = 0; r < 48; ++r)
    for (std::uint32_t c = 0; c < 256; ++c) {
      const bool in_patch = r >= 4 && r < 44 && c >= 160 && c < 200;
      if (!in_patch) differing += got.at(r, c) != prev.at(r, c);
    }
  EXPECT_EQ(differing, 0u);
}

TEST(Patch, WidthDifferenceTwoEitherSignDefeatsRecognition) {
  const std::uint32_t mp = 1024;
  const auto tpl = make_stop_sign(40);
  int unrecognized_plus = 0, unrecognized_minus = 0;
  for (int trial = 0; trial < 40; ++trial) {
    SceneConfig wide, narrow;
    wide.seed = narrow.seed = 500 + static_cast<std::uint64_t>(trial);
    wide.width = 256;
    narrow.width = 254;
    const auto plan = patch(tpl, 48, 4, 2 * static_cast<std::uint32_t>(10 + trial));
    // +2: previous frame at 256, current at 254.
    const auto fp = patch_attack(plan, view_of(synth_frame(wide, 0), 3, 0), StreamTiming{50'000'000, 1000, mp});
    unrecognized_plus += !stripe_match(race(synth_frame(narrow, 1), 4, fp, mp), tpl, 48).recognized();
    // -2: previous frame at 254, current at 256.
    const auto fm = patch_attack(plan, view_of(synth_frame(narrow, 0), 3, 0), StreamTiming{50'000'000, 1000, mp});
    unrecognized_minus += !stripe_match(race(synth_frame(wide, 1), 4, fm, mp), tpl, 48).recognized();
  }
  EXPECT_GE(unrecognized_plus, 38);
  EXPECT_GE(unrecognized_minus, 38);
}

TEST(Patch, SkewDirectionOppositeForOppositeSign) {
  // A single bright column in the previous frame drifts right when the
  // current frame is narrower and left when it is wider.
  const std::uint32_t mp = 1024;
  auto column_frame = [](std::uint32_t w) {
    PixelBuffer b(w, 64, std::uint8_t{0});
    for (std::uint32_t r = 0; r < 64; ++r) b.at(r, 100) = 255;
    return b;
  };
  const auto plan = patch(make_stop_sign(16), 48, 30, 0);
  auto marker = [](const PixelBuffer& p, std::uint32_t r) {
    for (std::uint32_t c = 0; c < p.width(); ++c)
      if (p.at(r, c) == 255) return static_cast<int>(c);
    return -1;
  };
  const auto plus = race(PixelBuffer(254, 64, std::uint8_t{0}), 4,
                         patch_attack(plan, view_of(column_frame(256), 3, 0), StreamTiming{50'000'000, 1000, mp}), mp);
  const auto minus = race(PixelBuffer(258, 64, std::uint8_t{0}), 4,
                          patch_attack(plan, view_of(column_frame(256), 3, 0), StreamTiming{50'000'000, 1000, mp}), mp);
  EXPECT_EQ(marker(plus, 10), 100 + 20);
  EXPECT_EQ(marker(minus, 10), 100 - 20);
}

TEST(Patch, FrameGapTargetsPredictedBlock) {
  const StreamTiming t{50'000'000, 1000, 1024};
  SceneConfig sc;
  const PixelBuffer prev = synth_frame(sc, 0);
  const auto plan = patch(make_stop_sign(40), 48, 4, 160);
  const auto out = patch_attack(plan, view_of(prev, 10, 1'000'000), t, 12);
  ASSERT_FALSE(out.packets.empty());
  for (const auto& s : out.packets) {
    const auto& p = std::get<PayloadPacket>(s.packet);
    EXPECT_EQ(p.block_id, 12u);
    EXPECT_EQ(s.time_ns, 1'000'000u + 2 * t.period_ns + p.packet_id * t.packet_spacing_ns - 1);
  }
  // Content still comes from the most recent frame seen.
  PixelBuffer expect = prev;
  mosaic_into(expect, make_stop_sign(40).image, 4, 160);
  const auto& first = std::get<PayloadPacket>(out.packets.front().packet);
  EXPECT_TRUE(std::equal(first.data.begin(), first.data.end(), expect.bytes().begin()));
}

TEST(Patch, NothingSniffedSkips) {
  const auto out = patch_attack(patch(make_stop_sign(40), 48, 4, 160), {}, StreamTiming{});
  EXPECT_TRUE(out.packets.empty());
  EXPECT_EQ(out.log.size(), 1u);
}

TEST(Attacker, OutputsDependOnlyOnView) {
  // The forged stripe bytes are the same whatever the defense is doing on the
  // control channel, including no defense at all.
  SimConfig cfg = small_sim(12, 256, 128, 1024);
  auto plan = stripe(make_stop_sign(40), 256, 48);
  plan.start_frame = 2;
  plan.duration_frames = 8;
  const auto none = run_session(cfg, plan, std::nullopt);
  const auto a = run_session(cfg, plan, DefensePlan{{1}, 2, 1});
  const auto b = run_session(cfg, plan, DefensePlan{{2}, 3, 1});
  const auto ref = records_on(none.capture, Link::AttackerToAdas);
  EXPECT_FALSE(ref.empty());
  EXPECT_EQ(records_on(a.capture, Link::AttackerToAdas), ref);
  EXPECT_EQ(records_on(b.capture, Link::AttackerToAdas), ref);
}

TEST(Attacker, TapNeverSeesInFlightFrame) {
  detail::AttackerTap tap(8);
  const auto ps = fragment_frame(PixelBuffer(4, 4, std::uint8_t{1}), 5, 0, 8);
  for (std::size_t i = 0; i + 1 < ps.size(); ++i) tap.observe(ps[i], i);
  EXPECT_FALSE(tap.view().last_seen_leader.has_value());
  EXPECT_FALSE(tap.view().last_frame.has_value());
  tap.observe(ps.back(), 10);
  ASSERT_TRUE(tap.view().last_seen_leader.has_value());
  EXPECT_EQ(tap.view().last_seen_leader->block_id, 5u);
}

TEST(Attacker, PlanValidation) {
  auto p = patch(make_stop_sign(40), 40, 4, 0);
  EXPECT_THROW(p.validate(), ConfigError);  // 4 + 40 rows exceed the stripe
  auto s = stripe(make_stop_sign(40), 255, 48);
  EXPECT_THROW(s.validate(), ConfigError);
  auto f = full_frame(MetadataPolicy::Static, 1, 1);
  f.injected_width = 62;
  EXPECT_THROW(f.validate(), ConfigError);
}
