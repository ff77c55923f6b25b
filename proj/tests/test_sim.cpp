#include <gtest/gtest.h>

#include "camspoof/defense.hpp"
#include "camspoof/sim.hpp"
#include "support/sim_helpers.hpp"

using namespace camspoof;
using namespace camspoof::test_support;

namespace {

AttackPlan full_frame_plan(std::uint64_t start, std::uint64_t dur, std::uint32_t w, std::uint32_t h) {
  AttackPlan p;
  p.kind = AttackKind::FullFrame;
  p.start_frame = start;
  p.duration_frames = dur;
  p.injected_width = w;
  p.payload = PixelBuffer(w, h, std::uint8_t{90});
  return p;
}

bool same_frames(const std::vector<FrameResult>& a, const std::vector<FrameResult>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].reassembly.buffer != b[i].reassembly.buffer || a[i].reassembly.leader != b[i].reassembly.leader ||
        a[i].reassembly.missing_packet_ids != b[i].reassembly.missing_packet_ids ||
        a[i].reassembly.overwritten_packet_ids != b[i].reassembly.overwritten_packet_ids ||
        a[i].source != b[i].source || a[i].arrival_ns != b[i].arrival_ns || a[i].width_verdict != b[i].width_verdict ||
        a[i].forwarded != b[i].forwarded || a[i].injected_payloads != b[i].injected_payloads)
      return false;
  }
  return true;
}

}  // namespace

TEST(Session, CleanRun) {
  const SimConfig cfg = small_sim(10);
  const auto s = run_session(cfg, std::nullopt, std::nullopt);
  ASSERT_EQ(s.frames.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& f = s.frames[i];
    EXPECT_TRUE(f.reassembly.complete());
    EXPECT_TRUE(f.reassembly.trailer_seen);
    EXPECT_EQ(f.reassembly.leader.block_id, i + 1);
    EXPECT_EQ(f.reassembly.leader.timestamp_ns, (i + 1) * cfg.period_ns());
    EXPECT_EQ(f.reassembly.buffer, synth_frame(cfg.scene, i));
    EXPECT_EQ(f.source, Link::CameraToAdas);
    EXPECT_TRUE(f.forwarded);
    EXPECT_FALSE(f.width_verdict.has_value());
  }
  EXPECT_EQ(cfg.period_ns(), 50'000'000u);
}

TEST(Session, PacketLossRate) {
  // 64 x 66 bytes at 16 bytes per packet: 264 payload packets per frame.
  SimConfig cfg = small_sim(10000, 64, 66, 16);
  cfg.loss_prob = 0.01;
  cfg.record_capture = false;
  const auto s = run_session(cfg, std::nullopt, std::nullopt);
  ASSERT_EQ(s.frames.size(), 10000u);
  std::size_t missing = 0;
  for (const auto& f : s.frames) missing += f.reassembly.missing_packet_ids.size();
  const double frac = static_cast<double>(missing) / (10000.0 * 264.0);
  EXPECT_NEAR(frac, 0.01, 0.002);
  EXPECT_EQ(missing, s.payload_packets_lost);
  EXPECT_EQ(s.payload_packets_sent, 10000u * 264u);
}

TEST(Session, WidthCommandHonoursCameraDelay) {
  // Find a slot whose request is 1934 right after a request of 1936.
  const Bytes key{0x4B, 0x65, 0x79};
  WidthScheduler sched(key, 1, 1936);
  std::vector<std::uint32_t> req;
  for (int i = 0; i < 16; ++i) req.push_back(sched.next_width());
  std::size_t k = 1;
  while (k < req.size() && !(req[k] == 1934 && req[k - 1] == 1936)) ++k;
  ASSERT_LT(k, req.size());

  for (unsigned delay : {0u, 1u}) {
    SimConfig cfg = small_sim(k + 3, 1936, 16, 8950);
    cfg.camera_delay_frames = delay;
    const auto s = run_session(cfg, std::nullopt, DefensePlan{key, 1, 1});
    ASSERT_EQ(s.frames.size(), k + 3);
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      const std::uint32_t expect = i < delay ? 1936 : req[i - delay];
      EXPECT_EQ(s.frames[i].reassembly.leader.width, expect) << "delay " << delay << " frame " << i;
      ASSERT_TRUE(s.frames[i].width_verdict.has_value());
      EXPECT_TRUE(s.frames[i].width_verdict->valid());
    }
    if (delay == 1) {
      EXPECT_EQ(s.frames[k].reassembly.leader.width, 1936u);
      EXPECT_EQ(s.frames[k + 1].reassembly.leader.width, 1934u);
    }
  }
}

TEST(Session, DeterministicCapture) {
  SimConfig cfg = small_sim(12);
  cfg.loss_prob = 0.05;
  const auto plan = full_frame_plan(4, 3, 64, 32);
  const auto a = run_session(cfg, plan, DefensePlan{{1, 2, 3}, 2, 1});
  const auto b = run_session(cfg, plan, DefensePlan{{1, 2, 3}, 2, 1});
  EXPECT_EQ(encode_capture(a.capture), encode_capture(b.capture));
  SimConfig other = cfg;
  other.seed = 2;
  EXPECT_NE(encode_capture(run_session(other, plan, std::nullopt).capture), encode_capture(a.capture));
}

TEST(Session, ReplayEqualsLive) {
  SimConfig cfg = small_sim(15);
  cfg.loss_prob = 0.02;
  cfg.camera_delay_frames = 1;
  for (const auto& plan : {std::optional<AttackPlan>{}, std::optional<AttackPlan>{full_frame_plan(5, 4, 64, 32)}}) {
    const auto live = run_session(cfg, plan, DefensePlan{{9, 9}, 3, 1});
    const Capture cap = decode_capture(encode_capture(live.capture));
    EXPECT_TRUE(same_frames(replay(cap), live.frames));
  }
}

TEST(Session, StopHaltsCameraUntilStart) {
  const SimConfig cfg = small_sim(20);
  const auto s = run_session(cfg, full_frame_plan(5, 6, 64, 32), std::nullopt);
  std::optional<std::uint64_t> stop, start;
  for (const auto& r : s.capture.records) {
    if (r.link != Link::AttackerToCamera) continue;
    const auto cmd = std::get<GvcpCommand>(decode_packet(r.bytes));
    (cmd.value == 0 ? stop : start) = r.time_ns;
  }
  ASSERT_TRUE(stop && start);
  EXPECT_LT(*stop, *start);
  for (const auto& r : records_on(s.capture, Link::CameraToAdas)) EXPECT_TRUE(r.time_ns < *stop || r.time_ns > *start);
  // The camera loses exactly the slots it was halted for.
  EXPECT_EQ(leaders_of(s.frames, Link::CameraToAdas).size(), 20u - 6u);
  EXPECT_EQ(leaders_of(s.frames, Link::AttackerToAdas).size(), 6u);
}

TEST(Session, CameraTimestampsMonotone) {
  const SimConfig cfg = small_sim(20);
  const auto s = run_session(cfg, full_frame_plan(3, 4, 64, 32), DefensePlan{{5}, 2, 1});
  std::uint64_t last = 0;
  for (const auto& l : leaders_of(s.frames, Link::CameraToAdas)) {
    EXPECT_GT(l.timestamp_ns, last);
    last = l.timestamp_ns;
  }
  // Records are in time order.
  for (std::size_t i = 1; i < s.capture.records.size(); ++i)
    EXPECT_LE(s.capture.records[i - 1].time_ns, s.capture.records[i].time_ns);
}

TEST(Session, AttackBeyondDurationRejected) {
  const SimConfig cfg = small_sim(10);
  EXPECT_THROW(run_session(cfg, full_frame_plan(8, 5, 64, 32), std::nullopt), ConfigError);
  EXPECT_NO_THROW(run_session(cfg, full_frame_plan(5, 5, 64, 32), std::nullopt));
}

TEST(Session, ConfigValidation) {
  SimConfig cfg = small_sim(1);
  cfg.loss_prob = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_sim(1);
  cfg.camera_delay_frames = 2;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_sim(1);
  cfg.fps = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  // 1936x1216 at 8950 bytes per packet fits comfortably in half a 50 ms period.
  cfg = small_sim(1, 1936, 1216, 8950);
  EXPECT_NO_THROW(cfg.validate());
  cfg.fps = 200;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Capture, RoundTripAndErrors) {
  const auto s = run_session(small_sim(3), std::nullopt, std::nullopt);
  const Bytes enc = encode_capture(s.capture);
  EXPECT_EQ(std::string(enc.begin(), enc.begin() + 4), "GVSC");
  EXPECT_EQ(enc[4], 0);
  EXPECT_EQ(enc[5], 1);
  const Capture back = decode_capture(enc);
  EXPECT_EQ(back.header, s.capture.header);
  EXPECT_EQ(back.records, s.capture.records);

  Bytes bad = enc;
  bad[0] = 'X';
  EXPECT_THROW(decode_capture(bad), ParseError);
  EXPECT_THROW(decode_capture(Bytes(enc.begin(), enc.end() - 1)), ParseError);
  Bytes ver = enc;
  ver[5] = 2;
  EXPECT_THROW(decode_capture(ver), ParseError);
}

TEST(Capture, RecordsCsv) {
  const auto s = run_session(small_sim(1, 8, 4, 16), std::nullopt, std::nullopt);
  const std::string csv = records_csv(s.capture);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "time_ns,link,type,block_id,packet_id,size");
  EXPECT_NE(csv.find("camera_to_adas,leader,1,,31"), std::string::npos);
  EXPECT_NE(csv.find("camera_to_adas,payload,1,2,35"), std::string::npos);
  EXPECT_NE(csv.find("camera_to_adas,trailer,1,,11"), std::string::npos);
}

TEST(Capture, HeaderEchoHidesKey) {
  const auto s = run_session(small_sim(2), std::nullopt, DefensePlan{{0xAA, 0xBB, 0xCC}, 2, 1});
  const auto& d = s.capture.header.at("defense");
  EXPECT_EQ(d.at("bits"), 2);
  EXPECT_EQ(d.at("key_bytes"), 3);
  EXPECT_EQ(s.capture.header.dump().find("aabbcc"), std::string::npos);
}
