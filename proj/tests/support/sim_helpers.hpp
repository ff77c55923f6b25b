#pragma once

#include <algorithm>

#include "camspoof/sim.hpp"

namespace camspoof::test_support {

inline SimConfig small_sim(std::uint64_t frames, std::uint32_t width = 64, std::uint32_t height = 32,
                           std::uint32_t max_payload = 256) {
  SimConfig cfg;
  cfg.duration_frames = frames;
  cfg.scene.width = width;
  cfg.scene.height = height;
  cfg.scene.seed = 3;
  cfg.max_payload = max_payload;
  return cfg;
}

inline std::vector<CaptureRecord> records_on(const Capture& cap, Link link) {
  std::vector<CaptureRecord> out;
  std::copy_if(cap.records.begin(), cap.records.end(), std::back_inserter(out),
               [&](const CaptureRecord& r) { return r.link == link; });
  return out;
}

inline std::vector<LeaderPacket> leaders_of(const std::vector<FrameResult>& frames, std::optional<Link> source = {}) {
  std::vector<LeaderPacket> out;
  for (const auto& f : frames)
    if (!source || f.source == *source) out.push_back(f.reassembly.leader);
  return out;
}

}  // namespace camspoof::test_support
