#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "camspoof/attacker.hpp"
#include "camspoof/byte_io.hpp"
#include "camspoof/defense.hpp"
#include "camspoof/detectors.hpp"
#include "camspoof/error.hpp"
#include "camspoof/gvsp.hpp"
#include "camspoof/scene.hpp"

namespace camspoof {

struct SimConfig {
  double fps = 20.0;
  SceneConfig scene{};
  double loss_prob = 0.0;  // arbitrary default; the field rate was never measured
  unsigned camera_delay_frames = 0;
  std::uint64_t duration_frames = 10;
  std::uint64_t seed = 1;
  std::uint32_t max_payload = kMaxPayload;
  double link_gbps = 1.0;
  bool record_capture = true;

  std::uint64_t period_ns() const { return static_cast<std::uint64_t>(std::llround(1e9 / fps)); }

  // Wire time of one full payload packet plus UDP/IP overhead.
  std::uint64_t packet_spacing_ns() const {
    return static_cast<std::uint64_t>(std::ceil((max_payload + 19.0 + 28.0) * 8.0 / link_gbps));
  }

  StreamTiming timing() const { return {period_ns(), packet_spacing_ns(), max_payload}; }

  void validate() const {
    if (!(fps > 0.0) || !std::isfinite(fps)) throw ConfigError("sim: fps must be positive");
    if (!(loss_prob >= 0.0 && loss_prob < 1.0)) throw ConfigError("sim: loss_prob must be in [0, 1)");
    if (camera_delay_frames > 1) throw ConfigError("sim: camera_delay_frames must be 0 or 1");
    if (max_payload == 0 || max_payload > kMaxPayload) throw ConfigError("sim: max_payload must be in [1, 8950]");
    if (!(link_gbps > 0.0)) throw ConfigError("sim: link_gbps must be positive");
    scene.validate();
    const std::size_t k = payload_packet_count(std::size_t{scene.width} * scene.height, max_payload);
    // A frame's packets must be on the wire well before the next period's control traffic.
    if ((k + 1) * packet_spacing_ns() >= period_ns() / 2)
      throw ConfigError("sim: frame does not fit in half a frame period at this link rate");
  }
};

struct CaptureRecord {
  std::uint64_t time_ns = 0;
  Link link = Link::CameraToAdas;
  Bytes bytes;
  friend bool operator==(const CaptureRecord&, const CaptureRecord&) = default;
};

struct Capture {
  nlohmann::json header = nlohmann::json::object();
  std::vector<CaptureRecord> records;
};

inline constexpr std::uint16_t kCaptureVersion = 1;

inline Bytes encode_capture(const Capture& cap) {
  Bytes out;
  ByteWriter w(out);
  w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("GVSC"), 4));
  w.u16(kCaptureVersion);
  const std::string hdr = cap.header.dump();
  w.u32(static_cast<std::uint32_t>(hdr.size()));
  w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(hdr.data()), hdr.size()));
  for (const auto& r : cap.records) {
    w.u64(r.time_ns);
    w.u8(static_cast<std::uint8_t>(r.link));
    w.u32(static_cast<std::uint32_t>(r.bytes.size()));
    w.raw(r.bytes);
  }
  return out;
}

inline Capture decode_capture(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  if (!r.has(4) || data[0] != 'G' || data[1] != 'V' || data[2] != 'S' || data[3] != 'C')
    throw ParseError(ParseError::Kind::BadMagic, "capture: bad magic");
  r.raw(4);
  if (!r.has(2 + 4)) throw ParseError(ParseError::Kind::LengthMismatch, "capture: truncated header");
  const std::uint16_t version = r.u16();
  if (version != kCaptureVersion)
    throw ParseError(ParseError::Kind::InvalidField, "capture: unsupported version " + std::to_string(version));
  const std::uint32_t hlen = r.u32();
  if (!r.has(hlen)) throw ParseError(ParseError::Kind::LengthMismatch, "capture: truncated config blob");
  const auto hbytes = r.raw(hlen);
  Capture cap;
  try {
    cap.header = nlohmann::json::parse(hbytes.begin(), hbytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseError::Kind::InvalidField, std::string("capture: config blob is not JSON: ") + e.what());
  }
  while (r.remaining() > 0) {
    if (!r.has(8 + 1 + 4)) throw ParseError(ParseError::Kind::LengthMismatch, "capture: truncated record header");
    CaptureRecord rec;
    rec.time_ns = r.u64();
    const std::uint8_t link = r.u8();
    if (link < 1 || link > 4) throw ParseError(ParseError::Kind::InvalidField, "capture: unknown link");
    rec.link = static_cast<Link>(link);
    const std::uint32_t len = r.u32();
    if (!r.has(len)) throw ParseError(ParseError::Kind::LengthMismatch, "capture: truncated record body");
    const auto body = r.raw(len);
    rec.bytes.assign(body.begin(), body.end());
    cap.records.push_back(std::move(rec));
  }
  return cap;
}

inline std::string records_csv(const Capture& cap) {
  std::ostringstream os;
  os << "time_ns,link,type,block_id,packet_id,size\n";
  for (const auto& rec : cap.records) {
    os << rec.time_ns << ',' << to_string(rec.link) << ',';
    const StreamPacket p = decode_packet(rec.bytes);
    std::visit(
        [&](const auto& pk) {
          using T = std::decay_t<decltype(pk)>;
          if constexpr (std::is_same_v<T, LeaderPacket>) os << "leader," << pk.block_id << ',';
          else if constexpr (std::is_same_v<T, PayloadPacket>) os << "payload," << pk.block_id << ',' << pk.packet_id;
          else if constexpr (std::is_same_v<T, TrailerPacket>) os << "trailer," << pk.block_id << ',';
          else os << (pk.reg == GvcpRegister::Width ? "gvcp_width" : "gvcp_acquisition") << ",,";
        },
        p);
    os << ',' << rec.bytes.size() << '\n';
  }
  return os.str();
}

struct FrameResult {
  ReassemblyResult reassembly;
  Link source = Link::CameraToAdas;  // link the leader arrived on
  std::uint64_t arrival_ns = 0;      // leader arrival
  std::optional<WidthVerdict> width_verdict;
  bool forwarded = true;             // passed the active defense (always true without one)
  std::size_t injected_payloads = 0; // payload packets that arrived on the attacker link

  bool attacked() const noexcept { return source == Link::AttackerToAdas || injected_payloads > 0; }
};

struct ReceiverConfig {
  std::uint32_t max_payload = kMaxPayload;
  std::optional<unsigned> defense_d_max;
  std::optional<FrameDims> expected;
};

// ADAS-side consumer of capture records. Everything it knows arrives through
// records, so a saved capture replays to the same results.
class Receiver {
 public:
  explicit Receiver(ReceiverConfig cfg) : cfg_(cfg) {
    if (cfg_.defense_d_max) verifier_.emplace(*cfg_.defense_d_max);
  }

  void consume(const CaptureRecord& rec) {
    if (rec.link == Link::AttackerToCamera) return;
    const StreamPacket p = decode_packet(rec.bytes);
    if (rec.link == Link::DefenseToCamera) {
      const auto& cmd = std::get<GvcpCommand>(p);
      if (verifier_ && cmd.reg == GvcpRegister::Width) verifier_->record_request(cmd.value);
      return;
    }
    if (const auto* leader = std::get_if<LeaderPacket>(&p)) {
      finalize();
      open_.emplace(Open{FrameAssembler(*leader, cfg_.max_payload, cfg_.expected), rec.link, rec.time_ns, {}});
      if (verifier_) open_->verdict = verify_width(leader->width, *verifier_, leader->block_id);
    } else if (const auto* payload = std::get_if<PayloadPacket>(&p)) {
      if (open_) {
        open_->asm_.accept(*payload);
        if (rec.link == Link::AttackerToAdas && payload->block_id == open_->asm_.block_id()) ++open_->injected;
      } else {
        ++orphans_;
      }
    } else if (const auto* trailer = std::get_if<TrailerPacket>(&p)) {
      if (open_) {
        open_->asm_.accept(*trailer);
        if (open_->asm_.trailer_seen()) finalize();
      }
    }
  }

  void flush() { finalize(); }

  std::vector<FrameResult>& frames() noexcept { return frames_; }
  const std::vector<FrameResult>& frames() const noexcept { return frames_; }
  std::size_t orphan_payloads() const noexcept { return orphans_; }

 private:
  struct Open {
    FrameAssembler asm_;
    Link source;
    std::uint64_t arrival;
    std::optional<WidthVerdict> verdict;
    std::size_t injected = 0;
  };

  void finalize() {
    if (!open_) return;
    FrameResult fr{std::move(open_->asm_).finish(), open_->source, open_->arrival, open_->verdict, true, open_->injected};
    if (fr.width_verdict) fr.forwarded = fr.width_verdict->valid();
    frames_.push_back(std::move(fr));
    open_.reset();
  }

  ReceiverConfig cfg_;
  std::optional<VerifierState> verifier_;
  std::optional<Open> open_;
  std::vector<FrameResult> frames_;
  std::size_t orphans_ = 0;
};

struct SessionResult {
  Capture capture;
  std::vector<FrameResult> frames;
  std::vector<std::string> log;
  std::uint64_t payload_packets_sent = 0;
  std::uint64_t payload_packets_lost = 0;
};

inline nlohmann::json sim_header(const SimConfig& cfg, const std::optional<AttackPlan>& attack,
                                 const std::optional<DefensePlan>& defense) {
  nlohmann::json h;
  h["seed"] = cfg.seed;
  h["fps"] = cfg.fps;
  h["max_payload"] = cfg.max_payload;
  h["loss_prob"] = cfg.loss_prob;
  h["camera_delay_frames"] = cfg.camera_delay_frames;
  h["duration_frames"] = cfg.duration_frames;
  h["link_gbps"] = cfg.link_gbps;
  h["scene"] = {{"seed", cfg.scene.seed},
                {"width", cfg.scene.width},
                {"height", cfg.scene.height},
                {"motion_dx", cfg.scene.motion_dx},
                {"motion_dy", cfg.scene.motion_dy},
                {"texture_scale", cfg.scene.texture_scale},
                {"corner_density", cfg.scene.corner_density}};
  if (attack) {
    h["attack"] = {{"kind", to_string(attack->kind)},
                   {"start_frame", attack->start_frame},
                   {"duration_frames", attack->duration_frames},
                   {"injected_width", attack->injected_width},
                   {"stripe_rows", attack->stripe_rows},
                   {"patch_position", {attack->patch_row, attack->patch_col}},
                   {"metadata_policy", to_string(attack->metadata_policy)},
                   {"rate_multiplier", attack->rate_multiplier},
                   {"payload", attack->payload_source}};
  } else {
    h["attack"] = nullptr;
  }
  // The key stays with the defense unit; only its shape is echoed.
  if (defense) h["defense"] = {{"bits", defense->bits}, {"d_max", defense->d_max}, {"key_bytes", defense->key.size()}};
  else h["defense"] = nullptr;
  return h;
}

inline ReceiverConfig receiver_config_from_header(const nlohmann::json& h) {
  ReceiverConfig rc;
  try {
    rc.max_payload = h.at("max_payload").get<std::uint32_t>();
    if (h.contains("defense") && !h.at("defense").is_null()) rc.defense_d_max = h.at("defense").at("d_max").get<unsigned>();
    rc.expected = FrameDims{h.at("scene").at("width").get<std::uint32_t>(), h.at("scene").at("height").get<std::uint32_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseError::Kind::InvalidField, std::string("capture header: ") + e.what());
  }
  return rc;
}

namespace detail {

enum class EventKind { Tick, DefenseRequest, AttackHook, Transmit };

struct Event {
  std::uint64_t time = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Tick;
  std::uint64_t frame = 0;
  Link link = Link::CameraToAdas;
  StreamPacket packet;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const noexcept {
    return a.time != b.time ? a.time > b.time : a.seq > b.seq;
  }
};

// Reassembles the camera stream the way a tap would, one finished frame at a time.
class AttackerTap {
 public:
  explicit AttackerTap(std::uint32_t max_payload) : max_payload_(max_payload) {}

  void observe(const StreamPacket& p, std::uint64_t time) {
    if (const auto* l = std::get_if<LeaderPacket>(&p)) {
      open_.emplace(*l, max_payload_);
      open_leader_ = *l;
      open_time_ = time;
    } else if (const auto* pl = std::get_if<PayloadPacket>(&p)) {
      if (open_) open_->accept(*pl);
    } else if (const auto* t = std::get_if<TrailerPacket>(&p)) {
      if (open_ && t->block_id == open_leader_.block_id) {
        view_.last_frame = std::move(*open_).finish().buffer;
        view_.last_seen_leader = open_leader_;
        view_.last_leader_arrival_ns = open_time_;
        open_.reset();
      }
    }
  }

  const AttackerView& view() const noexcept { return view_; }

 private:
  std::uint32_t max_payload_;
  std::optional<FrameAssembler> open_;
  LeaderPacket open_leader_{};
  std::uint64_t open_time_ = 0;
  AttackerView view_;
};

inline bool unit_draw_below(std::mt19937_64& rng, double p) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 < p;
}

}  // namespace detail

inline void validate_attack(const AttackPlan& plan, const SimConfig& cfg) {
  plan.validate();
  std::uint64_t slots = plan.duration_frames;
  if (plan.kind == AttackKind::FullFrame)
    slots = static_cast<std::uint64_t>(std::ceil(static_cast<double>(plan.duration_frames) / plan.rate_multiplier));
  if (plan.start_frame + slots > cfg.duration_frames)
    throw ConfigError("attack: plan references frames beyond the session duration");
  if (plan.kind == AttackKind::FullFrame && plan.rate_multiplier > 1.0) {
    const auto& t = cfg.timing();
    std::size_t bytes = std::size_t{plan.injected_width} * cfg.scene.height;
    if (const auto* buf = std::get_if<PixelBuffer>(&plan.payload)) bytes = buf->size();
    if ((payload_packet_count(bytes, t.max_payload) + 2) * t.packet_spacing_ns >=
        static_cast<std::uint64_t>(static_cast<double>(t.period_ns) / plan.rate_multiplier))
      throw ConfigError("attack: fabricated frames overlap at this rate_multiplier");
  }
  if (plan.kind != AttackKind::FullFrame) {
    if (plan.stripe_rows > cfg.scene.height) throw ConfigError("attack: stripe taller than frame");
    if (plan.kind == AttackKind::Stripe && plan.injected_width > cfg.scene.width)
      throw ConfigError("attack: injected_width exceeds sensor width");
  }
}

// Event-driven session. Frame slot k starts at (k + 1) * period.
//   slot - period/2 : defense width request for slot k
//   slot - period/4 : attacker hook
//   slot            : camera leader, then payloads every packet spacing, then trailer
inline SessionResult run_session(const SimConfig& cfg, const std::optional<AttackPlan>& attack,
                                 const std::optional<DefensePlan>& defense,
                                 const nlohmann::json& header_extra = nullptr) {
  cfg.validate();
  if (attack) validate_attack(*attack, cfg);
  std::optional<WidthScheduler> scheduler;
  if (defense) scheduler.emplace(defense->key, defense->bits, cfg.scene.width);

  const StreamTiming timing = cfg.timing();
  const std::uint64_t period = timing.period_ns;
  auto slot_time = [&](std::uint64_t k) { return (k + 1) * period; };

  SessionResult out;
  out.capture.header = sim_header(cfg, attack, defense);
  if (!header_extra.is_null()) out.capture.header["extra"] = header_extra;

  ReceiverConfig rc = receiver_config_from_header(out.capture.header);
  Receiver receiver(rc);
  detail::AttackerTap tap(cfg.max_payload);
  std::mt19937_64 rng(cfg.seed);

  std::priority_queue<detail::Event, std::vector<detail::Event>, detail::EventLater> queue;
  std::uint64_t seq = 0;
  auto push = [&](detail::Event e) {
    e.seq = seq++;
    queue.push(std::move(e));
  };
  auto transmit = [&](std::uint64_t t, Link link, StreamPacket p) {
    push({t, 0, detail::EventKind::Transmit, 0, link, std::move(p)});
  };

  // Camera state.
  bool acquiring = true;
  std::uint32_t width = cfg.scene.width;
  std::uint64_t next_block = 1;
  std::multimap<std::uint64_t, std::uint32_t> pending_width;  // effective slot -> width

  for (std::uint64_t k = 0; k < cfg.duration_frames; ++k) {
    if (scheduler) push({slot_time(k) - period / 2, 0, detail::EventKind::DefenseRequest, k, {}, {}});
    if (attack) {
      const bool fires = attack->kind == AttackKind::FullFrame
                             ? k == attack->start_frame
                             : k >= attack->start_frame && k < attack->start_frame + attack->duration_frames;
      if (fires) push({slot_time(k) - period / 4, 0, detail::EventKind::AttackHook, k, {}, {}});
    }
    push({slot_time(k), 0, detail::EventKind::Tick, k, {}, {}});
  }
  // Configuration-time request: tells the verifier the width the camera starts at.
  if (scheduler) transmit(0, Link::DefenseToCamera, width_command(cfg.scene.width));

  auto next_slot_after = [&](std::uint64_t t) { return t / period; };  // first k with slot_time(k) > t

  while (!queue.empty()) {
    detail::Event ev = queue.top();
    queue.pop();
    switch (ev.kind) {
      case detail::EventKind::Tick: {
        const std::uint64_t k = ev.frame;
        for (auto it = pending_width.begin(); it != pending_width.end() && it->first <= k;) {
          width = it->second;
          it = pending_width.erase(it);
        }
        if (!acquiring) break;
        PixelBuffer frame = synth_frame(cfg.scene, k);
        if (width != frame.width()) frame = frame.crop_columns(width);
        const auto packets = fragment_frame(frame, next_block++, ev.time, cfg.max_payload);
        for (std::size_t j = 0; j < packets.size(); ++j)
          transmit(ev.time + j * timing.packet_spacing_ns, Link::CameraToAdas, packets[j]);
        break;
      }
      case detail::EventKind::DefenseRequest:
        transmit(ev.time, Link::DefenseToCamera, width_command(scheduler->next_width()));
        break;
      case detail::EventKind::AttackHook: {
        AttackOutput ao;
        if (attack->kind == AttackKind::FullFrame) ao = full_frame_attack(*attack, tap.view(), slot_time(ev.frame), timing);
        else if (attack->kind == AttackKind::Stripe) ao = stripe_attack(*attack, tap.view(), timing);
        else ao = patch_attack(*attack, tap.view(), timing);
        for (auto& s : ao.packets) transmit(std::max(s.time_ns, ev.time), s.link, std::move(s.packet));
        for (auto& l : ao.log) out.log.push_back("slot " + std::to_string(ev.frame) + ": " + l);
        break;
      }
      case detail::EventKind::Transmit: {
        const bool to_adas = ev.link == Link::CameraToAdas || ev.link == Link::AttackerToAdas;
        if (to_adas && std::holds_alternative<PayloadPacket>(ev.packet)) {
          ++out.payload_packets_sent;
          if (cfg.loss_prob > 0.0 && detail::unit_draw_below(rng, cfg.loss_prob)) {
            ++out.payload_packets_lost;
            break;
          }
        }
        if (ev.link == Link::CameraToAdas) tap.observe(ev.packet, ev.time);
        if (ev.link == Link::DefenseToCamera || ev.link == Link::AttackerToCamera) {
          const auto& cmd = std::get<GvcpCommand>(ev.packet);
          if (cmd.reg == GvcpRegister::Acquisition) {
            acquiring = cmd.value != 0;
          } else if (cmd.value % 2 == 0 && cmd.value >= 2 && cmd.value <= cfg.scene.width) {
            pending_width.emplace(next_slot_after(ev.time) + cfg.camera_delay_frames, cmd.value);
          } else {
            out.log.push_back("camera: rejected width " + std::to_string(cmd.value));
          }
        }
        CaptureRecord rec{ev.time, ev.link, encode_packet(ev.packet)};
        receiver.consume(rec);
        if (cfg.record_capture) out.capture.records.push_back(std::move(rec));
        break;
      }
    }
  }
  receiver.flush();
  out.frames = std::move(receiver.frames());
  return out;
}

inline std::vector<FrameResult> replay(const Capture& cap) {
  Receiver receiver(receiver_config_from_header(cap.header));
  for (const auto& rec : cap.records) receiver.consume(rec);
  receiver.flush();
  return std::move(receiver.frames());
}

inline std::vector<ObservedFrame> observed_frames(const std::vector<FrameResult>& frames) {
  std::vector<ObservedFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back({f.reassembly.leader, f.reassembly.buffer, f.arrival_ns});
  return out;
}

inline std::string width_verdict_csv(const std::vector<FrameResult>& frames) {
  std::ostringstream os;
  os << "block_id,requested_width,received_width,verdict,matched_delay\n";
  for (const auto& f : frames) {
    if (!f.width_verdict) continue;
    const auto& v = *f.width_verdict;
    os << v.block_id << ',' << v.requested_width << ',' << v.received_width << ','
       << (v.abstained ? std::string("Abstain") : to_string(v.verdict)) << ',';
    if (v.matched_delay) os << *v.matched_delay;
    os << '\n';
  }
  return os.str();
}

}  // namespace camspoof
