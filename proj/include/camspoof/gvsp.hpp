#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "camspoof/byte_io.hpp"
#include "camspoof/error.hpp"
#include "camspoof/pixel.hpp"

namespace camspoof {

// Payload bytes per packet: 9000-byte jumbo frames minus a 50-byte header.
inline constexpr std::uint32_t kMaxPayload = 8950;
inline constexpr std::uint16_t kGvcpPort = 3956;
inline constexpr std::uint16_t kStreamSourcePort = 10010;

inline constexpr std::uint8_t kMagic0 = 0x47;
inline constexpr std::uint8_t kMagic1 = 0x56;

enum class PacketType : std::uint8_t { Leader = 1, Payload = 2, Trailer = 3, Gvcp = 4 };

struct LeaderPacket {
  std::uint64_t block_id = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t pixel_format = static_cast<std::uint32_t>(PixelFormat::BayerRG8);
  std::uint64_t timestamp_ns = 0;
  friend bool operator==(const LeaderPacket&, const LeaderPacket&) = default;
};

struct PayloadPacket {
  std::uint64_t block_id = 0;
  std::uint32_t packet_id = 0;  // 1-based within the block
  Bytes data;
  friend bool operator==(const PayloadPacket&, const PayloadPacket&) = default;
};

struct TrailerPacket {
  std::uint64_t block_id = 0;
  friend bool operator==(const TrailerPacket&, const TrailerPacket&) = default;
};

enum class GvcpRegister : std::uint16_t { Acquisition = 1, Width = 2 };

struct GvcpCommand {
  GvcpRegister reg = GvcpRegister::Acquisition;
  std::uint32_t value = 0;
  friend bool operator==(const GvcpCommand&, const GvcpCommand&) = default;
};

using StreamPacket = std::variant<LeaderPacket, PayloadPacket, TrailerPacket, GvcpCommand>;

inline PacketType packet_type(const StreamPacket& p) noexcept {
  return static_cast<PacketType>(p.index() + 1);
}

inline GvcpCommand acquisition_command(bool run) { return GvcpCommand{GvcpRegister::Acquisition, run ? 1u : 0u}; }
inline GvcpCommand width_command(std::uint32_t width) { return GvcpCommand{GvcpRegister::Width, width}; }

namespace detail {

inline std::string packet_problem(const LeaderPacket& p) {
  if (p.width == 0 || p.height == 0 || p.width % 2 != 0 || p.height % 2 != 0)
    return "leader dimensions must be positive and even";
  return {};
}
inline std::string packet_problem(const PayloadPacket& p) {
  if (p.data.empty()) return "payload data is empty";
  if (p.data.size() > kMaxPayload) return "payload data exceeds 8950 bytes";
  return {};
}
inline std::string packet_problem(const TrailerPacket&) { return {}; }
inline std::string packet_problem(const GvcpCommand& c) {
  switch (c.reg) {
    case GvcpRegister::Acquisition:
      return c.value <= 1 ? std::string{} : "acquisition value must be 0 or 1";
    case GvcpRegister::Width:
      return (c.value > 0 && c.value % 2 == 0) ? std::string{} : "width value must be positive and even";
  }
  return "unknown GVCP register";
}

}  // namespace detail

// Validity of a GVCP width write against a camera's supported range.
inline bool width_in_range(const GvcpCommand& c, std::uint32_t min_width, std::uint32_t max_width) {
  return c.reg == GvcpRegister::Width && c.value % 2 == 0 && c.value >= min_width && c.value <= max_width;
}

// Wire layout (big-endian): magic 0x47 0x56, type u8, then
//   leader : block_id u64, width u32, height u32, pixel_format u32, timestamp_ns u64
//   payload: block_id u64, packet_id u32, data_len u32, data
//   trailer: block_id u64
//   gvcp   : register u16, value u32
inline Bytes encode_packet(const StreamPacket& packet) {
  const std::string problem = std::visit([](const auto& p) { return detail::packet_problem(p); }, packet);
  if (!problem.empty()) throw ProtocolError("cannot encode invalid packet: " + problem);
  Bytes out;
  ByteWriter w(out);
  w.u8(kMagic0);
  w.u8(kMagic1);
  w.u8(static_cast<std::uint8_t>(packet_type(packet)));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LeaderPacket>) {
          out.reserve(31);
          w.u64(p.block_id);
          w.u32(p.width);
          w.u32(p.height);
          w.u32(p.pixel_format);
          w.u64(p.timestamp_ns);
        } else if constexpr (std::is_same_v<T, PayloadPacket>) {
          out.reserve(19 + p.data.size());
          w.u64(p.block_id);
          w.u32(p.packet_id);
          w.u32(static_cast<std::uint32_t>(p.data.size()));
          w.raw(p.data);
        } else if constexpr (std::is_same_v<T, TrailerPacket>) {
          w.u64(p.block_id);
        } else {
          w.u16(static_cast<std::uint16_t>(p.reg));
          w.u32(p.value);
        }
      },
      packet);
  return out;
}

namespace detail {

class FieldReader {
 public:
  FieldReader(std::span<const std::uint8_t> bytes, const char* what) : r_(bytes), what_(what) {}

  void need(std::size_t n, const char* field) {
    if (!r_.has(n))
      throw ParseError(ParseError::Kind::LengthMismatch,
                       std::string("truncated ") + what_ + ": missing field " + field);
  }
  std::uint16_t u16(const char* f) { need(2, f); return r_.u16(); }
  std::uint32_t u32(const char* f) { need(4, f); return r_.u32(); }
  std::uint64_t u64(const char* f) { need(8, f); return r_.u64(); }
  std::span<const std::uint8_t> raw(std::size_t n, const char* f) { need(n, f); return r_.raw(n); }
  void finish() {
    if (r_.remaining() != 0)
      throw ParseError(ParseError::Kind::LengthMismatch,
                       std::string(what_) + ": " + std::to_string(r_.remaining()) + " trailing bytes");
  }

 private:
  ByteReader r_;
  const char* what_;
};

}  // namespace detail

inline StreamPacket decode_packet(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != kMagic0 || bytes[1] != kMagic1)
    throw ParseError(ParseError::Kind::BadMagic, "bad packet magic");
  if (bytes.size() < 3) throw ParseError(ParseError::Kind::LengthMismatch, "truncated packet: missing field type");
  const std::uint8_t type = bytes[2];
  const auto body = bytes.subspan(3);
  StreamPacket out;
  switch (type) {
    case 1: {
      detail::FieldReader r(body, "leader");
      LeaderPacket p;
      p.block_id = r.u64("block_id");
      p.width = r.u32("width");
      p.height = r.u32("height");
      p.pixel_format = r.u32("pixel_format");
      p.timestamp_ns = r.u64("timestamp_ns");
      r.finish();
      out = p;
      break;
    }
    case 2: {
      detail::FieldReader r(body, "payload");
      PayloadPacket p;
      p.block_id = r.u64("block_id");
      p.packet_id = r.u32("packet_id");
      const std::uint32_t len = r.u32("data_len");
      auto data = r.raw(len, "data");
      r.finish();
      p.data.assign(data.begin(), data.end());
      out = std::move(p);
      break;
    }
    case 3: {
      detail::FieldReader r(body, "trailer");
      TrailerPacket p;
      p.block_id = r.u64("block_id");
      r.finish();
      out = p;
      break;
    }
    case 4: {
      detail::FieldReader r(body, "gvcp");
      GvcpCommand c;
      c.reg = static_cast<GvcpRegister>(r.u16("register"));
      c.value = r.u32("value");
      r.finish();
      if (c.reg != GvcpRegister::Acquisition && c.reg != GvcpRegister::Width)
        throw ParseError(ParseError::Kind::InvalidField, "gvcp: unknown register");
      out = c;
      break;
    }
    default:
      throw ParseError(ParseError::Kind::UnknownType, "unknown packet type " + std::to_string(type));
  }
  const std::string problem = std::visit([](const auto& p) { return detail::packet_problem(p); }, out);
  if (!problem.empty()) throw ParseError(ParseError::Kind::InvalidField, problem);
  return out;
}

// Leader, payloads 1..K carrying successive max_payload-byte slices, trailer.
inline std::vector<StreamPacket> fragment_frame(const PixelBuffer& buf, std::uint64_t block_id,
                                                std::uint64_t timestamp_ns, std::uint32_t max_payload = kMaxPayload) {
  if (max_payload == 0 || max_payload > kMaxPayload)
    throw ConfigError("max_payload must be in [1, 8950]");
  std::vector<StreamPacket> out;
  const std::size_t total = buf.size();
  const std::size_t k = (total + max_payload - 1) / max_payload;
  out.reserve(k + 2);
  out.emplace_back(LeaderPacket{block_id, buf.width(), buf.height(), static_cast<std::uint32_t>(buf.format()),
                                timestamp_ns});
  const auto& bytes = buf.bytes();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t begin = i * max_payload;
    const std::size_t end = std::min(total, begin + max_payload);
    out.emplace_back(PayloadPacket{block_id, static_cast<std::uint32_t>(i + 1),
                                   Bytes(bytes.begin() + static_cast<std::ptrdiff_t>(begin),
                                         bytes.begin() + static_cast<std::ptrdiff_t>(end))});
  }
  out.emplace_back(TrailerPacket{block_id});
  return out;
}

inline std::size_t payload_packet_count(std::size_t frame_bytes, std::uint32_t max_payload = kMaxPayload) {
  return (frame_bytes + max_payload - 1) / max_payload;
}

struct FrameDims {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

struct ReassemblyResult {
  PixelBuffer buffer;
  LeaderPacket leader;
  std::vector<std::uint32_t> missing_packet_ids;
  std::vector<std::uint32_t> overwritten_packet_ids;  // received more than once; first arrival kept
  std::size_t truncated_bytes = 0;                    // payload bytes falling outside the leader's frame
  std::size_t stray_packets = 0;                      // payloads for another block
  bool trailer_seen = false;
  bool dimension_mismatch = false;                    // leader differs from the expected dimensions

  bool complete() const noexcept { return missing_packet_ids.empty(); }
};

// Receiver-side accumulator for one block. Duplicate packet IDs keep the first
// arrival, so a forged packet that wins the race displaces the camera's.
class FrameAssembler {
 public:
  explicit FrameAssembler(const LeaderPacket& leader, std::uint32_t max_payload = kMaxPayload,
                          std::optional<FrameDims> expected = std::nullopt)
      : leader_(leader),
        max_payload_(max_payload),
        bytes_(std::size_t{leader.width} * leader.height, 0),
        slots_(payload_packet_count(bytes_.size(), max_payload), false) {
    if (!detail::packet_problem(leader).empty()) throw ProtocolError("invalid leader");
    if (max_payload == 0) throw ConfigError("max_payload must be positive");
    if (expected) mismatch_ = expected->width != leader.width || expected->height != leader.height;
  }

  std::uint64_t block_id() const noexcept { return leader_.block_id; }

  // Returns false when the packet belongs to another block.
  bool accept(const PayloadPacket& p) {
    if (p.block_id != leader_.block_id) {
      ++stray_;
      return false;
    }
    if (p.packet_id == 0 || p.packet_id > slots_.size()) {
      truncated_ += p.data.size();
      return true;
    }
    const std::size_t slot = p.packet_id - 1;
    if (slots_[slot]) {
      overwritten_.insert(p.packet_id);
      return true;
    }
    slots_[slot] = true;
    const std::size_t begin = slot * max_payload_;
    const std::size_t room = bytes_.size() - begin;
    const std::size_t n = std::min(room, p.data.size());
    std::copy_n(p.data.begin(), n, bytes_.begin() + static_cast<std::ptrdiff_t>(begin));
    truncated_ += p.data.size() - n;
    return true;
  }

  void accept(const TrailerPacket& t) {
    if (t.block_id == leader_.block_id) trailer_ = true;
  }

  bool trailer_seen() const noexcept { return trailer_; }

  ReassemblyResult finish() && {
    ReassemblyResult out{PixelBuffer(leader_.width, leader_.height, std::move(bytes_)), leader_, {}, {}, truncated_,
                         stray_, trailer_, mismatch_};
    for (std::size_t i = 0; i < slots_.size(); ++i)
      if (!slots_[i]) out.missing_packet_ids.push_back(static_cast<std::uint32_t>(i + 1));
    out.overwritten_packet_ids.assign(overwritten_.begin(), overwritten_.end());
    return out;
  }

 private:
  LeaderPacket leader_;
  std::uint32_t max_payload_;
  Bytes bytes_;
  std::vector<bool> slots_;
  std::set<std::uint32_t> overwritten_;
  std::size_t truncated_ = 0;
  std::size_t stray_ = 0;
  bool trailer_ = false;
  bool mismatch_ = false;
};

// Reassembles one block from a packet sequence starting with its leader.
// Stops at the block's trailer; GVCP packets are ignored.
inline ReassemblyResult reassemble(std::span<const StreamPacket> packets,
                                   std::optional<FrameDims> expected = std::nullopt,
                                   std::uint32_t max_payload = kMaxPayload) {
  if (packets.empty() || !std::holds_alternative<LeaderPacket>(packets.front()))
    throw ProtocolError("packet sequence does not begin with a leader");
  FrameAssembler acc(std::get<LeaderPacket>(packets.front()), max_payload, expected);
  for (const auto& p : packets.subspan(1)) {
    if (const auto* payload = std::get_if<PayloadPacket>(&p)) {
      acc.accept(*payload);
    } else if (const auto* trailer = std::get_if<TrailerPacket>(&p)) {
      acc.accept(*trailer);
      if (acc.trailer_seen()) break;
    }
  }
  return std::move(acc).finish();
}

}  // namespace camspoof
