#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camspoof/byte_io.hpp"
#include "camspoof/error.hpp"

namespace camspoof {

// RC4 keystream generator (KSA + PRGA) with an initial discard.
class Rc4 {
 public:
  explicit Rc4(std::span<const std::uint8_t> key, std::size_t drop = 1000) {
    if (key.empty() || key.size() > 256) throw ConfigError("RC4 key length must be in [1, 256]");
    for (int i = 0; i < 256; ++i) s_[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
    std::uint8_t j = 0;
    for (std::size_t i = 0; i < 256; ++i) {
      j = static_cast<std::uint8_t>(j + s_[i] + key[i % key.size()]);
      std::swap(s_[i], s_[j]);
    }
    for (std::size_t k = 0; k < drop; ++k) next();
  }

  std::uint8_t next() noexcept {
    i_ = static_cast<std::uint8_t>(i_ + 1);
    j_ = static_cast<std::uint8_t>(j_ + s_[i_]);
    std::swap(s_[i_], s_[j_]);
    return s_[static_cast<std::uint8_t>(s_[i_] + s_[j_])];
  }

  Bytes take(std::size_t n) {
    Bytes out(n);
    for (auto& b : out) b = next();
    return out;
  }

 private:
  std::array<std::uint8_t, 256> s_{};
  std::uint8_t i_ = 0;
  std::uint8_t j_ = 0;
};

inline Bytes rc4_keystream(std::span<const std::uint8_t> key, std::size_t n, std::size_t drop = 1000) {
  return Rc4(key, drop).take(n);
}

// Draws per-frame widths W_max - 2k, k taken `bits` at a time (MSB first)
// from the flattened RC4 keystream.
class WidthScheduler {
 public:
  WidthScheduler(Bytes key, unsigned bits, std::uint32_t w_max, std::size_t drop = 1000)
      : key_(std::move(key)), bits_(bits), w_max_(w_max), drop_(drop), rc4_(key_, drop) {
    if (bits < 1 || bits > 8) throw ConfigError("bits per frame must be in [1, 8]");
    if (w_max % 2 != 0) throw ConfigError("maximum width must be even");
    if (w_max <= 2u * ((1u << bits) - 1u)) throw ConfigError("maximum width too small for the symbol count");
  }

  unsigned bits() const noexcept { return bits_; }
  std::uint32_t w_max() const noexcept { return w_max_; }
  std::uint64_t bit_cursor() const noexcept { return cursor_; }
  unsigned symbol_count() const noexcept { return 1u << bits_; }

  std::uint32_t width_for_symbol(unsigned k) const noexcept { return w_max_ - 2 * k; }

  unsigned next_symbol() {
    unsigned k = 0;
    for (unsigned i = 0; i < bits_; ++i) {
      if (cursor_ % 8 == 0) byte_ = rc4_.next();
      const unsigned bit = (byte_ >> (7 - cursor_ % 8)) & 1u;
      k = (k << 1) | bit;
      ++cursor_;
    }
    return k;
  }

  std::uint32_t next_width() { return width_for_symbol(next_symbol()); }

  // Positions the scheduler as if `frames` widths had already been drawn.
  void seek(std::uint64_t frames) {
    rc4_ = Rc4(key_, drop_);
    cursor_ = 0;
    for (std::uint64_t f = 0; f < frames; ++f) next_symbol();
  }

  std::vector<std::uint32_t> widths() const {
    std::vector<std::uint32_t> out;
    for (unsigned k = 0; k < symbol_count(); ++k) out.push_back(width_for_symbol(k));
    return out;
  }

 private:
  Bytes key_;
  unsigned bits_;
  std::uint32_t w_max_;
  std::size_t drop_;
  Rc4 rc4_;
  std::uint64_t cursor_ = 0;
  std::uint8_t byte_ = 0;
};

// Rolling window of the most recent requested widths, most recent first.
class VerifierState {
 public:
  explicit VerifierState(unsigned d_max = 1) : d_max_(d_max) {}

  unsigned d_max() const noexcept { return d_max_; }
  const std::deque<std::uint32_t>& recent_requested() const noexcept { return recent_; }
  bool empty() const noexcept { return recent_.empty(); }

  void record_request(std::uint32_t width) {
    recent_.push_front(width);
    while (recent_.size() > d_max_ + 1) recent_.pop_back();
  }

 private:
  unsigned d_max_;
  std::deque<std::uint32_t> recent_;
};

enum class Validity { Valid, Invalid };

inline std::string to_string(Validity v) { return v == Validity::Valid ? "Valid" : "Invalid"; }

struct WidthVerdict {
  std::uint64_t block_id = 0;
  std::uint32_t requested_width = 0;  // most recent request at verification time, 0 if none
  std::uint32_t received_width = 0;
  Validity verdict = Validity::Valid;
  std::optional<unsigned> matched_delay;
  bool abstained = false;  // no request made yet

  bool valid() const noexcept { return verdict == Validity::Valid; }
  friend bool operator==(const WidthVerdict&, const WidthVerdict&) = default;
};

inline WidthVerdict verify_width(std::uint32_t received_width, const VerifierState& state, std::uint64_t block_id = 0) {
  WidthVerdict v;
  v.block_id = block_id;
  v.received_width = received_width;
  if (state.empty()) {
    v.abstained = true;
    return v;
  }
  v.requested_width = state.recent_requested().front();
  const auto& recent = state.recent_requested();
  for (std::size_t i = 0; i < recent.size(); ++i) {
    if (recent[i] == received_width) {
      v.matched_delay = static_cast<unsigned>(i);
      return v;
    }
  }
  v.verdict = Validity::Invalid;
  return v;
}

struct DefensePlan {
  Bytes key;
  unsigned bits = 1;
  unsigned d_max = 1;
};

}  // namespace camspoof
