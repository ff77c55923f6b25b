#pragma once

#include <random>

#include "camspoof/gvsp.hpp"

namespace camspoof::test_support {

// Uniformly chosen packet type with random valid fields.
inline StreamPacket random_packet(std::mt19937_64& rng) {
  auto u32 = [&] { return static_cast<std::uint32_t>(rng()); };
  auto even = [&](std::uint32_t hi) { return 2 * (1 + u32() % (hi / 2)); };
  switch (rng() % 4) {
    case 0:
      return LeaderPacket{rng(), even(0xFFFFFFF0u), even(0xFFFFFFF0u), u32(), rng()};
    case 1: {
      const std::size_t n = 1 + rng() % (rng() % 8 == 0 ? kMaxPayload : 64);
      Bytes d(n);
      for (auto& b : d) b = static_cast<std::uint8_t>(rng());
      return PayloadPacket{rng(), u32(), std::move(d)};
    }
    case 2:
      return TrailerPacket{rng()};
    default:
      if (rng() % 2 == 0) return acquisition_command(rng() % 2 == 0);
      return width_command(even(0xFFFFFFF0u));
  }
}

}  // namespace camspoof::test_support
