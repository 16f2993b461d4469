#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace zrecon {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based standard normal draw: the value depends only on (seed, index, stream),
/// so results do not depend on evaluation order or thread count.
inline double normal_at(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) noexcept {
  const std::uint64_t base = splitmix64(seed ^ splitmix64(index * 4 + stream));
  const std::uint64_t r1 = splitmix64(base);
  const std::uint64_t r2 = splitmix64(base ^ 0xd1b54a32d192ed03ULL);
  const double u1 = (static_cast<double>(r1 >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(r2 >> 11) * 0x1.0p-53;          // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace zrecon
