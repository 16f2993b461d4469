#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

namespace zrecon {

/// 64-bit FNV-1a, used for content hashes written into file headers.
class Fnv1a {
public:
  Fnv1a& bytes(const void* data, std::size_t n) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& str(std::string_view s) noexcept {
    const std::uint64_t n = s.size();
    bytes(&n, sizeof n);
    return bytes(s.data(), s.size());
  }
  Fnv1a& f64(double v) noexcept { return bytes(&v, sizeof v); }
  Fnv1a& u64(std::uint64_t v) noexcept { return bytes(&v, sizeof v); }
  Fnv1a& f64s(std::span<const double> v) noexcept {
    u64(v.size());
    return bytes(v.data(), v.size_bytes());
  }
  std::uint64_t value() const noexcept { return h_; }

private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string hash_hex(std::uint64_t h);

}  // namespace zrecon
