#pragma once

// Seed discipline: every random stream is derived from one master seed plus a
// purpose tag and an index, so results never depend on evaluation order.

#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace pdt {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                                 std::uint64_t index = 0) noexcept {
  std::uint64_t h = splitmix64(master ^ fnv1a64(purpose));
  return splitmix64(h ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_stream(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(derive_seed(master, purpose, index)),
                    static_cast<std::uint32_t>(derive_seed(master, purpose, index) >> 32)};
  return Rng(seq);
}

/// Incremental FNV-1a over raw values; used to fingerprint beliefs and
/// trajectories for equality checks.
class Hasher {
 public:
  Hasher& add(double v) noexcept {
    if (v == 0.0) v = 0.0;  // fold -0.0
    char buf[sizeof(double)];
    std::memcpy(buf, &v, sizeof v);
    h_ = fnv1a64(std::string_view(buf, sizeof buf), h_);
    return *this;
  }
  Hasher& add(std::uint64_t v) noexcept {
    char buf[sizeof v];
    std::memcpy(buf, &v, sizeof v);
    h_ = fnv1a64(std::string_view(buf, sizeof buf), h_);
    return *this;
  }
  Hasher& add(std::string_view s) noexcept {
    h_ = fnv1a64(s, h_);
    return *this;
  }
  std::uint64_t value() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string to_hex(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

/// Pairwise summation: the result depends only on the order of the input,
/// never on how the values were produced.
inline double pairwise_sum(std::span<const double> v) noexcept {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace pdt
