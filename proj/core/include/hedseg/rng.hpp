#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace hedseg {

/// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed for one sample: global seed combined with a stable sample identifier,
/// independent of processing order.
constexpr std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view sample_id) noexcept {
  return mix64(global_seed ^ mix64(fnv1a64(sample_id)));
}

constexpr std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
  return mix64(mix64(global_seed ^ mix64(a)) ^ b);
}

/// Small deterministic generator (xoshiro256**). The distributions below are
/// implemented here so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;
  double normal() noexcept;

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

}  // namespace hedseg
