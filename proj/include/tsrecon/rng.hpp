#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace tsrecon {

// Counter-based RNG (Philox4x32-10). A generator is a pure function of
// (key, counter), so any element of the stream can be produced without
// generating its predecessors and parallel streams never collide as long
// as their keys differ.
class Philox4x32 {
public:
  explicit Philox4x32(std::uint64_t key) : key_(key) {}

  // 128-bit block -> four 32-bit words.
  std::array<std::uint32_t, 4> block(std::uint64_t counter) const {
    std::uint32_t c0 = static_cast<std::uint32_t>(counter);
    std::uint32_t c1 = static_cast<std::uint32_t>(counter >> 32);
    std::uint32_t c2 = 0, c3 = 0;
    std::uint32_t k0 = static_cast<std::uint32_t>(key_);
    std::uint32_t k1 = static_cast<std::uint32_t>(key_ >> 32);
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k0 += kWeyl0;
        k1 += kWeyl1;
      }
      std::uint64_t m0 = static_cast<std::uint64_t>(kMult0) * c0;
      std::uint64_t m1 = static_cast<std::uint64_t>(kMult1) * c2;
      std::uint32_t hi0 = static_cast<std::uint32_t>(m0 >> 32);
      std::uint32_t lo0 = static_cast<std::uint32_t>(m0);
      std::uint32_t hi1 = static_cast<std::uint32_t>(m1 >> 32);
      std::uint32_t lo1 = static_cast<std::uint32_t>(m1);
      std::uint32_t n0 = hi1 ^ c1 ^ k0;
      std::uint32_t n1 = lo1;
      std::uint32_t n2 = hi0 ^ c3 ^ k1;
      std::uint32_t n3 = lo0;
      c0 = n0;
      c1 = n1;
      c2 = n2;
      c3 = n3;
    }
    return {c0, c1, c2, c3};
  }

  // Raw-round variant with an explicit 128-bit counter and 64-bit key,
  // matching the published known-answer vectors.
  static std::array<std::uint32_t, 4> bijection(std::array<std::uint32_t, 4> ctr,
                                                std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      std::uint64_t m0 = static_cast<std::uint64_t>(kMult0) * ctr[0];
      std::uint64_t m1 = static_cast<std::uint64_t>(kMult1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(m1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(m1),
             static_cast<std::uint32_t>(m0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(m0)};
    }
    return ctr;
  }

  // Two 64-bit words per block.
  std::uint64_t uint64_at(std::uint64_t index) const {
    auto w = block(index >> 1);
    int off = static_cast<int>(index & 1) * 2;
    return (static_cast<std::uint64_t>(w[off]) << 32) | w[off + 1];
  }

  // Uniform in (0, 1]; never returns 0 so it is safe under log().
  double uniform_at(std::uint64_t index) const {
    return (static_cast<double>(uint64_at(index) >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; indices 2k and 2k+1 share one pair of
  // uniforms, so normal_at is a pure function of (key, index).
  double normal_at(std::uint64_t index) const {
    std::uint64_t pair = index >> 1;
    double u1 = uniform_at(2 * pair);
    double u2 = uniform_at(2 * pair + 1);
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * kPi * u2;
    return (index & 1) ? radius * std::sin(angle) : radius * std::cos(angle);
  }

private:
  static constexpr std::uint32_t kMult0 = 0xD2511F53u;
  static constexpr std::uint32_t kMult1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  static constexpr double kPi = 3.14159265358979323846;

  std::uint64_t key_;
};

// Sequential convenience wrapper around the counter-based core.
class NormalStream {
public:
  explicit NormalStream(std::uint64_t key) : gen_(key) {}
  double next() { return gen_.normal_at(index_++); }
  double next_uniform() { return gen_.uniform_at(uindex_++ + (1ull << 62)); }

private:
  Philox4x32 gen_;
  std::uint64_t index_ = 0;
  std::uint64_t uindex_ = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Deterministic stream keys for parallel work units: the derived key depends
// only on (master seed, stage label, unit index), never on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t index) {
  return splitmix64(splitmix64(master ^ fnv1a64(stage)) ^ index);
}

}  // namespace tsrecon
