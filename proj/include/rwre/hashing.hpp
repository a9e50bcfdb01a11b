#pragma once

#include <cstdint>
#include <string_view>

// Counter-based randomness: every random quantity in this project is a pure
// function of (seed, key words...) through the chain below. No generator
// state is ever stored or advanced, so lookups are random-access and runs
// are reproducible regardless of evaluation order or thread count.

namespace rwre {

// 64-bit finalizer from SplitMix64 (Stafford mix 13). Bijective with full
// avalanche: flipping any input bit flips each output bit with prob ~1/2.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Fold one key word into a running state. Asymmetric in (h, w), so key
// tuples that differ in order or length land in unrelated states.
[[nodiscard]] constexpr std::uint64_t absorb(std::uint64_t h, std::uint64_t w) noexcept {
  return mix64(h ^ (w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

// Signed lattice coordinates to unsigned words, small magnitudes first.
[[nodiscard]] constexpr std::uint64_t zigzag(std::int64_t v) noexcept {
  return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

// Uniform double in [0, 1), 53-bit resolution.
[[nodiscard]] constexpr double u01(std::uint64_t h) noexcept {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Uniform double in (0, 1); never hits an endpoint, safe under log().
[[nodiscard]] constexpr double u01_open(std::uint64_t h) noexcept {
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

// Stream tags keep independent uses of the same seed apart.
inline constexpr std::uint64_t kEnvStream = 0x656e762d73746174ULL;       // "env-stat"
inline constexpr std::uint64_t kWalkerStream = 0x77616c6b2d737472ULL;    // "walk-str"
inline constexpr std::uint64_t kAnnealedStream = 0x616e6e6c2d656e76ULL;  // "annl-env"
inline constexpr std::uint64_t kDirectionStream = 0x6469722d64726177ULL; // "dir-draw"
inline constexpr std::uint64_t kNormalStream = 0x6e6f726d2d647277ULL;    // "norm-drw"

// FNV-1a over bytes; used to fingerprint canonicalized model files.
[[nodiscard]] constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace rwre
