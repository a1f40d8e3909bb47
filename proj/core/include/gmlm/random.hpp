#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace gmlm {

// Seed used by every randomized entry point when the caller gives none.
inline constexpr std::uint64_t kDefaultSeed = 20181126;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds a tuple of identifiers into one stream key. Streams are a pure
// function of the tuple, so replicate results do not depend on the order in
// which replicates are executed.
inline constexpr std::uint64_t stream_key(
    std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

inline std::mt19937_64 make_stream(
    std::initializer_list<std::uint64_t> parts) {
  return std::mt19937_64(stream_key(parts));
}

// FNV-1a; stable across platforms, used to key streams by string labels.
inline constexpr std::uint64_t hash_label(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stream purposes, so that draws for different tasks never coincide.
enum class StreamPurpose : std::uint64_t {
  weight_matrix = 1,
  primitive_covariance = 2,
  two_sample_draw = 3,
  placebo_draw = 4,
  synthetic_population = 5,
  synthetic_panel = 6,
};

inline constexpr std::uint64_t purpose(StreamPurpose p) noexcept {
  return static_cast<std::uint64_t>(p);
}

}  // namespace gmlm
