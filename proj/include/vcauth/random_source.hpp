#pragma once

#include <sodium.h>

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>

// Bit source for grid generation. Two backends:
//   - seeded: mt19937_64, bit-identical replay across platforms. Engine
//     words are consumed most-significant bit first; this order is part
//     of the determinism contract.
//   - secure: libsodium CSPRNG, for real deployments where a predictable
//     grid would break the scheme.
// Grid operations draw bits row-major; multi-share operations draw
// share-major (all of G_1, then G_2, ...).

namespace vcauth {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline void sodium_ready() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialization failed");
}

}  // namespace detail

class RandomSource {
 public:
  static RandomSource seeded(std::uint64_t seed) {
    RandomSource src;
    src.seed_ = seed;
    src.engine_.seed(seed);
    return src;
  }

  static RandomSource secure() {
    detail::sodium_ready();
    RandomSource src;
    src.secure_ = true;
    return src;
  }

  std::uint8_t next_bit() {
    if (bits_left_ == 0) refill();
    std::uint8_t bit = static_cast<std::uint8_t>(buffer_ >> 63);
    buffer_ <<= 1;
    --bits_left_;
    ++consumed_;
    return bit;
  }

  /// Number of bits drawn so far (the stream position).
  std::uint64_t bits_consumed() const { return consumed_; }

  bool is_secure() const { return secure_; }
  std::optional<std::uint64_t> seed() const { return seed_; }

  /// Independent child stream; seeded sources derive the child seed from
  /// (seed, stream), secure sources hand out fresh secure sources.
  RandomSource fork(std::uint64_t stream) const {
    if (secure_) return secure();
    return seeded(detail::splitmix64(*seed_ ^
                                     (0x9E3779B97F4A7C15ull * (stream + 1))));
  }

 private:
  RandomSource() = default;

  void refill() {
    if (secure_) {
      randombytes_buf(&buffer_, sizeof(buffer_));
    } else {
      buffer_ = engine_();
    }
    bits_left_ = 64;
  }

  std::optional<std::uint64_t> seed_;
  std::mt19937_64 engine_;
  bool secure_ = false;
  std::uint64_t buffer_ = 0;
  int bits_left_ = 0;
  std::uint64_t consumed_ = 0;
};

}  // namespace vcauth
