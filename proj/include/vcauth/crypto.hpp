#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcauth/random_source.hpp"  // detail::sodium_ready

// Crypto suite 0x01: SHA-256 digests, ChaCha20-Poly1305 (IETF, 12-byte
// nonce) AEAD, Ed25519 signatures. Thin wrappers over libsodium; the
// suite id travels in every wire frame so the choice is pinned.

namespace vcauth::crypto {

inline constexpr std::uint8_t kSuiteId = 0x01;

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;

struct AeadKey {
  std::array<std::uint8_t, 32> bytes{};
  friend bool operator==(const AeadKey&, const AeadKey&) = default;
};

struct AeadNonce {
  std::array<std::uint8_t, 12> bytes{};
  friend bool operator==(const AeadNonce&, const AeadNonce&) = default;
};

struct VerifyKey {
  std::array<std::uint8_t, 32> bytes{};
  friend bool operator==(const VerifyKey&, const VerifyKey&) = default;
};

struct SigningKey {
  std::array<std::uint8_t, 64> bytes{};
};

struct KeyPair {
  VerifyKey pub;
  SigningKey sec;
};

inline Digest sha256(std::span<const std::uint8_t> data) {
  detail::sodium_ready();
  Digest out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

inline void random_bytes(std::span<std::uint8_t> out) {
  detail::sodium_ready();
  randombytes_buf(out.data(), out.size());
}

inline AeadKey random_aead_key() {
  AeadKey k;
  random_bytes(k.bytes);
  return k;
}

inline AeadNonce random_aead_nonce() {
  AeadNonce n;
  random_bytes(n.bytes);
  return n;
}

/// Ciphertext with the 16-byte tag appended.
inline Bytes aead_seal(const AeadKey& key, const AeadNonce& nonce,
                       std::span<const std::uint8_t> plaintext,
                       std::span<const std::uint8_t> associated = {}) {
  detail::sodium_ready();
  Bytes out(plaintext.size() + crypto_aead_chacha20poly1305_ietf_ABYTES);
  unsigned long long out_len = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(
      out.data(), &out_len, plaintext.data(), plaintext.size(),
      associated.data(), associated.size(), nullptr, nonce.bytes.data(),
      key.bytes.data());
  out.resize(out_len);
  return out;
}

/// Empty optional when authentication fails (tampered or wrong key).
inline std::optional<Bytes> aead_open(const AeadKey& key,
                                      const AeadNonce& nonce,
                                      std::span<const std::uint8_t> ciphertext,
                                      std::span<const std::uint8_t> associated = {}) {
  detail::sodium_ready();
  if (ciphertext.size() < crypto_aead_chacha20poly1305_ietf_ABYTES)
    return std::nullopt;
  Bytes out(ciphertext.size() - crypto_aead_chacha20poly1305_ietf_ABYTES);
  unsigned long long out_len = 0;
  int rc = crypto_aead_chacha20poly1305_ietf_decrypt(
      out.data(), &out_len, nullptr, ciphertext.data(), ciphertext.size(),
      associated.data(), associated.size(), nonce.bytes.data(),
      key.bytes.data());
  if (rc != 0) return std::nullopt;
  out.resize(out_len);
  return out;
}

inline KeyPair generate_keypair() {
  detail::sodium_ready();
  KeyPair kp;
  crypto_sign_keypair(kp.pub.bytes.data(), kp.sec.bytes.data());
  return kp;
}

inline KeyPair keypair_from_seed(const std::array<std::uint8_t, 32>& seed) {
  detail::sodium_ready();
  KeyPair kp;
  crypto_sign_seed_keypair(kp.pub.bytes.data(), kp.sec.bytes.data(),
                           seed.data());
  return kp;
}

inline Signature sign(const SigningKey& key,
                      std::span<const std::uint8_t> message) {
  detail::sodium_ready();
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(),
                       key.bytes.data());
  return sig;
}

inline bool verify(const VerifyKey& key, std::span<const std::uint8_t> message,
                   const Signature& sig) {
  detail::sodium_ready();
  return crypto_sign_verify_detached(sig.data(), message.data(),
                                     message.size(), key.bytes.data()) == 0;
}

inline std::string to_hex(std::span<const std::uint8_t> data) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0F]);
  }
  return out;
}

inline Bytes from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("odd hex length");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("invalid hex digit");
  };
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) |
                                       nibble(hex[2 * i + 1]));
  return out;
}

}  // namespace vcauth::crypto
