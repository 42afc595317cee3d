#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vcauth/crypto.hpp"
#include "vcauth/image.hpp"
#include "vcauth/pbm.hpp"
#include "vcauth/random_grid.hpp"
#include "vcauth/wire.hpp"

// Share authentication around a trusted server. The server is the only
// party that generates shares; it keeps a signed SHA-256 digest of each
// share's canonical P4 bytes and brokers session keys between users. A
// receiver accepts a transferred share only after (1) the AEAD layer
// authenticated the transfer, (2) the server's signature over the
// digest record verified, and (3) the digest of the received bytes
// matched the record. A fake or tampered share fails step (3) no matter
// how faithfully it mimics genuine share statistics.
//
// Message flow for owner A handing a share to receiver B (server S):
//
//   A -> S   HandshakeInit        plaintext, signed by A
//   S -> A   HandshakeAck         plaintext, signed by S; both now hold K_AS
//   A -> S   CommRequest {A,B,N}  sealed with K_AS
//   S -> A   CommGrant {N+1,K_AB} sealed with K_AS
//   A -> B   ShareTransfer        sealed with K_AB
//   S -> B   DigestNotice         sealed with K_BS: A, K_AB, signed digest
//
// B may receive the ShareTransfer before the DigestNotice; it buffers
// the ciphertext and decides only at verify time.

namespace vcauth {

inline constexpr int kSessionBudget = 64;     // messages per session key
inline constexpr std::size_t kNonceWindow = 1024;

using Bytes = std::vector<std::uint8_t>;

/// Principal name: non-empty, at most 64 bytes, printable ASCII without
/// spaces (names are transcript tokens).
class PrincipalId {
 public:
  explicit PrincipalId(std::string name) : name_(std::move(name)) {
    if (name_.empty()) throw std::invalid_argument("principal name is empty");
    if (name_.size() > 64)
      throw std::invalid_argument("principal name exceeds 64 bytes");
    for (char c : name_)
      if (c <= 0x20 || c > 0x7E)
        throw std::invalid_argument(
            "principal name must be printable ASCII without spaces");
  }

  const std::string& name() const { return name_; }

  friend bool operator==(const PrincipalId&, const PrincipalId&) = default;
  friend auto operator<=>(const PrincipalId&, const PrincipalId&) = default;

 private:
  std::string name_;
};

/// 16 fresh random bytes; the reply rule increments the value as an
/// unsigned big-endian integer mod 2^128.
struct Nonce {
  std::array<std::uint8_t, 16> value{};

  static Nonce random() {
    Nonce n;
    crypto::random_bytes(n.value);
    return n;
  }

  Nonce plus_one() const {
    Nonce out = *this;
    for (int i = 15; i >= 0; --i) {
      if (++out.value[i] != 0) break;
    }
    return out;
  }

  friend bool operator==(const Nonce&, const Nonce&) = default;
};

/// Remembers the most recent `capacity` nonces and rejects reuse.
class NonceWindow {
 public:
  explicit NonceWindow(std::size_t capacity = kNonceWindow)
      : capacity_(capacity) {}

  /// True if the nonce was already in the window (reject); otherwise
  /// records it, evicting the oldest entry when full.
  bool seen_or_insert(const Nonce& nonce) {
    if (seen_.count(nonce.value)) return true;
    seen_.insert(nonce.value);
    order_.push_back(nonce.value);
    if (order_.size() > capacity_) {
      seen_.erase(order_.front());
      order_.pop_front();
    }
    return false;
  }

  std::size_t size() const { return order_.size(); }

 private:
  std::size_t capacity_;
  std::deque<std::array<std::uint8_t, 16>> order_;
  std::set<std::array<std::uint8_t, 16>> seen_;
};

/// Server-held integrity record for one share.
struct DigestRecord {
  PrincipalId owner;
  std::uint16_t share_index = 0;  // 1-based
  crypto::Digest digest{};
  crypto::Signature server_sig{};
};

/// Byte string the server signs: server id, owner, share index, digest,
/// each length-prefixed.
inline Bytes digest_record_signing_input(const PrincipalId& server,
                                         const PrincipalId& owner,
                                         std::uint16_t share_index,
                                         const crypto::Digest& digest) {
  wire::FieldWriter w;
  w.add_string(server.name());
  w.add_string(owner.name());
  w.add_u16(share_index);
  w.add(digest);
  return w.take();
}

inline Bytes encode_digest_record(const DigestRecord& record) {
  wire::FieldWriter w;
  w.add_string(record.owner.name());
  w.add_u16(record.share_index);
  w.add(record.digest);
  w.add(record.server_sig);
  return w.take();
}

namespace detail {

inline PrincipalId read_principal(wire::FieldReader& r) {
  std::string name = r.next_string();
  try {
    return PrincipalId(std::move(name));
  } catch (const std::invalid_argument& e) {
    throw wire::FieldError(std::string("invalid principal id: ") + e.what());
  }
}

}  // namespace detail

inline DigestRecord parse_digest_record(std::span<const std::uint8_t> bytes) {
  wire::FieldReader r(bytes);
  PrincipalId owner = detail::read_principal(r);
  std::uint16_t index = r.next_u16();
  crypto::Digest digest = r.next_fixed<32>();
  crypto::Signature sig = r.next_fixed<64>();
  r.expect_done();
  return DigestRecord{std::move(owner), index, digest, sig};
}

// ---------------------------------------------------------------------------
// Message bodies (the field sequences inside each frame)

struct HandshakeInitMsg {
  PrincipalId user;
  crypto::VerifyKey user_key;
  std::array<std::uint8_t, 32> material{};
  Nonce nonce;
  crypto::Signature sig{};
};

struct HandshakeAckMsg {
  PrincipalId server;
  crypto::VerifyKey server_key;
  std::array<std::uint8_t, 32> material{};
  Nonce nonce;
  crypto::Signature sig{};
};

struct CommRequestMsg {
  PrincipalId requester;
  PrincipalId peer;
  Nonce nonce;
};

struct CommGrantMsg {
  Nonce nonce_reply;
  crypto::AeadKey session_key;
};

struct ShareTransferMsg {
  PrincipalId sender;
  Bytes share_bytes;  // canonical P4
};

struct DigestNoticeMsg {
  PrincipalId owner;
  crypto::AeadKey session_key;  // the owner<->receiver pair key
  DigestRecord record;
};

/// What the requester signs in a HandshakeInit.
inline Bytes handshake_init_transcript(const PrincipalId& user,
                                       const PrincipalId& server,
                                       const std::array<std::uint8_t, 32>& material,
                                       const Nonce& nonce) {
  wire::FieldWriter w;
  w.add_string(user.name());
  w.add_string(server.name());
  w.add(material);
  w.add(nonce.value);
  return w.take();
}

/// What the server signs in a HandshakeAck: both ids, both nonces and
/// both key-material contributions.
inline Bytes handshake_ack_transcript(
    const PrincipalId& user, const PrincipalId& server,
    const std::array<std::uint8_t, 32>& client_material,
    const Nonce& client_nonce,
    const std::array<std::uint8_t, 32>& server_material,
    const Nonce& server_nonce) {
  wire::FieldWriter w;
  w.add_string(user.name());
  w.add_string(server.name());
  w.add(client_material);
  w.add(client_nonce.value);
  w.add(server_material);
  w.add(server_nonce.value);
  return w.take();
}

/// K_{user,S} = SHA-256(client material || server material).
inline crypto::AeadKey derive_session_key(
    const std::array<std::uint8_t, 32>& client_material,
    const std::array<std::uint8_t, 32>& server_material) {
  Bytes joined;
  joined.insert(joined.end(), client_material.begin(), client_material.end());
  joined.insert(joined.end(), server_material.begin(), server_material.end());
  crypto::Digest d = crypto::sha256(joined);
  crypto::AeadKey key;
  std::copy(d.begin(), d.end(), key.bytes.begin());
  return key;
}

// ---------------------------------------------------------------------------
// Sealing helpers

/// Encrypted frame: payload = 12-byte nonce || ciphertext. The frame
/// header bytes ride along as AEAD associated data, so header tampering
/// also fails authentication.
inline Bytes seal_frame(wire::MessageType type,
                        const crypto::AeadKey& key,
                        std::span<const std::uint8_t> plaintext) {
  crypto::AeadNonce nonce = crypto::random_aead_nonce();
  std::array<std::uint8_t, 3> ad{wire::kProtocolVersion,
                                 static_cast<std::uint8_t>(type),
                                 crypto::kSuiteId};
  Bytes ct = crypto::aead_seal(key, nonce, plaintext, ad);
  wire::Frame frame;
  frame.type = type;
  frame.suite = crypto::kSuiteId;
  frame.payload.assign(nonce.bytes.begin(), nonce.bytes.end());
  frame.payload.insert(frame.payload.end(), ct.begin(), ct.end());
  return wire::encode_frame(frame);
}

inline std::optional<Bytes> open_frame(const crypto::AeadKey& key,
                                       const wire::Frame& frame) {
  if (frame.payload.size() < 12) return std::nullopt;
  crypto::AeadNonce nonce;
  std::copy(frame.payload.begin(), frame.payload.begin() + 12,
            nonce.bytes.begin());
  std::array<std::uint8_t, 3> ad{frame.version,
                                 static_cast<std::uint8_t>(frame.type),
                                 frame.suite};
  return crypto::aead_open(
      key, nonce,
      std::span<const std::uint8_t>(frame.payload).subspan(12), ad);
}

inline Bytes plain_frame(wire::MessageType type,
                         std::span<const std::uint8_t> payload) {
  wire::Frame frame;
  frame.type = type;
  frame.suite = crypto::kSuiteId;
  frame.payload.assign(payload.begin(), payload.end());
  return wire::encode_frame(frame);
}

// ---------------------------------------------------------------------------
// Verdicts

enum class Verdict {
  Accepted,
  DigestMismatch,
  BadSignature,
  Replay,
  AeadFailure,
  ProtocolError,
};

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Accepted: return "accepted";
    case Verdict::DigestMismatch: return "DigestMismatch";
    case Verdict::BadSignature: return "BadSignature";
    case Verdict::Replay: return "Replay";
    case Verdict::AeadFailure: return "AeadFailure";
    case Verdict::ProtocolError: return "ProtocolError";
  }
  return "ProtocolError";
}

inline Verdict verdict_for_error_code(std::uint8_t code) {
  switch (code) {
    case wire::errc::kReplay: return Verdict::Replay;
    case wire::errc::kAeadFailure: return Verdict::AeadFailure;
    case wire::errc::kBadSignature: return Verdict::BadSignature;
    default: return Verdict::ProtocolError;
  }
}

struct Receipt {
  Verdict verdict = Verdict::ProtocolError;
  std::string detail;
};

struct ReconstructOutcome {
  Verdict verdict = Verdict::ProtocolError;
  std::string detail;
  std::optional<BinaryImage> image;
  std::optional<crypto::Digest> expected_digest;  // from the signed record
  std::optional<crypto::Digest> computed_digest;  // over received bytes
};

namespace detail {

struct BoundedKey {
  crypto::AeadKey key;
  int remaining = kSessionBudget;
};

inline std::pair<PrincipalId, PrincipalId> pair_of(const PrincipalId& a,
                                                   const PrincipalId& b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Server

/// The trusted server: principal registry, share generation, digest
/// registry, session brokering. handle_frame() is the wire entry point
/// and always returns a reply frame (possibly an error frame).
class Server {
 public:
  Server(PrincipalId id, crypto::KeyPair keys)
      : id_(std::move(id)), keys_(std::move(keys)) {}

  const PrincipalId& id() const { return id_; }
  const crypto::VerifyKey& public_key() const { return keys_.pub; }

  void register_principal(const PrincipalId& who,
                          const crypto::VerifyKey& key) {
    if (who == id_)
      throw std::invalid_argument("cannot register the server id");
    if (registry_.count(who))
      throw std::invalid_argument("principal already registered: " +
                                  who.name());
    registry_.emplace(who, key);
  }

  bool is_registered(const PrincipalId& who) const {
    return registry_.count(who) != 0;
  }

  struct Provisioned {
    PrincipalId owner;
    std::uint32_t share_index;  // 1-based
    BinaryImage share;
    DigestRecord record;
  };

  /// Generate the ShareSet, digest and sign every share, retain all,
  /// and hand back the per-owner deliveries.
  std::vector<Provisioned> provision(const BinaryImage& secret,
                                     const SchemeParams& params,
                                     const std::vector<PrincipalId>& owners,
                                     RandomSource& rng) {
    if (owners.size() != params.n)
      throw std::invalid_argument(
          "provision: owner count does not match share count n=" +
          std::to_string(params.n));
    std::set<PrincipalId> seen;
    for (const PrincipalId& owner : owners) {
      if (!is_registered(owner))
        throw std::invalid_argument("provision: unregistered owner: " +
                                    owner.name());
      if (!seen.insert(owner).second)
        throw std::invalid_argument("provision: duplicate owner: " +
                                    owner.name());
    }
    if (secret.width() != params.width || secret.height() != params.height)
      throw std::invalid_argument("provision: secret does not match params");

    ShareSet set = params.kind == SchemeKind::TwoOfN
                       ? split_2n(secret, params.n, rng)
                       : split_chain_nn(secret, params.n, rng);
    std::vector<Provisioned> out;
    out.reserve(params.n);
    for (std::uint32_t i = 1; i <= params.n; ++i) {
      const PrincipalId& owner = owners[i - 1];
      crypto::Digest digest = crypto::sha256(canonical_p4(set.share(i)));
      DigestRecord record{owner, static_cast<std::uint16_t>(i), digest, {}};
      record.server_sig = crypto::sign(
          keys_.sec,
          digest_record_signing_input(id_, owner, record.share_index, digest));
      records_.insert_or_assign(owner, record);
      out.push_back(Provisioned{owner, i, set.share(i), std::move(record)});
    }
    provisioned_ = std::move(set);
    owners_ = owners;
    return out;
  }

  /// Wire entry point; `from` identifies the channel the frame arrived
  /// on. Returns the reply frame.
  Bytes handle_frame(const PrincipalId& from,
                     std::span<const std::uint8_t> bytes) {
    auto decoded = wire::decode_frame(bytes);
    if (auto* err = std::get_if<wire::WireError>(&decoded))
      return wire::encode_error_frame(*err, crypto::kSuiteId);
    const wire::Frame& frame = std::get<wire::Frame>(decoded);
    if (frame.suite != crypto::kSuiteId)
      return error_reply(wire::errc::kBadField, "unknown crypto suite id");
    switch (frame.type) {
      case wire::MessageType::HandshakeInit:
        return handle_handshake_init(from, frame);
      case wire::MessageType::CommRequest:
        return handle_comm_request(from, frame);
      default:
        return error_reply(wire::errc::kUnexpected,
                           "server does not accept " +
                               wire::to_string(frame.type));
    }
  }

  /// Push message S -> receiver carrying the owner's signed digest and
  /// the owner<->receiver pair key. The digest always comes from the
  /// server's own registry, never from anything a user sent.
  Bytes make_digest_notice(const PrincipalId& owner,
                           const PrincipalId& receiver) {
    auto rec = records_.find(owner);
    if (rec == records_.end())
      throw std::invalid_argument("no digest record for owner " +
                                  owner.name());
    return make_digest_notice_with_record(owner, receiver, rec->second);
  }

  /// Same frame but with a caller-supplied record. Exists for harness
  /// use (e.g. exercising receivers against forged records); the normal
  /// path is make_digest_notice.
  Bytes make_digest_notice_with_record(const PrincipalId& owner,
                                       const PrincipalId& receiver,
                                       const DigestRecord& record) {
    auto pk = pair_keys_.find(detail::pair_of(owner, receiver));
    if (pk == pair_keys_.end())
      throw std::invalid_argument("no pair session between " + owner.name() +
                                  " and " + receiver.name());
    auto session = sessions_.find(receiver);
    if (session == sessions_.end())
      throw std::invalid_argument("receiver has no server session: " +
                                  receiver.name());
    if (session->second.remaining <= 0)
      throw std::invalid_argument("receiver session key expired");
    --session->second.remaining;
    wire::FieldWriter w;
    w.add_string(owner.name());
    w.add(pk->second.bytes);
    w.add(encode_digest_record(record));
    return seal_frame(wire::MessageType::DigestNotice, session->second.key,
                      w.bytes());
  }

  // Introspection for tests and the scenario harness.
  std::optional<crypto::AeadKey> session_key_with(const PrincipalId& who) const {
    auto it = sessions_.find(who);
    if (it == sessions_.end()) return std::nullopt;
    return it->second.key;
  }

  std::optional<crypto::AeadKey> pair_key(const PrincipalId& a,
                                          const PrincipalId& b) const {
    auto it = pair_keys_.find(detail::pair_of(a, b));
    if (it == pair_keys_.end()) return std::nullopt;
    return it->second;
  }

  const std::map<PrincipalId, DigestRecord>& digest_records() const {
    return records_;
  }

  const std::optional<ShareSet>& provisioned_shares() const {
    return provisioned_;
  }

  std::size_t nonce_window_size() const { return nonce_window_.size(); }

 private:
  Bytes error_reply(std::uint8_t code, const std::string& detail) {
    return wire::encode_error_frame(wire::WireError{code, detail},
                                    crypto::kSuiteId);
  }

  Bytes handle_handshake_init(const PrincipalId& from,
                              const wire::Frame& frame) {
    std::optional<HandshakeInitMsg> parsed;
    try {
      wire::FieldReader r(frame.payload);
      parsed = HandshakeInitMsg{detail::read_principal(r),
                                crypto::VerifyKey{r.next_fixed<32>()},
                                r.next_fixed<32>(), Nonce{r.next_fixed<16>()},
                                r.next_fixed<64>()};
      r.expect_done();
    } catch (const wire::FieldError& e) {
      return error_reply(wire::errc::kBadField, e.what());
    }
    const HandshakeInitMsg& msg = *parsed;
    if (msg.user != from)
      return error_reply(wire::errc::kUnexpected,
                         "handshake init not from its sender");
    auto reg = registry_.find(msg.user);
    if (reg == registry_.end())
      return error_reply(wire::errc::kUnknownPrincipal,
                         "unknown principal: " + msg.user.name());
    if (!(msg.user_key == reg->second))
      return error_reply(wire::errc::kBadSignature,
                         "carried public key differs from registration");
    Bytes transcript =
        handshake_init_transcript(msg.user, id_, msg.material, msg.nonce);
    if (!crypto::verify(reg->second, transcript, msg.sig))
      return error_reply(wire::errc::kBadSignature,
                         "handshake signature invalid");
    if (nonce_window_.seen_or_insert(msg.nonce))
      return error_reply(wire::errc::kReplay, "handshake nonce replayed");

    std::array<std::uint8_t, 32> server_material{};
    crypto::random_bytes(server_material);
    Nonce server_nonce = Nonce::random();
    crypto::AeadKey key = derive_session_key(msg.material, server_material);
    sessions_.insert_or_assign(msg.user,
                               detail::BoundedKey{key, kSessionBudget});

    crypto::Signature sig = crypto::sign(
        keys_.sec,
        handshake_ack_transcript(msg.user, id_, msg.material, msg.nonce,
                                 server_material, server_nonce));
    wire::FieldWriter w;
    w.add_string(id_.name());
    w.add(keys_.pub.bytes);
    w.add(server_material);
    w.add(server_nonce.value);
    w.add(sig);
    return plain_frame(wire::MessageType::HandshakeAck, w.bytes());
  }

  Bytes handle_comm_request(const PrincipalId& from,
                            const wire::Frame& frame) {
    auto session = sessions_.find(from);
    if (session == sessions_.end())
      return error_reply(wire::errc::kNoSession,
                         "no session key with " + from.name());
    if (session->second.remaining <= 0)
      return error_reply(wire::errc::kSessionExpired, "session key expired");
    --session->second.remaining;
    auto plaintext = open_frame(session->second.key, frame);
    if (!plaintext)
      return error_reply(wire::errc::kAeadFailure,
                         "request failed authentication");
    std::optional<CommRequestMsg> parsed;
    try {
      wire::FieldReader r(*plaintext);
      parsed = CommRequestMsg{detail::read_principal(r),
                              detail::read_principal(r),
                              Nonce{r.next_fixed<16>()}};
      r.expect_done();
    } catch (const wire::FieldError& e) {
      return error_reply(wire::errc::kBadField, e.what());
    }
    const CommRequestMsg& msg = *parsed;
    if (msg.requester != from)
      return error_reply(wire::errc::kUnexpected,
                         "requester field does not match channel");
    if (!is_registered(msg.peer))
      return error_reply(wire::errc::kUnknownPrincipal,
                         "unknown peer: " + msg.peer.name());
    if (nonce_window_.seen_or_insert(msg.nonce))
      return error_reply(wire::errc::kReplay, "request nonce replayed");

    crypto::AeadKey pair = crypto::random_aead_key();
    pair_keys_.insert_or_assign(detail::pair_of(msg.requester, msg.peer),
                                pair);
    if (session->second.remaining <= 0)
      return error_reply(wire::errc::kSessionExpired, "session key expired");
    --session->second.remaining;
    wire::FieldWriter w;
    w.add(msg.nonce.plus_one().value);
    w.add(pair.bytes);
    return seal_frame(wire::MessageType::CommGrant, session->second.key,
                      w.bytes());
  }

  PrincipalId id_;
  crypto::KeyPair keys_;
  std::map<PrincipalId, crypto::VerifyKey> registry_;
  std::map<PrincipalId, detail::BoundedKey> sessions_;
  std::map<std::pair<PrincipalId, PrincipalId>, crypto::AeadKey> pair_keys_;
  std::map<PrincipalId, DigestRecord> records_;
  std::optional<ShareSet> provisioned_;
  std::vector<PrincipalId> owners_;
  NonceWindow nonce_window_;
};

// ---------------------------------------------------------------------------
// Client

/// A user-side protocol endpoint. Parse failures and rejected replies
/// surface as Receipt verdicts; calling an operation whose
/// prerequisites are missing (no handshake, no pair key, no share) is a
/// caller bug and throws std::logic_error.
class Client {
 public:
  Client(PrincipalId id, crypto::KeyPair keys, PrincipalId server_id,
         crypto::VerifyKey server_key)
      : id_(std::move(id)),
        keys_(std::move(keys)),
        server_id_(std::move(server_id)),
        server_key_(server_key) {}

  const PrincipalId& id() const { return id_; }
  const crypto::VerifyKey& public_key() const { return keys_.pub; }

  void adopt_share(const BinaryImage& share, std::uint32_t index,
                   std::optional<DigestRecord> record = std::nullopt) {
    share_ = share;
    share_index_ = index;
    own_record_ = std::move(record);
  }

  const std::optional<BinaryImage>& own_share() const { return share_; }
  std::uint32_t own_share_index() const { return share_index_; }
  const std::optional<DigestRecord>& own_record() const { return own_record_; }

  /// Replaces the bytes make_share_transfer() sends. How a cheating
  /// sender injects a fake grid.
  void override_outgoing_share(Bytes share_bytes) {
    outgoing_override_ = std::move(share_bytes);
  }

  Bytes make_handshake_init() {
    pending_material_.emplace();
    crypto::random_bytes(*pending_material_);
    pending_hs_nonce_ = Nonce::random();
    crypto::Signature sig = crypto::sign(
        keys_.sec, handshake_init_transcript(id_, server_id_,
                                             *pending_material_,
                                             *pending_hs_nonce_));
    wire::FieldWriter w;
    w.add_string(id_.name());
    w.add(keys_.pub.bytes);
    w.add(*pending_material_);
    w.add(pending_hs_nonce_->value);
    w.add(sig);
    return plain_frame(wire::MessageType::HandshakeInit, w.bytes());
  }

  Receipt process_handshake_ack(std::span<const std::uint8_t> bytes) {
    auto frame = expect_frame(bytes, wire::MessageType::HandshakeAck);
    if (auto* receipt = std::get_if<Receipt>(&frame)) return *receipt;
    const wire::Frame& f = std::get<wire::Frame>(frame);
    if (!pending_material_ || !pending_hs_nonce_)
      return Receipt{Verdict::ProtocolError, "no handshake in flight"};
    std::optional<HandshakeAckMsg> parsed;
    try {
      wire::FieldReader r(f.payload);
      parsed = HandshakeAckMsg{detail::read_principal(r),
                               crypto::VerifyKey{r.next_fixed<32>()},
                               r.next_fixed<32>(), Nonce{r.next_fixed<16>()},
                               r.next_fixed<64>()};
      r.expect_done();
    } catch (const wire::FieldError& e) {
      return Receipt{Verdict::ProtocolError, e.what()};
    }
    const HandshakeAckMsg& msg = *parsed;
    if (msg.server != server_id_ || !(msg.server_key == server_key_)) {
      abort_handshake();
      return Receipt{Verdict::BadSignature, "server identity mismatch"};
    }
    Bytes transcript = handshake_ack_transcript(
        id_, server_id_, *pending_material_, *pending_hs_nonce_, msg.material,
        msg.nonce);
    if (!crypto::verify(server_key_, transcript, msg.sig)) {
      abort_handshake();
      return Receipt{Verdict::BadSignature, "handshake signature invalid"};
    }
    session_ = detail::BoundedKey{
        derive_session_key(*pending_material_, msg.material), kSessionBudget};
    abort_handshake();  // clears pending state only
    return Receipt{Verdict::Accepted, "session established"};
  }

  Bytes make_comm_request(const PrincipalId& peer) {
    require_session();
    pending_comm_nonce_ = Nonce::random();
    pending_comm_peer_ = peer;
    wire::FieldWriter w;
    w.add_string(id_.name());
    w.add_string(peer.name());
    w.add(pending_comm_nonce_->value);
    --session_->remaining;
    return seal_frame(wire::MessageType::CommRequest, session_->key,
                      w.bytes());
  }

  Receipt process_comm_grant(std::span<const std::uint8_t> bytes) {
    auto frame = expect_frame(bytes, wire::MessageType::CommGrant);
    if (auto* receipt = std::get_if<Receipt>(&frame)) return *receipt;
    const wire::Frame& f = std::get<wire::Frame>(frame);
    require_session();
    if (!pending_comm_nonce_ || !pending_comm_peer_)
      return Receipt{Verdict::ProtocolError, "no channel request in flight"};
    --session_->remaining;
    auto plaintext = open_frame(session_->key, f);
    if (!plaintext)
      return Receipt{Verdict::AeadFailure, "grant failed authentication"};
    try {
      wire::FieldReader r(*plaintext);
      CommGrantMsg msg{Nonce{r.next_fixed<16>()},
                       crypto::AeadKey{r.next_fixed<32>()}};
      r.expect_done();
      if (!(msg.nonce_reply == pending_comm_nonce_->plus_one()))
        return Receipt{Verdict::ProtocolError,
                       "nonce reply is not request nonce + 1"};
      pair_keys_.insert_or_assign(
          *pending_comm_peer_,
          detail::BoundedKey{msg.session_key, kSessionBudget});
      pending_comm_nonce_.reset();
      pending_comm_peer_.reset();
      return Receipt{Verdict::Accepted, "pair key granted"};
    } catch (const wire::FieldError& e) {
      return Receipt{Verdict::ProtocolError, e.what()};
    }
  }

  Bytes make_share_transfer(const PrincipalId& peer) {
    auto key = pair_keys_.find(peer);
    if (key == pair_keys_.end())
      throw std::logic_error("no pair key with " + peer.name() +
                             "; request a channel first");
    if (key->second.remaining <= 0)
      throw std::logic_error("pair key with " + peer.name() + " expired");
    Bytes share_bytes;
    if (outgoing_override_) {
      share_bytes = *outgoing_override_;
    } else {
      if (!share_) throw std::logic_error("no share adopted");
      share_bytes = canonical_p4(*share_);
    }
    wire::FieldWriter w;
    w.add_string(id_.name());
    w.add(share_bytes);
    --key->second.remaining;
    return seal_frame(wire::MessageType::ShareTransfer, key->second.key,
                      w.bytes());
  }

  /// Buffers the ciphertext; decryption waits for the DigestNotice that
  /// carries the pair key.
  Receipt process_share_transfer(std::span<const std::uint8_t> bytes) {
    auto frame = expect_frame(bytes, wire::MessageType::ShareTransfer);
    if (auto* receipt = std::get_if<Receipt>(&frame)) return *receipt;
    buffered_transfer_ = std::get<wire::Frame>(frame);
    return Receipt{Verdict::Accepted, "transfer buffered until digest notice"};
  }

  Receipt process_digest_notice(std::span<const std::uint8_t> bytes) {
    auto frame = expect_frame(bytes, wire::MessageType::DigestNotice);
    if (auto* receipt = std::get_if<Receipt>(&frame)) return *receipt;
    const wire::Frame& f = std::get<wire::Frame>(frame);
    require_session();
    --session_->remaining;
    auto plaintext = open_frame(session_->key, f);
    if (!plaintext)
      return Receipt{Verdict::AeadFailure, "notice failed authentication"};
    try {
      wire::FieldReader r(*plaintext);
      DigestNoticeMsg msg{detail::read_principal(r),
                          crypto::AeadKey{r.next_fixed<32>()},
                          parse_digest_record(r.next())};
      r.expect_done();
      notice_ = NoticeData{std::move(msg.owner),
                           detail::BoundedKey{msg.session_key, kSessionBudget},
                           std::move(msg.record)};
      return Receipt{Verdict::Accepted, "digest notice stored"};
    } catch (const wire::FieldError& e) {
      return Receipt{Verdict::ProtocolError, e.what()};
    }
  }

  /// The §-defining check: authenticate the buffered transfer with the
  /// notice's pair key, verify the server's signature over the digest
  /// record FIRST, then compare digests; only on a match stack the two
  /// shares.
  ReconstructOutcome verify_and_reconstruct() {
    ReconstructOutcome out;
    if (!share_) {
      out.detail = "no own share adopted";
      return out;
    }
    if (!notice_) {
      out.detail = "no digest notice received";
      return out;
    }
    if (!buffered_transfer_) {
      out.detail = "no share transfer received";
      return out;
    }
    if (notice_->pair_key.remaining <= 0) {
      out.detail = "pair key expired";
      return out;
    }
    --notice_->pair_key.remaining;
    auto plaintext = open_frame(notice_->pair_key.key, *buffered_transfer_);
    if (!plaintext) {
      out.verdict = Verdict::AeadFailure;
      out.detail = "share transfer failed authentication";
      return out;
    }
    std::optional<ShareTransferMsg> msg;
    try {
      wire::FieldReader r(*plaintext);
      msg = ShareTransferMsg{detail::read_principal(r), r.next()};
      r.expect_done();
    } catch (const wire::FieldError& e) {
      out.detail = std::string("malformed share transfer: ") + e.what();
      return out;
    }
    const PrincipalId& sender = msg->sender;
    const Bytes& share_bytes = msg->share_bytes;
    if (sender != notice_->owner || !(notice_->record.owner == sender)) {
      out.detail = "transfer sender differs from digest owner";
      return out;
    }
    const DigestRecord& record = notice_->record;
    Bytes signed_input = digest_record_signing_input(
        server_id_, record.owner, record.share_index, record.digest);
    if (!crypto::verify(server_key_, signed_input, record.server_sig)) {
      out.verdict = Verdict::BadSignature;
      out.detail = "digest record signature invalid";
      return out;
    }
    out.expected_digest = record.digest;
    crypto::Digest computed = crypto::sha256(share_bytes);
    out.computed_digest = computed;
    if (computed != record.digest) {
      out.verdict = Verdict::DigestMismatch;
      out.detail = "digest mismatch: expected " +
                   crypto::to_hex(record.digest) + ", computed " +
                   crypto::to_hex(computed);
      return out;
    }
    try {
      PbmFile received = load_pbm(share_bytes);
      if (!received.image.same_dimensions(*share_)) {
        out.detail = "received share dimensions differ from own share";
        return out;
      }
      out.image = stack({*share_, received.image});
      out.verdict = Verdict::Accepted;
      out.detail = "share authentic; reconstruction produced";
      return out;
    } catch (const PbmParseError& e) {
      out.detail = std::string("received share unparsable: ") + e.what();
      return out;
    }
  }

  // Introspection for tests and the harness.
  std::optional<crypto::AeadKey> session_key() const {
    if (!session_) return std::nullopt;
    return session_->key;
  }

  std::optional<crypto::AeadKey> pair_key_with(const PrincipalId& peer) const {
    auto it = pair_keys_.find(peer);
    if (it == pair_keys_.end()) return std::nullopt;
    return it->second.key;
  }

  std::optional<crypto::AeadKey> notice_pair_key() const {
    if (!notice_) return std::nullopt;
    return notice_->pair_key.key;
  }

 private:
  struct NoticeData {
    PrincipalId owner;
    detail::BoundedKey pair_key;
    DigestRecord record;
  };

  void require_session() {
    if (!session_)
      throw std::logic_error("no session key with server; handshake first");
    if (session_->remaining <= 0)
      throw std::logic_error("server session key expired");
  }

  void abort_handshake() {
    pending_material_.reset();
    pending_hs_nonce_.reset();
  }

  /// Decode, map error frames to receipts, check the expected type.
  std::variant<wire::Frame, Receipt> expect_frame(
      std::span<const std::uint8_t> bytes, wire::MessageType want) {
    auto decoded = wire::decode_frame(bytes);
    if (auto* err = std::get_if<wire::WireError>(&decoded))
      return Receipt{Verdict::ProtocolError,
                     "malformed frame: " + err->detail};
    wire::Frame& frame = std::get<wire::Frame>(decoded);
    if (frame.type == wire::MessageType::Error) {
      wire::WireError err = wire::parse_error_frame(frame);
      return Receipt{verdict_for_error_code(err.code),
                     "rejected: " + err.detail};
    }
    if (frame.type != want)
      return Receipt{Verdict::ProtocolError,
                     "expected " + wire::to_string(want) + ", got " +
                         wire::to_string(frame.type)};
    if (frame.suite != crypto::kSuiteId)
      return Receipt{Verdict::ProtocolError, "unknown crypto suite id"};
    return std::move(frame);
  }

  PrincipalId id_;
  crypto::KeyPair keys_;
  PrincipalId server_id_;
  crypto::VerifyKey server_key_;

  std::optional<BinaryImage> share_;
  std::uint32_t share_index_ = 0;
  std::optional<DigestRecord> own_record_;
  std::optional<Bytes> outgoing_override_;

  std::optional<std::array<std::uint8_t, 32>> pending_material_;
  std::optional<Nonce> pending_hs_nonce_;
  std::optional<detail::BoundedKey> session_;

  std::optional<Nonce> pending_comm_nonce_;
  std::optional<PrincipalId> pending_comm_peer_;
  std::map<PrincipalId, detail::BoundedKey> pair_keys_;

  std::optional<wire::Frame> buffered_transfer_;
  std::optional<NoticeData> notice_;
};

}  // namespace vcauth
