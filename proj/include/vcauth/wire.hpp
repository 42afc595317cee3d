#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

// Wire frame, bit-exact:
//
//   4-byte big-endian length | version (0x01) | type | suite id | payload
//
// The length counts everything after itself (version byte onward).
// Payload fields are length-prefixed (2-byte big-endian) octet strings
// in the order each message lists them; encrypted message payloads are
// the 12-byte AEAD nonce followed by the raw ciphertext. A frame with
// an unknown version or type is answered with an error frame: type
// 0xFF, payload = one error code byte plus ASCII detail.

namespace vcauth::wire {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kProtocolVersion = 0x01;

enum class MessageType : std::uint8_t {
  HandshakeInit = 0x01,
  HandshakeAck = 0x02,
  CommRequest = 0x03,
  CommGrant = 0x04,
  ShareTransfer = 0x05,
  DigestNotice = 0x06,
  Error = 0xFF,
};

inline bool known_type(std::uint8_t t) {
  return (t >= 0x01 && t <= 0x06) || t == 0xFF;
}

inline std::string to_string(MessageType t) {
  switch (t) {
    case MessageType::HandshakeInit: return "HandshakeInit";
    case MessageType::HandshakeAck: return "HandshakeAck";
    case MessageType::CommRequest: return "CommRequest";
    case MessageType::CommGrant: return "CommGrant";
    case MessageType::ShareTransfer: return "ShareTransfer";
    case MessageType::DigestNotice: return "DigestNotice";
    case MessageType::Error: return "Error";
  }
  return "Unknown";
}

// Error codes carried in the 0xFF frame.
namespace errc {
inline constexpr std::uint8_t kTruncated = 0x01;
inline constexpr std::uint8_t kBadLength = 0x02;
inline constexpr std::uint8_t kBadVersion = 0x03;
inline constexpr std::uint8_t kBadType = 0x04;
inline constexpr std::uint8_t kBadField = 0x05;
inline constexpr std::uint8_t kAeadFailure = 0x06;
inline constexpr std::uint8_t kReplay = 0x07;
inline constexpr std::uint8_t kNoSession = 0x08;
inline constexpr std::uint8_t kSessionExpired = 0x09;
inline constexpr std::uint8_t kBadSignature = 0x0A;
inline constexpr std::uint8_t kUnknownPrincipal = 0x0B;
inline constexpr std::uint8_t kUnexpected = 0x0C;
}  // namespace errc

struct Frame {
  std::uint8_t version = kProtocolVersion;
  MessageType type = MessageType::Error;
  std::uint8_t suite = 0;
  Bytes payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct WireError {
  std::uint8_t code = 0;
  std::string detail;

  friend bool operator==(const WireError&, const WireError&) = default;
};

using DecodeResult = std::variant<Frame, WireError>;

inline Bytes encode_frame(const Frame& frame) {
  std::uint64_t length = 3 + static_cast<std::uint64_t>(frame.payload.size());
  if (length > 0xFFFFFFFFull)
    throw std::invalid_argument("frame payload too large");
  Bytes out;
  out.reserve(4 + length);
  out.push_back(static_cast<std::uint8_t>(length >> 24));
  out.push_back(static_cast<std::uint8_t>(length >> 16));
  out.push_back(static_cast<std::uint8_t>(length >> 8));
  out.push_back(static_cast<std::uint8_t>(length));
  out.push_back(frame.version);
  out.push_back(static_cast<std::uint8_t>(frame.type));
  out.push_back(frame.suite);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

/// Decode one complete frame. Never throws on malformed input; the
/// returned WireError is what the receiving end sends back as an error
/// frame.
inline DecodeResult decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4)
    return WireError{errc::kTruncated, "frame shorter than length header"};
  std::uint32_t length = (static_cast<std::uint32_t>(bytes[0]) << 24) |
                         (static_cast<std::uint32_t>(bytes[1]) << 16) |
                         (static_cast<std::uint32_t>(bytes[2]) << 8) |
                         static_cast<std::uint32_t>(bytes[3]);
  if (length < 3)
    return WireError{errc::kBadLength, "declared length below header size"};
  if (bytes.size() < 4ull + length)
    return WireError{errc::kTruncated,
                     "frame truncated: declared " + std::to_string(length) +
                         " bytes, got " + std::to_string(bytes.size() - 4)};
  if (bytes.size() > 4ull + length)
    return WireError{errc::kBadLength, "trailing bytes after frame"};
  Frame frame;
  frame.version = bytes[4];
  std::uint8_t type = bytes[5];
  frame.suite = bytes[6];
  if (frame.version != kProtocolVersion)
    return WireError{errc::kBadVersion,
                     "unknown protocol version " + std::to_string(frame.version)};
  if (!known_type(type))
    return WireError{errc::kBadType,
                     "unknown message type " + std::to_string(type)};
  frame.type = static_cast<MessageType>(type);
  frame.payload.assign(bytes.begin() + 7, bytes.end());
  return frame;
}

inline Bytes encode_error_frame(const WireError& err, std::uint8_t suite) {
  Frame frame;
  frame.type = MessageType::Error;
  frame.suite = suite;
  frame.payload.push_back(err.code);
  frame.payload.insert(frame.payload.end(), err.detail.begin(),
                       err.detail.end());
  return encode_frame(frame);
}

inline WireError parse_error_frame(const Frame& frame) {
  if (frame.type != MessageType::Error)
    throw std::invalid_argument("not an error frame");
  if (frame.payload.empty())
    return WireError{0, "empty error frame"};
  return WireError{frame.payload[0],
                   std::string(frame.payload.begin() + 1, frame.payload.end())};
}

/// Malformed field sequence inside a message payload.
class FieldError : public std::runtime_error {
 public:
  explicit FieldError(const std::string& what) : std::runtime_error(what) {}
};

class FieldWriter {
 public:
  void add(std::span<const std::uint8_t> field) {
    if (field.size() > 0xFFFF)
      throw std::invalid_argument("field exceeds 65535 bytes");
    out_.push_back(static_cast<std::uint8_t>(field.size() >> 8));
    out_.push_back(static_cast<std::uint8_t>(field.size()));
    out_.insert(out_.end(), field.begin(), field.end());
  }

  void add_string(const std::string& s) {
    add(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }

  void add_u16(std::uint16_t v) {
    std::uint8_t be[2] = {static_cast<std::uint8_t>(v >> 8),
                          static_cast<std::uint8_t>(v)};
    add(be);
  }

  const Bytes& bytes() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class FieldReader {
 public:
  explicit FieldReader(std::span<const std::uint8_t> data) : data_(data) {}

  Bytes next() {
    if (data_.size() - pos_ < 2) throw FieldError("truncated field length");
    std::uint16_t len = static_cast<std::uint16_t>(
        (static_cast<std::uint16_t>(data_[pos_]) << 8) | data_[pos_ + 1]);
    pos_ += 2;
    if (data_.size() - pos_ < len) throw FieldError("truncated field body");
    Bytes field(data_.begin() + pos_, data_.begin() + pos_ + len);
    pos_ += len;
    return field;
  }

  std::string next_string() {
    Bytes b = next();
    return std::string(b.begin(), b.end());
  }

  std::uint16_t next_u16() {
    Bytes b = next();
    if (b.size() != 2) throw FieldError("expected 2-byte integer field");
    return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> next_fixed() {
    Bytes b = next();
    if (b.size() != N)
      throw FieldError("expected " + std::to_string(N) + "-byte field, got " +
                       std::to_string(b.size()));
    std::array<std::uint8_t, N> out{};
    std::copy(b.begin(), b.end(), out.begin());
    return out;
  }

  bool done() const { return pos_ == data_.size(); }

  void expect_done() const {
    if (!done()) throw FieldError("trailing bytes after last field");
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace vcauth::wire
