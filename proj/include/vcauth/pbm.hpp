#pragma once

#include <cctype>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vcauth/image.hpp"

// Netpbm PBM (P1 ASCII, P4 packed binary) reader/writer plus a PGM
// (P2/P5) reader for grayscale inputs. Comment lines are accepted only
// between the magic and the dimensions; comments of the form
// "# key=value" round-trip as metadata. P4 rows are packed MSB-first
// and padded to a byte boundary with 0 bits.

namespace vcauth {

using Bytes = std::vector<std::uint8_t>;
using MetaList = std::vector<std::pair<std::string, std::string>>;

enum class PbmFormat { P1, P4 };

/// Rejected input; offset() is the byte position the parser stopped at.
class PbmParseError : public std::runtime_error {
 public:
  PbmParseError(std::size_t offset, const std::string& detail)
      : std::runtime_error("PBM parse error at byte " +
                           std::to_string(offset) + ": " + detail),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct PbmFile {
  BinaryImage image;
  MetaList meta;
};

namespace detail {

inline bool is_pnm_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

class PnmCursor {
 public:
  explicit PnmCursor(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ >= data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

  std::uint8_t peek() const {
    if (at_end()) fail("unexpected end of input");
    return data_[pos_];
  }

  std::uint8_t take() {
    std::uint8_t b = peek();
    ++pos_;
    return b;
  }

  std::span<const std::uint8_t> take_block(std::size_t n) {
    if (remaining() < n)
      throw PbmParseError(data_.size(), "truncated payload: expected " +
                                            std::to_string(n) +
                                            " more bytes, found " +
                                            std::to_string(remaining()));
    auto block = data_.subspan(pos_, n);
    pos_ += n;
    return block;
  }

  [[noreturn]] void fail(const std::string& detail) const {
    throw PbmParseError(pos_, detail);
  }

  // Whitespace and, when meta is non-null, '#' comment lines. Comments
  // shaped "key=value" are collected; anything else is discarded.
  void skip_space_and_comments(MetaList* meta) {
    while (!at_end()) {
      std::uint8_t c = data_[pos_];
      if (is_pnm_space(c)) {
        ++pos_;
        continue;
      }
      if (c == '#' && meta != nullptr) {
        ++pos_;
        std::string line;
        while (!at_end() && data_[pos_] != '\n') line.push_back(take());
        if (!line.empty() && line.front() == ' ') line.erase(line.begin());
        auto eq = line.find('=');
        if (eq != std::string::npos && eq > 0)
          meta->emplace_back(line.substr(0, eq), line.substr(eq + 1));
        continue;
      }
      break;
    }
  }

  void skip_space_only() {
    while (!at_end() && is_pnm_space(data_[pos_])) ++pos_;
  }

  std::uint32_t read_dimension(const char* what) {
    std::size_t start = pos_;
    if (at_end() || !std::isdigit(peek()))
      fail(std::string("expected ") + what);
    std::uint64_t value = 0;
    while (!at_end() && std::isdigit(data_[pos_])) {
      value = value * 10 + (take() - '0');
      if (value > kMaxImageSide)
        throw PbmParseError(start, std::string(what) + " overflows " +
                                       std::to_string(kMaxImageSide));
    }
    if (value == 0)
      throw PbmParseError(start, std::string(what) + " must be at least 1");
    return static_cast<std::uint32_t>(value);
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline void append_string(Bytes& out, const std::string& s) {
  out.insert(out.end(), s.begin(), s.end());
}

inline void check_meta(const MetaList& meta) {
  for (const auto& [key, value] : meta) {
    if (key.empty()) throw std::invalid_argument("metadata key is empty");
    if (key.find('=') != std::string::npos)
      throw std::invalid_argument("metadata key contains '='");
    for (char c : key + value)
      if (c == '\n' || c == '\r')
        throw std::invalid_argument("metadata contains a line break");
  }
}

}  // namespace detail

inline PbmFile load_pbm(std::span<const std::uint8_t> bytes) {
  detail::PnmCursor cur(bytes);
  if (cur.remaining() < 2 || cur.peek() != 'P')
    cur.fail("malformed magic, expected P1 or P4");
  cur.take();
  std::uint8_t kind = cur.take();
  if (kind != '1' && kind != '4')
    throw PbmParseError(1, "malformed magic, expected P1 or P4");

  MetaList meta;
  cur.skip_space_and_comments(&meta);
  std::uint32_t width = cur.read_dimension("width");
  cur.skip_space_and_comments(&meta);
  std::uint32_t height = cur.read_dimension("height");

  BinaryImage img(width, height);
  if (kind == '1') {
    for (std::uint32_t r = 0; r < height; ++r) {
      for (std::uint32_t c = 0; c < width; ++c) {
        cur.skip_space_only();
        if (cur.at_end()) cur.fail("truncated payload: missing pixels");
        std::uint8_t ch = cur.take();
        if (ch != '0' && ch != '1')
          throw PbmParseError(cur.pos() - 1, "expected '0' or '1' pixel");
        img.set(r, c, ch == '1' ? 1 : 0);
      }
    }
    cur.skip_space_only();
    if (!cur.at_end()) cur.fail("trailing data after pixel raster");
  } else {
    if (cur.at_end()) cur.fail("truncated payload: missing raster");
    if (!detail::is_pnm_space(cur.take()))
      throw PbmParseError(cur.pos() - 1, "expected whitespace before raster");
    std::size_t row_bytes = (width + 7) / 8;
    for (std::uint32_t r = 0; r < height; ++r) {
      auto row = cur.take_block(row_bytes);
      for (std::uint32_t c = 0; c < width; ++c) {
        std::uint8_t byte = row[c / 8];
        img.set(r, c, (byte >> (7 - c % 8)) & 1);
      }
      // reject nonzero padding so parse/serialize stay inverses
      if (width % 8 != 0) {
        std::uint8_t pad = row[row_bytes - 1] &
                           static_cast<std::uint8_t>(0xFF >> (width % 8));
        if (pad != 0)
          throw PbmParseError(cur.pos() - 1, "nonzero row padding bits");
      }
    }
    if (!cur.at_end()) cur.fail("trailing data after pixel raster");
  }
  return PbmFile{std::move(img), std::move(meta)};
}

inline Bytes save_pbm(const BinaryImage& img, PbmFormat format,
                      const MetaList& meta = {}) {
  detail::check_meta(meta);
  Bytes out;
  detail::append_string(out, format == PbmFormat::P1 ? "P1\n" : "P4\n");
  for (const auto& [key, value] : meta)
    detail::append_string(out, "# " + key + "=" + value + "\n");
  detail::append_string(out, std::to_string(img.width()) + " " +
                                 std::to_string(img.height()) + "\n");
  if (format == PbmFormat::P1) {
    for (std::uint32_t r = 0; r < img.height(); ++r) {
      for (std::uint32_t c = 0; c < img.width(); ++c) {
        if (c > 0) out.push_back(' ');
        out.push_back(img.get(r, c) ? '1' : '0');
      }
      out.push_back('\n');
    }
  } else {
    std::size_t row_bytes = (img.width() + 7) / 8;
    for (std::uint32_t r = 0; r < img.height(); ++r) {
      std::vector<std::uint8_t> row(row_bytes, 0);
      for (std::uint32_t c = 0; c < img.width(); ++c)
        if (img.get(r, c)) row[c / 8] |= static_cast<std::uint8_t>(0x80 >> (c % 8));
      out.insert(out.end(), row.begin(), row.end());
    }
  }
  return out;
}

/// Metadata-free P4 bytes; the integrity identity of a share. Two shares
/// digest equal exactly when their canonical bytes are equal.
inline Bytes canonical_p4(const BinaryImage& img) {
  return save_pbm(img, PbmFormat::P4, {});
}

/// PGM (P2 ASCII / P5 binary) with maxval up to 255. Comments are
/// skipped, not preserved; GrayImage carries no metadata.
inline GrayImage load_pgm(std::span<const std::uint8_t> bytes) {
  detail::PnmCursor cur(bytes);
  if (cur.remaining() < 2 || cur.peek() != 'P')
    cur.fail("malformed magic, expected P2 or P5");
  cur.take();
  std::uint8_t kind = cur.take();
  if (kind != '2' && kind != '5')
    throw PbmParseError(1, "malformed magic, expected P2 or P5");

  MetaList ignored;
  cur.skip_space_and_comments(&ignored);
  std::uint32_t width = cur.read_dimension("width");
  cur.skip_space_and_comments(&ignored);
  std::uint32_t height = cur.read_dimension("height");
  cur.skip_space_and_comments(&ignored);
  std::size_t maxval_pos = cur.pos();
  std::uint32_t maxval = cur.read_dimension("maxval");
  if (maxval > 255)
    throw PbmParseError(maxval_pos, "maxval above 255 is not supported");

  GrayImage img(width, height);
  if (kind == '2') {
    for (std::uint32_t r = 0; r < height; ++r) {
      for (std::uint32_t c = 0; c < width; ++c) {
        cur.skip_space_only();
        std::size_t start = cur.pos();
        if (cur.at_end() || !std::isdigit(cur.peek()))
          cur.fail("expected intensity value");
        std::uint32_t v = 0;
        while (!cur.at_end() && std::isdigit(cur.peek())) {
          v = v * 10 + (cur.take() - '0');
          if (v > maxval)
            throw PbmParseError(start, "intensity exceeds maxval");
        }
        img.set(r, c, static_cast<std::uint8_t>(v));
      }
    }
  } else {
    if (cur.at_end()) cur.fail("truncated payload: missing raster");
    if (!detail::is_pnm_space(cur.take()))
      throw PbmParseError(cur.pos() - 1, "expected whitespace before raster");
    auto block = cur.take_block(static_cast<std::size_t>(width) * height);
    for (std::uint32_t r = 0; r < height; ++r)
      for (std::uint32_t c = 0; c < width; ++c) {
        std::uint8_t v = block[static_cast<std::size_t>(r) * width + c];
        if (v > maxval)
          throw PbmParseError(cur.pos(), "intensity exceeds maxval");
        img.set(r, c, v);
      }
  }
  return img;
}

}  // namespace vcauth
