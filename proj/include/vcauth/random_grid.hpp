#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcauth/image.hpp"
#include "vcauth/pbm.hpp"
#include "vcauth/random_source.hpp"

// Random-grid visual secret sharing.
//
// Two schemes are implemented:
//   - 2-of-n: G_1 is a fair random grid; every further share copies G_1
//     at white secret pixels and draws a fresh bit at black ones. Any
//     two shares stack (pixelwise OR) into a contrast-bearing image.
//   - n-of-n chain: the secret is split into (G_1, IG_1), IG_1 is split
//     into (G_2, IG_2), and so on; the last intermediate grid becomes
//     share n. Each split copies the random grid at white pixels of the
//     stage image and complements it at black ones, so stacking all n
//     shares turns every black secret pixel black with certainty.
//     Fewer than n shares carry no contrast.

namespace vcauth {

enum class SchemeKind { TwoOfN, NNChain };

inline std::string to_string(SchemeKind kind) {
  return kind == SchemeKind::TwoOfN ? "2n" : "nn";
}

inline std::optional<SchemeKind> parse_scheme_kind(const std::string& s) {
  if (s == "2n") return SchemeKind::TwoOfN;
  if (s == "nn") return SchemeKind::NNChain;
  return std::nullopt;
}

struct SchemeParams {
  SchemeKind kind;
  std::uint32_t n;  // share count
  std::uint32_t k;  // shares needed to reconstruct
  std::uint32_t width;
  std::uint32_t height;

  static SchemeParams two_of_n(std::uint32_t n, std::uint32_t width,
                               std::uint32_t height) {
    detail::check_dims(width, height);
    if (n < 2) throw std::invalid_argument("2-of-n scheme requires n >= 2");
    return SchemeParams{SchemeKind::TwoOfN, n, 2, width, height};
  }

  static SchemeParams nn_chain(std::uint32_t n, std::uint32_t width,
                               std::uint32_t height) {
    detail::check_dims(width, height);
    if (n < 2) throw std::invalid_argument("n-of-n chain requires n >= 2");
    return SchemeParams{SchemeKind::NNChain, n, n, width, height};
  }

  friend bool operator==(const SchemeParams&, const SchemeParams&) = default;
};

/// The n generated grids. Shares are indexed 1..n everywhere a human or
/// a file sees them; share(x) returns G_x. seed is absent when the set
/// came from a secure (non-replayable) source.
struct ShareSet {
  SchemeParams params;
  std::vector<BinaryImage> shares;
  std::optional<std::uint64_t> seed;

  const BinaryImage& share(std::uint32_t index1) const {
    if (index1 < 1 || index1 > shares.size())
      throw std::out_of_range("share index out of range (1.." +
                              std::to_string(shares.size()) + ")");
    return shares[index1 - 1];
  }
};

/// Fair coin grid; bits drawn row-major from rng.
inline BinaryImage gen_random_grid(std::uint32_t width, std::uint32_t height,
                                   RandomSource& rng) {
  BinaryImage img(width, height);
  for (std::uint32_t r = 0; r < height; ++r)
    for (std::uint32_t c = 0; c < width; ++c) img.set(r, c, rng.next_bit());
  return img;
}

/// One further 2-of-n share: copy g1 where the secret is white, fresh
/// random bit where it is black. Bits are drawn row-major at black
/// pixels only.
inline BinaryImage create_share_2n(const BinaryImage& secret,
                                   const BinaryImage& g1, RandomSource& rng) {
  detail::require_same_dims(secret, g1, "create_share_2n");
  BinaryImage out(secret.width(), secret.height());
  for (std::uint32_t r = 0; r < secret.height(); ++r)
    for (std::uint32_t c = 0; c < secret.width(); ++c)
      out.set(r, c, secret.get(r, c) == 0 ? g1.get(r, c) : rng.next_bit());
  return out;
}

inline ShareSet split_2n(const BinaryImage& secret, std::uint32_t n,
                         RandomSource& rng) {
  SchemeParams params =
      SchemeParams::two_of_n(n, secret.width(), secret.height());
  std::vector<BinaryImage> shares;
  shares.reserve(n);
  shares.push_back(gen_random_grid(secret.width(), secret.height(), rng));
  for (std::uint32_t x = 2; x <= n; ++x)
    shares.push_back(create_share_2n(secret, shares.front(), rng));
  return ShareSet{params, std::move(shares), rng.seed()};
}

inline ShareSet split_chain_nn(const BinaryImage& secret, std::uint32_t n,
                               RandomSource& rng) {
  SchemeParams params =
      SchemeParams::nn_chain(n, secret.width(), secret.height());
  std::vector<BinaryImage> shares;
  shares.reserve(n);
  BinaryImage current = secret;
  for (std::uint32_t j = 1; j < n; ++j) {
    BinaryImage grid = gen_random_grid(secret.width(), secret.height(), rng);
    BinaryImage intermediate(secret.width(), secret.height());
    for (std::uint32_t r = 0; r < secret.height(); ++r)
      for (std::uint32_t c = 0; c < secret.width(); ++c) {
        std::uint8_t g = grid.get(r, c);
        intermediate.set(r, c, current.get(r, c) == 0 ? g : 1 - g);
      }
    shares.push_back(std::move(grid));
    current = std::move(intermediate);
  }
  shares.push_back(std::move(current));
  return ShareSet{params, std::move(shares), rng.seed()};
}

/// Superimposition: pixelwise OR, black is opaque.
inline BinaryImage stack(std::span<const BinaryImage> shares) {
  if (shares.empty())
    throw std::invalid_argument("stack: need at least one image");
  BinaryImage out = shares.front();
  for (std::size_t i = 1; i < shares.size(); ++i) {
    detail::require_same_dims(out, shares[i], "stack");
    for (std::uint32_t r = 0; r < out.height(); ++r)
      for (std::uint32_t c = 0; c < out.width(); ++c)
        out.set(r, c, out.get(r, c) | shares[i].get(r, c));
  }
  return out;
}

inline BinaryImage stack(std::initializer_list<BinaryImage> shares) {
  return stack(std::span<const BinaryImage>(shares.begin(), shares.size()));
}

struct TransmissionReport {
  double white_region;  // fraction of recon pixels white over secret's white region
  double black_region;  // same over secret's black region
  double contrast;      // white_region - black_region
};

/// Light transmission of a reconstruction, measured region-wise against
/// the secret. The secret must contain both colors or contrast is
/// undefined.
inline TransmissionReport transmission_report(const BinaryImage& recon,
                                              const BinaryImage& secret) {
  detail::require_same_dims(recon, secret, "transmission_report");
  std::uint64_t white_total = 0, white_clear = 0;
  std::uint64_t black_total = 0, black_clear = 0;
  for (std::uint32_t r = 0; r < secret.height(); ++r) {
    for (std::uint32_t c = 0; c < secret.width(); ++c) {
      bool clear = recon.get(r, c) == 0;
      if (secret.get(r, c) == 0) {
        ++white_total;
        if (clear) ++white_clear;
      } else {
        ++black_total;
        if (clear) ++black_clear;
      }
    }
  }
  if (white_total == 0 || black_total == 0)
    throw std::invalid_argument(
        "transmission_report: degenerate secret (needs both colors)");
  TransmissionReport rep{};
  rep.white_region = static_cast<double>(white_clear) / white_total;
  rep.black_region = static_cast<double>(black_clear) / black_total;
  rep.contrast = rep.white_region - rep.black_region;
  return rep;
}

/// Self-describing share file metadata. The seed is a test-mode
/// convenience and must stay out of secure-mode files.
inline MetaList share_metadata(const ShareSet& set, std::uint32_t index1,
                               bool include_seed) {
  if (index1 < 1 || index1 > set.shares.size())
    throw std::out_of_range("share index out of range");
  MetaList meta{{"scheme", to_string(set.params.kind)},
                {"index", std::to_string(index1)},
                {"n", std::to_string(set.params.n)},
                {"k", std::to_string(set.params.k)}};
  if (include_seed && set.seed) meta.emplace_back("seed", std::to_string(*set.seed));
  return meta;
}

}  // namespace vcauth
