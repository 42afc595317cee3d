#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcauth/image.hpp"
#include "vcauth/random_grid.hpp"
#include "vcauth/random_source.hpp"

// The fake-grid collusion attack on the 2-of-n scheme. Colluders who
// hold enough shares to know the secret craft a grid that equals their
// genuine share wherever the fake image agrees with the secret and is
// fresh randomness wherever it does not. A victim stacking the fake
// grid with their own share sees the fake image with genuine-looking
// statistics.
//
// The attack alters white secret pixels to black; forcing a stacked
// black pixel white is impossible without controlling the victim's
// share, and such a mask is rejected outright.

namespace vcauth {

/// A mask pixel flagged on a black secret pixel; carries the first
/// offending coordinate.
class MaskedBlackPixelError : public std::invalid_argument {
 public:
  MaskedBlackPixelError(std::uint32_t row, std::uint32_t col)
      : std::invalid_argument("alteration mask flags black pixel at (" +
                              std::to_string(row) + "," +
                              std::to_string(col) + ")"),
        row_(row),
        col_(col) {}

  std::uint32_t row() const { return row_; }
  std::uint32_t col() const { return col_; }

 private:
  std::uint32_t row_;
  std::uint32_t col_;
};

/// Pixels the attackers turn black. Flagged pixels must be white in the
/// secret; checked at every point of use.
struct FakeImageSpec {
  RegionMask alteration;
};

struct AttackScenario {
  ShareSet share_set;  // a 2-of-n set
  std::vector<std::uint32_t> colluder_indices;  // 1-based
  std::uint32_t victim_index;                   // 1-based
  FakeImageSpec spec;
};

inline BinaryImage make_fake_secret(const BinaryImage& secret,
                                    const FakeImageSpec& spec) {
  if (!spec.alteration.matches(secret))
    throw std::invalid_argument(
        "make_fake_secret: mask dimension mismatch: " +
        detail::dims_str(secret.width(), secret.height()) + " vs " +
        detail::dims_str(spec.alteration.width(), spec.alteration.height()));
  BinaryImage fake = secret;
  for (std::uint32_t r = 0; r < secret.height(); ++r)
    for (std::uint32_t c = 0; c < secret.width(); ++c)
      if (spec.alteration.get(r, c)) {
        if (secret.get(r, c) != 0) throw MaskedBlackPixelError(r, c);
        fake.set(r, c, 1);
      }
  return fake;
}

/// The fake grid: copy the colluder's share where fake and secret
/// agree, fresh random bit where they differ. The branch condition is
/// "was this pixel altered?", taken in the clean secret-image domain.
/// Bits are drawn row-major at altered pixels only.
inline BinaryImage fake_grid(const BinaryImage& secret,
                             const BinaryImage& fake_secret,
                             const BinaryImage& colluder_share,
                             RandomSource& rng) {
  detail::require_same_dims(secret, fake_secret, "fake_grid");
  detail::require_same_dims(secret, colluder_share, "fake_grid");
  BinaryImage out(secret.width(), secret.height());
  for (std::uint32_t r = 0; r < secret.height(); ++r)
    for (std::uint32_t c = 0; c < secret.width(); ++c)
      out.set(r, c, fake_secret.get(r, c) == secret.get(r, c)
                        ? colluder_share.get(r, c)
                        : rng.next_bit());
  return out;
}

/// One fake grid per colluder, each built from that colluder's own
/// genuine share. The secret is the colluders' reconstructed knowledge
/// of the original image. Grids are generated in the listed colluder
/// order (share-major bit consumption).
inline std::vector<BinaryImage> fake_grids_for_colluders(
    const AttackScenario& scenario, const BinaryImage& secret,
    RandomSource& rng) {
  if (scenario.share_set.params.kind != SchemeKind::TwoOfN)
    throw std::invalid_argument(
        "fake_grids_for_colluders: attack is defined for the 2-of-n scheme");
  const std::uint32_t n = scenario.share_set.params.n;
  if (scenario.victim_index < 1 || scenario.victim_index > n)
    throw std::out_of_range("victim index out of range (1.." +
                            std::to_string(n) + ")");
  if (scenario.colluder_indices.size() <
      static_cast<std::size_t>(scenario.share_set.params.k))
    throw std::invalid_argument(
        "fake_grids_for_colluders: need at least k colluders");
  for (std::uint32_t idx : scenario.colluder_indices) {
    if (idx < 1 || idx > n)
      throw std::out_of_range("colluder index out of range (1.." +
                              std::to_string(n) + ")");
    if (idx == scenario.victim_index)
      throw std::invalid_argument(
          "fake_grids_for_colluders: victim listed as colluder");
  }
  BinaryImage fake_secret = make_fake_secret(secret, scenario.spec);
  std::vector<BinaryImage> fakes;
  fakes.reserve(scenario.colluder_indices.size());
  for (std::uint32_t idx : scenario.colluder_indices)
    fakes.push_back(fake_grid(secret, fake_secret,
                              scenario.share_set.share(idx), rng));
  return fakes;
}

}  // namespace vcauth
