#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "vcauth/cheat.hpp"
#include "vcauth/crypto.hpp"
#include "vcauth/pbm.hpp"

using namespace vcauth;

namespace {

constexpr double kTol = 0.03;

BinaryImage half_half(std::uint32_t w, std::uint32_t h) {
  BinaryImage img(w, h);
  for (std::uint32_t r = h / 2; r < h; ++r)
    for (std::uint32_t c = 0; c < w; ++c) img.set(r, c, 1);
  return img;
}

// block of flags inside the white half
RegionMask block_mask(std::uint32_t w, std::uint32_t h, std::uint32_t r0,
                      std::uint32_t c0, std::uint32_t side) {
  RegionMask mask(w, h);
  for (std::uint32_t r = r0; r < r0 + side; ++r)
    for (std::uint32_t c = c0; c < c0 + side; ++c) mask.set(r, c, true);
  return mask;
}

double fraction_white_in(const BinaryImage& img, const RegionMask& mask) {
  return region_fraction_white(img, mask);
}

}  // namespace

TEST(MakeFakeSecret, EmptyMaskIsIdentity) {
  BinaryImage secret = half_half(16, 16);
  FakeImageSpec spec{RegionMask(16, 16)};
  EXPECT_EQ(make_fake_secret(secret, spec), secret);
}

TEST(MakeFakeSecret, AllWhiteFlaggedTurnsImageBlack) {
  BinaryImage secret = half_half(16, 16);
  RegionMask mask(16, 16);
  for (std::uint32_t r = 0; r < 8; ++r)
    for (std::uint32_t c = 0; c < 16; ++c) mask.set(r, c, true);
  BinaryImage fake = make_fake_secret(secret, FakeImageSpec{mask});
  EXPECT_EQ(fake, BinaryImage(16, 16, 1));
}

TEST(MakeFakeSecret, SingleFlagFlipsOnePixel) {
  BinaryImage secret = half_half(16, 16);
  RegionMask mask(16, 16);
  mask.set(2, 5, true);
  BinaryImage fake = make_fake_secret(secret, FakeImageSpec{mask});
  EXPECT_EQ(diff_mask(secret, fake).count_selected(), 1u);
  EXPECT_EQ(fake.get(2, 5), 1);
}

TEST(MakeFakeSecret, RejectsBlackPixelWithCoordinate) {
  BinaryImage secret = half_half(16, 16);
  RegionMask mask(16, 16);
  mask.set(12, 3, true);  // black half
  try {
    make_fake_secret(secret, FakeImageSpec{mask});
    FAIL() << "expected MaskedBlackPixelError";
  } catch (const MaskedBlackPixelError& e) {
    EXPECT_EQ(e.row(), 12u);
    EXPECT_EQ(e.col(), 3u);
    EXPECT_NE(std::string(e.what()).find("(12,3)"), std::string::npos);
  }
  EXPECT_THROW(make_fake_secret(secret, FakeImageSpec{RegionMask(8, 8)}),
               std::invalid_argument);
}

TEST(FakeGrid, EqualImagesCopyColluderShareExactly) {
  BinaryImage secret = half_half(24, 24);
  RandomSource rng = RandomSource::seeded(1);
  ShareSet set = split_2n(secret, 3, rng);
  RandomSource attack_rng = RandomSource::seeded(2);
  BinaryImage fg = fake_grid(secret, secret, set.share(1), attack_rng);
  EXPECT_EQ(fg, set.share(1));
  EXPECT_EQ(attack_rng.bits_consumed(), 0u);
}

TEST(FakeGrid, ComplementImagesNeverReadColluderShare) {
  BinaryImage secret = half_half(24, 24);
  BinaryImage inverted(24, 24);
  for (std::uint32_t r = 0; r < 24; ++r)
    for (std::uint32_t c = 0; c < 24; ++c)
      inverted.set(r, c, 1 - secret.get(r, c));
  RandomSource r1 = RandomSource::seeded(3);
  RandomSource r2 = RandomSource::seeded(3);
  BinaryImage fg_a = fake_grid(secret, inverted, BinaryImage(24, 24, 0), r1);
  BinaryImage fg_b = fake_grid(secret, inverted, BinaryImage(24, 24, 1), r2);
  EXPECT_EQ(fg_a, fg_b);
  EXPECT_EQ(r1.bits_consumed(), 24u * 24u);
}

TEST(FakeGrid, EqualsGenuineShareOutsideMask) {
  BinaryImage secret = half_half(64, 64);
  RandomSource rng = RandomSource::seeded(4);
  ShareSet set = split_2n(secret, 3, rng);
  RegionMask mask = block_mask(64, 64, 4, 4, 16);
  BinaryImage fake_secret = make_fake_secret(secret, FakeImageSpec{mask});
  RandomSource attack_rng = RandomSource::seeded(5);
  BinaryImage fg = fake_grid(secret, fake_secret, set.share(1), attack_rng);
  for (std::uint32_t r = 0; r < 64; ++r)
    for (std::uint32_t c = 0; c < 64; ++c)
      if (!mask.get(r, c))
        EXPECT_EQ(fg.get(r, c), set.share(1).get(r, c));
}

TEST(FakeGrid, VictimStackMatchesOracleStatistics) {
  // 128x128, altered block 48x48 inside the white half (2304 px);
  // unaltered white and black regions are several thousand px each.
  BinaryImage secret = half_half(128, 128);
  RandomSource rng = RandomSource::seeded(6);
  ShareSet set = split_2n(secret, 3, rng);
  RegionMask mask = block_mask(128, 128, 8, 8, 48);
  BinaryImage fake_secret = make_fake_secret(secret, FakeImageSpec{mask});
  RandomSource attack_rng = RandomSource::seeded(7);
  BinaryImage fg = fake_grid(secret, fake_secret, set.share(1), attack_rng);

  BinaryImage victim_stack = stack({fg, set.share(3)});

  EXPECT_NEAR(fraction_white_in(victim_stack, mask),
              oracle::fake_stack_white_prob(true, false), kTol);

  RegionMask unaltered_white(128, 128);
  RegionMask black_region(128, 128);
  for (std::uint32_t r = 0; r < 128; ++r)
    for (std::uint32_t c = 0; c < 128; ++c) {
      if (secret.get(r, c) == 0 && !mask.get(r, c))
        unaltered_white.set(r, c, true);
      if (secret.get(r, c) == 1) black_region.set(r, c, true);
    }
  EXPECT_NEAR(fraction_white_in(victim_stack, unaltered_white),
              oracle::fake_stack_white_prob(false, false), kTol);
  EXPECT_NEAR(fraction_white_in(victim_stack, black_region),
              oracle::fake_stack_white_prob(false, true), kTol);

  // the victim-visible statistics match a genuine reconstruction of the
  // FAKE image, which is exactly why looking cannot expose the cheat
  TransmissionReport rep = transmission_report(victim_stack, fake_secret);
  EXPECT_NEAR(rep.white_region, 0.5, kTol);
  EXPECT_NEAR(rep.black_region, 0.25, kTol);
}

TEST(FakeGridsForColluders, TwoColludersAgainstVictim) {
  BinaryImage secret = half_half(128, 128);
  RandomSource rng = RandomSource::seeded(8);
  ShareSet set = split_2n(secret, 3, rng);
  RegionMask mask = block_mask(128, 128, 8, 8, 32);
  AttackScenario scenario{set, {1, 2}, 3, FakeImageSpec{mask}};
  RandomSource attack_rng = RandomSource::seeded(9);
  std::vector<BinaryImage> fakes =
      fake_grids_for_colluders(scenario, secret, attack_rng);
  ASSERT_EQ(fakes.size(), 2u);
  BinaryImage fake_secret = make_fake_secret(secret, FakeImageSpec{mask});
  for (const BinaryImage& fg : fakes) {
    TransmissionReport rep =
        transmission_report(stack({fg, set.share(3)}), fake_secret);
    EXPECT_NEAR(rep.white_region, 0.5, kTol);
    EXPECT_NEAR(rep.black_region, 0.25, kTol);
  }
}

TEST(FakeGridsForColluders, EmptyMaskYieldsGenuineShares) {
  BinaryImage secret = half_half(32, 32);
  RandomSource rng = RandomSource::seeded(10);
  ShareSet set = split_2n(secret, 3, rng);
  AttackScenario scenario{set, {1, 2}, 3, FakeImageSpec{RegionMask(32, 32)}};
  RandomSource attack_rng = RandomSource::seeded(11);
  std::vector<BinaryImage> fakes =
      fake_grids_for_colluders(scenario, secret, attack_rng);
  EXPECT_EQ(fakes[0], set.share(1));
  EXPECT_EQ(fakes[1], set.share(2));
}

TEST(FakeGridsForColluders, ValidatesScenario) {
  BinaryImage secret = half_half(32, 32);
  RandomSource rng = RandomSource::seeded(12);
  ShareSet set = split_2n(secret, 3, rng);
  FakeImageSpec spec{RegionMask(32, 32)};
  RandomSource attack_rng = RandomSource::seeded(13);

  AttackScenario victim_colludes{set, {1, 3}, 3, spec};
  EXPECT_THROW(fake_grids_for_colluders(victim_colludes, secret, attack_rng),
               std::invalid_argument);

  AttackScenario out_of_range{set, {1, 4}, 3, spec};
  EXPECT_THROW(fake_grids_for_colluders(out_of_range, secret, attack_rng),
               std::out_of_range);

  AttackScenario bad_victim{set, {1, 2}, 9, spec};
  EXPECT_THROW(fake_grids_for_colluders(bad_victim, secret, attack_rng),
               std::out_of_range);

  AttackScenario too_few{set, {1}, 3, spec};
  EXPECT_THROW(fake_grids_for_colluders(too_few, secret, attack_rng),
               std::invalid_argument);

  RandomSource rng2 = RandomSource::seeded(14);
  ShareSet chain = split_chain_nn(secret, 3, rng2);
  AttackScenario wrong_scheme{chain, {1, 2}, 3, spec};
  EXPECT_THROW(fake_grids_for_colluders(wrong_scheme, secret, attack_rng),
               std::invalid_argument);
}

TEST(FakeGrid, DigestDiffersForMaskOfSixtyFourPixels) {
  BinaryImage secret = half_half(64, 64);
  RandomSource rng = RandomSource::seeded(15);
  ShareSet set = split_2n(secret, 2, rng);
  RegionMask mask = block_mask(64, 64, 0, 0, 8);  // 64 px
  BinaryImage fake_secret = make_fake_secret(secret, FakeImageSpec{mask});
  RandomSource attack_rng = RandomSource::seeded(16);
  BinaryImage fg = fake_grid(secret, fake_secret, set.share(1), attack_rng);
  EXPECT_NE(crypto::sha256(canonical_p4(fg)),
            crypto::sha256(canonical_p4(set.share(1))));
}
