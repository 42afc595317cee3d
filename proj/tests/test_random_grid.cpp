#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "vcauth/random_grid.hpp"

using namespace vcauth;

namespace {

constexpr double kTol = 0.03;  // for regions >= 4096 px (~5 sigma)

BinaryImage half_half(std::uint32_t w, std::uint32_t h) {
  BinaryImage img(w, h);
  for (std::uint32_t r = h / 2; r < h; ++r)
    for (std::uint32_t c = 0; c < w; ++c) img.set(r, c, 1);
  return img;
}

BinaryImage random_secret(std::uint32_t w, std::uint32_t h,
                          std::uint64_t seed) {
  RandomSource rng = RandomSource::seeded(seed);
  return gen_random_grid(w, h, rng);
}

}  // namespace

// The enumeration oracles themselves, pinned on the hand-checkable
// cases before anything uses them.
TEST(Oracle, PairTwoOfNEnumeration) {
  for (int n : {2, 3, 5}) {
    for (int a = 1; a <= n; ++a) {
      for (int b = a + 1; b <= n; ++b) {
        EXPECT_DOUBLE_EQ(oracle::pair2n_white_prob(false, {a, b}, n), 0.5);
        EXPECT_DOUBLE_EQ(oracle::pair2n_white_prob(true, {a, b}, n), 0.25);
      }
      // single share: no leakage, both regions half white
      EXPECT_DOUBLE_EQ(oracle::pair2n_white_prob(false, {a}, n), 0.5);
      EXPECT_DOUBLE_EQ(oracle::pair2n_white_prob(true, {a}, n), 0.5);
    }
  }
}

TEST(Oracle, ChainEnumeration) {
  for (int n : {2, 3, 4}) {
    std::vector<int> all;
    for (int i = 1; i <= n; ++i) all.push_back(i);
    EXPECT_DOUBLE_EQ(oracle::chain_white_prob(false, all, n),
                     std::ldexp(1.0, -(n - 1)));
    EXPECT_DOUBLE_EQ(oracle::chain_white_prob(true, all, n), 0.0);
    // single shares are fair coins
    for (int i = 1; i <= n; ++i) {
      EXPECT_DOUBLE_EQ(oracle::chain_white_prob(false, {i}, n), 0.5);
      EXPECT_DOUBLE_EQ(oracle::chain_white_prob(true, {i}, n), 0.5);
    }
    // every proper subset carries zero contrast
    for (int subset = 1; subset < (1 << n) - 1; ++subset) {
      std::vector<int> indices;
      for (int i = 0; i < n; ++i)
        if (subset & (1 << i)) indices.push_back(i + 1);
      if (indices.empty()) continue;
      EXPECT_DOUBLE_EQ(oracle::chain_white_prob(false, indices, n),
                       oracle::chain_white_prob(true, indices, n))
          << "n=" << n << " subset=" << subset;
    }
  }
}

TEST(GenRandomGrid, DeterministicReplay) {
  RandomSource a = RandomSource::seeded(123);
  RandomSource b = RandomSource::seeded(123);
  EXPECT_EQ(gen_random_grid(33, 17, a), gen_random_grid(33, 17, b));
  EXPECT_EQ(a.bits_consumed(), b.bits_consumed());
  EXPECT_EQ(a.bits_consumed(), 33u * 17u);
}

TEST(GenRandomGrid, BlackFractionNearHalf) {
  RandomSource rng = RandomSource::seeded(2024);
  BinaryImage grid = gen_random_grid(100, 100, rng);
  double frac = static_cast<double>(grid.count_black()) / grid.pixel_count();
  EXPECT_GE(frac, 0.44);
  EXPECT_LE(frac, 0.56);
}

TEST(GenRandomGrid, SinglePixel) {
  RandomSource rng = RandomSource::seeded(5);
  BinaryImage g = gen_random_grid(1, 1, rng);
  EXPECT_LE(g.get(0, 0), 1);
}

TEST(CreateShare2N, CopiesG1AtWhitePixels) {
  BinaryImage secret = half_half(40, 40);
  RandomSource rng = RandomSource::seeded(9);
  BinaryImage g1 = gen_random_grid(40, 40, rng);
  BinaryImage gx = create_share_2n(secret, g1, rng);
  for (std::uint32_t r = 0; r < 40; ++r)
    for (std::uint32_t c = 0; c < 40; ++c)
      if (secret.get(r, c) == 0) EXPECT_EQ(gx.get(r, c), g1.get(r, c));
}

TEST(CreateShare2N, AllWhiteSecretCopiesG1Exactly) {
  BinaryImage secret(16, 16, 0);
  RandomSource rng = RandomSource::seeded(10);
  BinaryImage g1 = gen_random_grid(16, 16, rng);
  EXPECT_EQ(create_share_2n(secret, g1, rng), g1);
}

TEST(CreateShare2N, BlackBranchNeverReadsG1) {
  BinaryImage secret(16, 16, 1);
  RandomSource rng = RandomSource::seeded(11);
  BinaryImage g1a = gen_random_grid(16, 16, rng);
  BinaryImage g1b(16, 16, 0);
  RandomSource r1 = RandomSource::seeded(77);
  RandomSource r2 = RandomSource::seeded(77);
  EXPECT_EQ(create_share_2n(secret, g1a, r1), create_share_2n(secret, g1b, r2));
}

TEST(Split2N, WhitePixelAgreementAcrossAllShares) {
  BinaryImage secret = half_half(32, 32);
  RandomSource rng = RandomSource::seeded(3);
  ShareSet set = split_2n(secret, 3, rng);
  ASSERT_EQ(set.shares.size(), 3u);
  for (std::uint32_t r = 0; r < 32; ++r)
    for (std::uint32_t c = 0; c < 32; ++c)
      if (secret.get(r, c) == 0) {
        EXPECT_EQ(set.share(2).get(r, c), set.share(1).get(r, c));
        EXPECT_EQ(set.share(3).get(r, c), set.share(1).get(r, c));
      }
}

TEST(Split2N, OnePixelWhiteSecretMakesEqualShares) {
  BinaryImage secret(1, 1, 0);
  RandomSource rng = RandomSource::seeded(4);
  ShareSet set = split_2n(secret, 2, rng);
  EXPECT_EQ(set.share(1), set.share(2));
}

TEST(Split2N, RejectsTooFewShares) {
  BinaryImage secret(4, 4, 0);
  RandomSource rng = RandomSource::seeded(6);
  EXPECT_THROW(split_2n(secret, 1, rng), std::invalid_argument);
}

TEST(Split2N, SameSeedSameShares) {
  BinaryImage secret = half_half(24, 24);
  RandomSource a = RandomSource::seeded(55);
  RandomSource b = RandomSource::seeded(55);
  ShareSet sa = split_2n(secret, 4, a);
  ShareSet sb = split_2n(secret, 4, b);
  EXPECT_EQ(sa.shares, sb.shares);
  EXPECT_EQ(sa.seed, std::optional<std::uint64_t>(55));
  EXPECT_EQ(a.bits_consumed(), b.bits_consumed());
}

TEST(SplitChainNN, TwoShareChainIsXorOfSecret) {
  // with n=2 the complement rule forces share2 = share1 XOR secret
  BinaryImage secret = random_secret(20, 20, 88);
  RandomSource rng = RandomSource::seeded(12);
  ShareSet set = split_chain_nn(secret, 2, rng);
  for (std::uint32_t r = 0; r < 20; ++r)
    for (std::uint32_t c = 0; c < 20; ++c)
      EXPECT_EQ(set.share(2).get(r, c),
                set.share(1).get(r, c) ^ secret.get(r, c));
}

TEST(SplitChainNN, SinglePixelForcedCases) {
  // 1x1 black secret: share2 must complement share1, stack is black
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    BinaryImage black(1, 1, 1);
    RandomSource rng = RandomSource::seeded(seed);
    ShareSet set = split_chain_nn(black, 2, rng);
    EXPECT_EQ(set.share(2).get(0, 0), 1 - set.share(1).get(0, 0));
    EXPECT_EQ(stack({set.share(1), set.share(2)}).get(0, 0), 1);

    BinaryImage white(1, 1, 0);
    RandomSource rng2 = RandomSource::seeded(seed);
    ShareSet set2 = split_chain_nn(white, 2, rng2);
    EXPECT_EQ(set2.share(2).get(0, 0), set2.share(1).get(0, 0));
  }
}

TEST(SplitChainNN, FullStackCoversEveryBlackPixelExactly) {
  for (std::uint32_t n : {2u, 3u, 4u}) {
    BinaryImage secret = random_secret(48, 48, 100 + n);
    RandomSource rng = RandomSource::seeded(200 + n);
    ShareSet set = split_chain_nn(secret, n, rng);
    BinaryImage recon = stack(std::span<const BinaryImage>(set.shares));
    for (std::uint32_t r = 0; r < 48; ++r)
      for (std::uint32_t c = 0; c < 48; ++c)
        if (secret.get(r, c) == 1) EXPECT_EQ(recon.get(r, c), 1);
  }
}

TEST(SplitChainNN, FullStackTransmissionMatchesOracle) {
  for (std::uint32_t n : {2u, 3u, 4u}) {
    BinaryImage secret = half_half(128, 128);
    RandomSource rng = RandomSource::seeded(300 + n);
    ShareSet set = split_chain_nn(secret, n, rng);
    BinaryImage recon = stack(std::span<const BinaryImage>(set.shares));
    TransmissionReport rep = transmission_report(recon, secret);
    std::vector<int> all;
    for (std::uint32_t i = 1; i <= n; ++i) all.push_back(static_cast<int>(i));
    EXPECT_NEAR(rep.white_region,
                oracle::chain_white_prob(false, all, static_cast<int>(n)),
                kTol);
    EXPECT_DOUBLE_EQ(rep.black_region, 0.0);  // perfect black, not statistical
  }
}

TEST(SplitChainNN, ProperSubsetsShowNoContrast) {
  for (std::uint32_t n : {2u, 3u, 4u}) {
    BinaryImage secret = half_half(128, 128);
    RandomSource rng = RandomSource::seeded(400 + n);
    ShareSet set = split_chain_nn(secret, n, rng);
    for (std::uint32_t subset = 1; subset + 1 < (1u << n); ++subset) {
      std::vector<BinaryImage> chosen;
      for (std::uint32_t i = 0; i < n; ++i)
        if (subset & (1u << i)) chosen.push_back(set.share(i + 1));
      if (chosen.empty()) continue;
      TransmissionReport rep =
          transmission_report(stack(std::span<const BinaryImage>(chosen)),
                              secret);
      EXPECT_LE(std::abs(rep.contrast), kTol)
          << "n=" << n << " subset=" << subset;
    }
  }
}

TEST(Stack, AlgebraicIdentities) {
  BinaryImage x = random_secret(20, 20, 60);
  BinaryImage y = random_secret(20, 20, 61);
  BinaryImage z = random_secret(20, 20, 62);
  EXPECT_EQ(stack({x}), x);
  EXPECT_EQ(stack({x, x}), x);
  EXPECT_EQ(stack({x, y}), stack({y, x}));
  EXPECT_EQ(stack({stack({x, y}), z}), stack({x, stack({y, z})}));
  EXPECT_EQ(stack({x, y, z}), stack({z, y, x}));
  EXPECT_EQ(stack({BinaryImage(4, 4, 0), BinaryImage(4, 4, 1)}),
            BinaryImage(4, 4, 1));
  EXPECT_THROW(stack(std::span<const BinaryImage>{}), std::invalid_argument);
  EXPECT_THROW(stack({x, BinaryImage(4, 4)}), std::invalid_argument);
}

TEST(TransmissionReport, ExactAndDegenerateCases) {
  BinaryImage secret = half_half(16, 16);
  TransmissionReport same = transmission_report(secret, secret);
  EXPECT_DOUBLE_EQ(same.white_region, 1.0);
  EXPECT_DOUBLE_EQ(same.black_region, 0.0);
  EXPECT_DOUBLE_EQ(same.contrast, 1.0);

  TransmissionReport dark =
      transmission_report(BinaryImage(16, 16, 1), secret);
  EXPECT_DOUBLE_EQ(dark.white_region, 0.0);
  EXPECT_DOUBLE_EQ(dark.black_region, 0.0);
  EXPECT_DOUBLE_EQ(dark.contrast, 0.0);

  EXPECT_THROW(transmission_report(secret, BinaryImage(16, 16, 0)),
               std::invalid_argument);
  EXPECT_THROW(transmission_report(secret, BinaryImage(16, 16, 1)),
               std::invalid_argument);
}

TEST(Split2N, PairStackStatisticsMatchOracle) {
  BinaryImage secret = half_half(128, 128);
  RandomSource rng = RandomSource::seeded(7000);
  ShareSet set = split_2n(secret, 5, rng);
  for (std::uint32_t a = 1; a <= 5; ++a) {
    for (std::uint32_t b = a + 1; b <= 5; ++b) {
      TransmissionReport rep =
          transmission_report(stack({set.share(a), set.share(b)}), secret);
      EXPECT_NEAR(rep.white_region,
                  oracle::pair2n_white_prob(false,
                                            {static_cast<int>(a),
                                             static_cast<int>(b)}, 5),
                  kTol);
      EXPECT_NEAR(rep.black_region,
                  oracle::pair2n_white_prob(true,
                                            {static_cast<int>(a),
                                             static_cast<int>(b)}, 5),
                  kTol);
    }
  }
}

TEST(SingleShare, LeaksNothingInEitherScheme) {
  BinaryImage secret = half_half(128, 128);
  RandomSource rng = RandomSource::seeded(7100);
  ShareSet two = split_2n(secret, 5, rng);
  for (const BinaryImage& share : two.shares) {
    TransmissionReport rep = transmission_report(share, secret);
    EXPECT_NEAR(rep.white_region, 0.5, kTol);
    EXPECT_NEAR(rep.black_region, 0.5, kTol);
    EXPECT_LE(std::abs(rep.contrast), kTol);
  }
  RandomSource rng2 = RandomSource::seeded(7200);
  ShareSet chain = split_chain_nn(secret, 4, rng2);
  for (const BinaryImage& share : chain.shares) {
    TransmissionReport rep = transmission_report(share, secret);
    EXPECT_LE(std::abs(rep.contrast), kTol);
  }
}

TEST(RandomSource, ForkGivesIndependentStreams) {
  RandomSource parent = RandomSource::seeded(1);
  RandomSource child = parent.fork(0);
  RandomSource child2 = parent.fork(1);
  BinaryImage a = gen_random_grid(16, 16, child);
  RandomSource from_parent = RandomSource::seeded(1);
  BinaryImage b = gen_random_grid(16, 16, from_parent);
  EXPECT_NE(a, b);
  RandomSource child2b = parent.fork(1);
  EXPECT_EQ(gen_random_grid(16, 16, child2),
            gen_random_grid(16, 16, child2b));
}

TEST(RandomSource, SecureModeHasNoSeed) {
  RandomSource s = RandomSource::secure();
  EXPECT_TRUE(s.is_secure());
  EXPECT_FALSE(s.seed().has_value());
  BinaryImage secret(8, 8, 0);
  ShareSet set = split_2n(secret, 2, s);
  EXPECT_FALSE(set.seed.has_value());
}

TEST(ShareMetadata, CarriesSchemeFields) {
  BinaryImage secret = half_half(16, 16);
  RandomSource rng = RandomSource::seeded(42);
  ShareSet set = split_2n(secret, 3, rng);
  MetaList meta = share_metadata(set, 2, true);
  MetaList expect{{"scheme", "2n"}, {"index", "2"}, {"n", "3"}, {"k", "2"},
                  {"seed", "42"}};
  EXPECT_EQ(meta, expect);
  MetaList no_seed = share_metadata(set, 2, false);
  EXPECT_EQ(no_seed.size(), 4u);
}
