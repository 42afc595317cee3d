#include <gtest/gtest.h>

#include <random>
#include <string>

#include "vcauth/pbm.hpp"

using namespace vcauth;

namespace {

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

BinaryImage random_image(std::mt19937_64& rng) {
  std::uint32_t w = 1 + rng() % 40;
  std::uint32_t h = 1 + rng() % 40;
  BinaryImage img(w, h);
  for (std::uint32_t r = 0; r < h; ++r)
    for (std::uint32_t c = 0; c < w; ++c) img.set(r, c, rng() & 1);
  return img;
}

}  // namespace

TEST(LoadPbm, ParsesAsciiP1) {
  PbmFile f = load_pbm(bytes_of("P1\n2 2\n0 1\n1 0\n"));
  EXPECT_EQ(f.image.width(), 2u);
  EXPECT_EQ(f.image.height(), 2u);
  EXPECT_EQ(f.image.get(0, 0), 0);
  EXPECT_EQ(f.image.get(0, 1), 1);
  EXPECT_EQ(f.image.get(1, 0), 1);
  EXPECT_EQ(f.image.get(1, 1), 0);
  EXPECT_TRUE(f.meta.empty());
}

TEST(LoadPbm, ParsesPackedP4) {
  Bytes data = bytes_of("P4\n1 1\n");
  data.push_back(0x80);
  PbmFile f = load_pbm(data);
  EXPECT_EQ(f.image.width(), 1u);
  EXPECT_EQ(f.image.height(), 1u);
  EXPECT_EQ(f.image.get(0, 0), 1);
}

TEST(SavePbm, AsciiAndPackedExactBytes) {
  BinaryImage white(1, 1, 0);
  EXPECT_EQ(save_pbm(white, PbmFormat::P1), bytes_of("P1\n1 1\n0\n"));

  BinaryImage black(1, 1, 1);
  Bytes expect = bytes_of("P4\n1 1\n");
  expect.push_back(0x80);
  EXPECT_EQ(save_pbm(black, PbmFormat::P4), expect);
}

TEST(SavePbm, MetadataCommentLines) {
  BinaryImage img(1, 1, 0);
  Bytes out = save_pbm(img, PbmFormat::P1, {{"scheme", "2n"}});
  std::string text(out.begin(), out.end());
  EXPECT_NE(text.find("# scheme=2n\n"), std::string::npos);

  PbmFile back = load_pbm(out);
  ASSERT_EQ(back.meta.size(), 1u);
  EXPECT_EQ(back.meta[0].first, "scheme");
  EXPECT_EQ(back.meta[0].second, "2n");

  EXPECT_THROW(save_pbm(img, PbmFormat::P1, {{"a=b", "c"}}),
               std::invalid_argument);
  EXPECT_THROW(save_pbm(img, PbmFormat::P1, {{"a", "b\nc"}}),
               std::invalid_argument);
}

TEST(Pbm, RoundTripRandomizedBothFormats) {
  std::mt19937_64 rng(42);
  for (int it = 0; it < 60; ++it) {
    BinaryImage img = random_image(rng);
    MetaList meta;
    if (it % 3 == 0) meta = {{"scheme", "2n"}, {"index", "3"}, {"seed", "42"}};
    PbmFormat fmt = (it % 2 == 0) ? PbmFormat::P1 : PbmFormat::P4;
    Bytes data = save_pbm(img, fmt, meta);
    PbmFile back = load_pbm(data);
    EXPECT_EQ(back.image, img);
    EXPECT_EQ(back.meta, meta);
    // serialize(parse(x)) == x as well
    EXPECT_EQ(save_pbm(back.image, fmt, back.meta), data);
  }
}

TEST(Pbm, CanonicalP4HasNoMetadata) {
  BinaryImage img(9, 2, 1);
  Bytes canon = canonical_p4(img);
  std::string text(canon.begin(), canon.end());
  EXPECT_EQ(text.rfind("P4\n9 2\n", 0), 0u);
  EXPECT_EQ(canon.size(), 7u + 2u * 2u);  // header + two 2-byte rows
  EXPECT_EQ(load_pbm(canon).image, img);
}

TEST(LoadPbm, ErrorsNameByteOffsets) {
  try {
    load_pbm(bytes_of("P7\n1 1\n0"));
    FAIL() << "expected PbmParseError";
  } catch (const PbmParseError& e) {
    EXPECT_EQ(e.offset(), 1u);
    EXPECT_NE(std::string(e.what()).find("at byte 1"), std::string::npos);
  }

  EXPECT_THROW(load_pbm(bytes_of("")), PbmParseError);
  EXPECT_THROW(load_pbm(bytes_of("P")), PbmParseError);

  // truncated P4 raster
  Bytes trunc = bytes_of("P4\n9 2\n");
  trunc.push_back(0x00);
  try {
    load_pbm(trunc);
    FAIL() << "expected PbmParseError";
  } catch (const PbmParseError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }

  // dimension overflow: 65537 > 2^16
  try {
    load_pbm(bytes_of("P1\n65537 1\n0\n"));
    FAIL() << "expected PbmParseError";
  } catch (const PbmParseError& e) {
    EXPECT_EQ(e.offset(), 3u);
    EXPECT_NE(std::string(e.what()).find("overflow"), std::string::npos);
  }

  EXPECT_THROW(load_pbm(bytes_of("P1\n0 1\n\n")), PbmParseError);
  EXPECT_THROW(load_pbm(bytes_of("P1\n1 1\n2\n")), PbmParseError);
  EXPECT_THROW(load_pbm(bytes_of("P1\n1 1\n0\nx")), PbmParseError);
  EXPECT_THROW(load_pbm(bytes_of("P1\n2 2\n0 1 1\n")), PbmParseError);
}

TEST(LoadPbm, RejectsNonzeroPadding) {
  Bytes data = bytes_of("P4\n1 1\n");
  data.push_back(0x40);  // bit 0 white, but padding bit set
  EXPECT_THROW(load_pbm(data), PbmParseError);
}

TEST(LoadPgm, AsciiAndBinary) {
  GrayImage p2 = load_pgm(bytes_of("P2\n2 2\n255\n0 128 255 64\n"));
  EXPECT_EQ(p2.get(0, 0), 0);
  EXPECT_EQ(p2.get(0, 1), 128);
  EXPECT_EQ(p2.get(1, 0), 255);
  EXPECT_EQ(p2.get(1, 1), 64);

  Bytes p5 = bytes_of("P5\n# made by a scanner\n2 1\n255\n");
  p5.push_back(7);
  p5.push_back(200);
  GrayImage img = load_pgm(p5);
  EXPECT_EQ(img.get(0, 0), 7);
  EXPECT_EQ(img.get(0, 1), 200);

  EXPECT_THROW(load_pgm(bytes_of("P5\n1 1\n65535\n\0")), PbmParseError);
  EXPECT_THROW(load_pgm(bytes_of("P1\n1 1\n0\n")), PbmParseError);
  EXPECT_THROW(load_pgm(bytes_of("P2\n2 1\n100\n0 101\n")), PbmParseError);
}
