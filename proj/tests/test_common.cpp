#include <gtest/gtest.h>

#include <atomic>
#include <numeric>

#include "provmind/common.hpp"

using namespace provmind;

TEST(Canonical, LabelFoldsCaseAndSpace) {
  EXPECT_EQ(canonical_label("  Ball   Mill \t"), "ball mill");
  EXPECT_EQ(canonical_label(""), "");
}

TEST(Canonical, KeyUsesUnderscores) {
  EXPECT_EQ(canonical_key(" Heating-Rate "), "heating_rate");
  EXPECT_EQ(canonical_key("cooling rate"), "cooling_rate");
}

TEST(Canonical, ValueLowersUnitsOnly) {
  EXPECT_EQ(canonical_value("  900   C "), "900 c");
  EXPECT_EQ(canonical_value("Argon"), "Argon");
}

TEST(Hashing, StableAndSeedDependent) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
  EXPECT_EQ(derive_seed(42, std::string_view("x")), derive_seed(42, std::string_view("x")));
  EXPECT_NE(derive_seed(42, std::string_view("x")), derive_seed(43, std::string_view("x")));
}

TEST(RngTest, ReproducibleAndInRange) {
  Rng a(7), b(7);
  for (int i = 0; i < 200; ++i) {
    const auto x = a.index(13);
    EXPECT_EQ(x, b.index(13));
    EXPECT_LT(x, 13u);
    const double u = a.unit();
    EXPECT_EQ(u, b.unit());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(RngTest, WeightedNeverPicksZeroWeight) {
  Rng r(3);
  std::vector<double> w{0.0, 1.0, 0.0, 3.0};
  std::vector<int> hits(4, 0);
  for (int i = 0; i < 4000; ++i) ++hits[r.weighted(w)];
  EXPECT_EQ(hits[0], 0);
  EXPECT_EQ(hits[2], 0);
  EXPECT_NEAR(hits[3] / 4000.0, 0.75, 0.03);
}

TEST(RngTest, ShuffleIsPermutation) {
  Rng r(11);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto s = v;
  r.shuffle(s);
  EXPECT_NE(s, v);
  std::sort(s.begin(), s.end());
  EXPECT_EQ(s, v);
}

TEST(Jaccard, Basics) {
  EXPECT_DOUBLE_EQ(jaccard({}, {}), 1.0);
  EXPECT_DOUBLE_EQ(jaccard({"a"}, {}), 0.0);
  EXPECT_DOUBLE_EQ(jaccard({"a", "b"}, {"b", "c"}), 1.0 / 3.0);
}

TEST(ParallelFor, VisitsEachIndexOnce) {
  std::vector<std::atomic<int>> seen(1000);
  parallel_for(seen.size(), 8, [&](std::size_t i) { seen[i]++; });
  for (const auto& s : seen) EXPECT_EQ(s.load(), 1);
  parallel_for(0, 4, [&](std::size_t) { FAIL(); });
}

TEST(ErrorTest, CarriesCode) {
  try {
    throw Error(ErrorCode::gold_mismatch, "x");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::gold_mismatch);
    EXPECT_NE(std::string(e.what()).find("GoldMismatch"), std::string::npos);
  }
}
