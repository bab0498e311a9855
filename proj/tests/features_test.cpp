#include <gtest/gtest.h>

#include <random>

#include "emopipe/error.hpp"
#include "emopipe/features.hpp"

using namespace emopipe;

namespace {

LandmarkSet random_set(std::uint64_t seed, double lo = 0.0, double hi = 350.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  LandmarkSet lm;
  for (auto& p : lm.points) p = {d(rng), d(rng)};
  return lm;
}

LandmarkSet filled(double x, double y) {
  LandmarkSet lm;
  for (auto& p : lm.points) p = {x, y};
  return lm;
}

// Straightforward re-derivation of the relative layout, used as the oracle.
std::vector<double> modified_oracle(const LandmarkSet& lm) {
  const auto& p = lm.points;
  std::vector<double> out;
  double minx = p[0].x, maxx = p[0].x, miny = p[0].y, maxy = p[0].y;
  for (int i = 1; i <= 16; ++i) {
    minx = std::min(minx, p[i].x);
    maxx = std::max(maxx, p[i].x);
    miny = std::min(miny, p[i].y);
    maxy = std::max(maxy, p[i].y);
  }
  out.push_back((minx + maxx) / 2 / 350);
  out.push_back((miny + maxy) / 2 / 350);
  out.push_back((maxx - minx) / 350);
  out.push_back((maxy - miny) / 350);
  auto mean = [&](int a, int b) {
    double sx = 0, sy = 0;
    for (int i = a; i <= b; ++i) {
      sx += p[i].x;
      sy += p[i].y;
    }
    return Point{sx / (b - a + 1), sy / (b - a + 1)};
  };
  auto rel = [&](int a, int b, Point c) {
    for (int i = a; i <= b; ++i) {
      out.push_back((p[i].x - c.x) / 350);
      out.push_back((p[i].y - c.y) / 350);
    }
  };
  const Point mouth = mean(48, 67);
  out.push_back(mouth.x / 350);
  out.push_back(mouth.y / 350);
  rel(48, 67, mouth);
  const Point nose = mean(27, 35);
  out.push_back(nose.x / 350);
  out.push_back(nose.y / 350);
  rel(27, 35, nose);
  const Point reye = mean(36, 41);
  out.push_back(reye.x / 350);
  out.push_back(reye.y / 350);
  rel(36, 41, reye);
  rel(17, 21, reye);
  const Point leye = mean(42, 47);
  out.push_back(leye.x / 350);
  out.push_back(leye.y / 350);
  rel(42, 47, leye);
  rel(22, 26, leye);
  return out;
}

// Positions of the center entries (x index of each pair) in the modified vector.
constexpr std::array<std::size_t, 5> kCenterX{0, 4, 46, 66, 90};

bool is_center_entry(std::size_t i) {
  for (auto c : kCenterX)
    if (i == c || i == c + 1) return true;
  return false;
}

}  // namespace

TEST(AbsoluteFeatures, BoundaryAllOnes) {
  const auto f = absolute_features(filled(350, 350));
  EXPECT_EQ(f.kind, FeatureKind::Absolute);
  ASSERT_EQ(f.values.size(), 136u);
  for (double v : f.values) EXPECT_EQ(v, 1.0);
}

TEST(AbsoluteFeatures, Midpoint) {
  LandmarkSet lm;
  lm.points[0] = {175, 175};
  const auto f = absolute_features(lm);
  EXPECT_EQ(f.values[0], 0.5);
  EXPECT_EQ(f.values[1], 0.5);
}

TEST(AbsoluteFeatures, ElementwiseOracleAndRange) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto lm = random_set(seed);
    const auto f = absolute_features(lm);
    ASSERT_EQ(f.values.size(), 136u);
    for (std::size_t i = 0; i < 68; ++i) {
      EXPECT_EQ(f.values[2 * i], lm.points[i].x / 350.0);
      EXPECT_EQ(f.values[2 * i + 1], lm.points[i].y / 350.0);
    }
    for (double v : f.values) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(PartCenter, Examples) {
  const std::vector<Point> two{{0, 0}, {2, 2}};
  EXPECT_EQ(part_center(two), (Point{1, 1}));
  const std::vector<Point> one{{5, 7}};
  EXPECT_EQ(part_center(one), (Point{5, 7}));
}

TEST(PartCenter, EmptyThrows) {
  try {
    part_center({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyPart);
  }
}

TEST(PartCenter, MouthMatchesSummationOracle) {
  const auto lm = random_set(99);
  double sx = 0, sy = 0;
  for (int i = 48; i < 68; ++i) {
    sx += lm.points[i].x;
    sy += lm.points[i].y;
  }
  const auto c = part_center(std::span<const Point>(lm.points.data() + 48, 20));
  EXPECT_NEAR(c.x, sx / 20, 1e-12);
  EXPECT_NEAR(c.y, sy / 20, 1e-12);
}

TEST(ModifiedFeatures, LengthIs114) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = modified_features(random_set(seed));
    EXPECT_EQ(f.kind, FeatureKind::Modified);
    EXPECT_EQ(f.values.size(), 114u);
  }
  EXPECT_EQ(feature_count(FeatureKind::Modified), 114u);
  EXPECT_EQ(feature_count(FeatureKind::Absolute), 136u);
}

TEST(ModifiedFeatures, DegenerateFace) {
  const auto f = modified_features(filled(100, 100));
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (is_center_entry(i))
      EXPECT_DOUBLE_EQ(f.values[i], 100.0 / 350.0) << i;
    else
      EXPECT_EQ(f.values[i], 0.0) << i;
  }
}

TEST(ModifiedFeatures, MatchesLayoutOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto lm = random_set(seed + 100);
    const auto f = modified_features(lm);
    const auto want = modified_oracle(lm);
    ASSERT_EQ(want.size(), 114u);
    for (std::size_t i = 0; i < 114; ++i) EXPECT_NEAR(f.values[i], want[i], 1e-12) << i;
  }
}

TEST(ModifiedFeatures, InRangeForInRangeInput) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto f = modified_features(random_set(seed + 500));
    for (std::size_t i = 0; i < 114; ++i) {
      if (is_center_entry(i) || i == 2 || i == 3) {
        EXPECT_GE(f.values[i], 0.0);
        EXPECT_LE(f.values[i], 1.0);
      } else {
        EXPECT_GE(f.values[i], -1.0);
        EXPECT_LE(f.values[i], 1.0);
      }
    }
  }
}

TEST(ModifiedFeatures, TranslationByTen) {
  const auto lm = random_set(7);
  LandmarkSet moved = lm;
  for (auto& p : moved.points) p = {p.x + 10, p.y + 10};
  const auto a = modified_features(lm);
  const auto b = modified_features(moved);
  for (std::size_t i = 0; i < 114; ++i) {
    const double shift = is_center_entry(i) ? 10.0 / 350.0 : 0.0;
    EXPECT_NEAR(b.values[i] - a.values[i], shift, 1e-9) << i;
  }
}

TEST(ModifiedFeatures, TranslationInvarianceProperty) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> shift(-200.0, 200.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto lm = random_set(rng());
    const double dx = shift(rng), dy = shift(rng);
    LandmarkSet moved = lm;
    for (auto& p : moved.points) p = {p.x + dx, p.y + dy};
    const auto a = modified_features(lm);
    const auto b = modified_features(moved);
    for (std::size_t i = 0; i < 114; ++i) {
      double expected = 0.0;
      if (is_center_entry(i)) expected = ((i % 2 == 0) ? dx : dy) / 350.0;
      ASSERT_NEAR(b.values[i] - a.values[i], expected, 1e-9) << "trial " << trial << " entry " << i;
    }
  }
}

TEST(Features, PureAndDeterministic) {
  const auto lm = random_set(5);
  EXPECT_EQ(modified_features(lm).values, modified_features(lm).values);
  EXPECT_EQ(absolute_features(lm).values, absolute_features(lm).values);
  EXPECT_EQ(rasterize(lm), rasterize(lm));
  EXPECT_EQ(extract_features(lm, FeatureKind::Modified).values, modified_features(lm).values);
}

TEST(Rasterize, CoincidentPointsCollapse) {
  const auto g = rasterize(filled(10.0, 20.0));
  EXPECT_EQ(g.size(), 350);
  EXPECT_EQ(g.count(), 1u);
  EXPECT_EQ(g.at(20, 10), 1);
}

TEST(Rasterize, RoundThenClamp) {
  auto lm = filled(100, 100);
  lm.points[0] = {350.4, -2.0};
  const auto g = rasterize(lm);
  EXPECT_EQ(g.at(0, 349), 1);
  EXPECT_EQ(g.count(), 2u);
}

TEST(Rasterize, HalfRoundsAwayFromZero) {
  auto lm = filled(0, 0);
  lm.points[0] = {2.5, 3.5};
  const auto g = rasterize(lm);
  EXPECT_EQ(g.at(4, 3), 1);
}

TEST(Rasterize, DistinctIntegerPointsAreInjective) {
  LandmarkSet lm;
  for (int i = 0; i < 68; ++i) lm.points[i] = {static_cast<double>(i * 5), static_cast<double>(349 - i * 3)};
  const auto g = rasterize(lm);
  EXPECT_EQ(g.count(), 68u);
  for (int i = 0; i < 68; ++i) EXPECT_EQ(g.at(349 - i * 3, i * 5), 1);
}

TEST(Rasterize, CountBoundsProperty) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto g = rasterize(random_set(seed, -50, 400));
    EXPECT_GE(g.count(), 1u);
    EXPECT_LE(g.count(), 68u);
  }
}

TEST(Rasterize, SmallerGridScalesCoordinates) {
  auto lm = filled(175, 350);
  const auto g = rasterize(lm, 16);
  EXPECT_EQ(g.size(), 16);
  EXPECT_EQ(g.count(), 1u);
  // 175*16/350 = 8, 350*16/350 = 16 -> clamped to 15
  EXPECT_EQ(g.at(15, 8), 1);
}

TEST(Hflip, BoundaryReflection) {
  LandmarkGrid g;
  g.set(5, 0);
  const auto f = hflip(g);
  EXPECT_EQ(f.count(), 1u);
  EXPECT_EQ(f.at(5, 349), 1);
}

TEST(Hflip, InvolutionAndCountPreserved) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = rasterize(random_set(seed));
    const auto f = hflip(g);
    EXPECT_EQ(f.count(), g.count());
    EXPECT_EQ(hflip(f), g);
  }
}

TEST(Hflip, ColumnHistogramReversed) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = rasterize(random_set(seed + 40));
    const auto f = hflip(g);
    std::vector<int> hg(350, 0), hf(350, 0);
    for (int r = 0; r < 350; ++r)
      for (int c = 0; c < 350; ++c) {
        hg[c] += g.at(r, c);
        hf[c] += f.at(r, c);
      }
    std::reverse(hg.begin(), hg.end());
    EXPECT_EQ(hf, hg);
  }
}
