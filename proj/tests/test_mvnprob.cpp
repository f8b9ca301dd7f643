#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "mvop/mvnprob.hpp"
#include "support.hpp"

using mvop::Corr3;
using mvop::kInf;

namespace {

double phi_50_digits(double x) {
  using boost::multiprecision::cpp_bin_float_50;
  const cpp_bin_float_50 v = erfc(-cpp_bin_float_50(x) / sqrt(cpp_bin_float_50(2))) / 2;
  return static_cast<double>(v);
}

}  // namespace

TEST(StdNormalCdf, KnownValues) {
  EXPECT_EQ(mvop::std_normal_cdf(0.0), 0.5);
  EXPECT_EQ(mvop::std_normal_cdf(-kInf), 0.0);
  EXPECT_EQ(mvop::std_normal_cdf(kInf), 1.0);
  EXPECT_NEAR(mvop::std_normal_cdf(1.959964), 0.975, 1e-7);
  EXPECT_NEAR(mvop::std_normal_cdf(1.959964), phi_50_digits(1.959964), 1e-16);
}

TEST(StdNormalCdf, MatchesHighPrecisionOracle) {
  for (double x = -10.0; x <= 10.0; x += 0.0625) {
    const double ref = phi_50_digits(x);
    EXPECT_NEAR(mvop::std_normal_cdf(x), ref, 2e-16 + 1e-14 * ref) << "x=" << x;
  }
}

TEST(StdNormalCdf, SymmetryAndMonotone) {
  double prev = 0.0;
  for (double x = -9.0; x <= 9.0; x += 0.01) {
    const double p = mvop::std_normal_cdf(x);
    EXPECT_NEAR(mvop::std_normal_cdf(-x), 1.0 - p, 1e-15);
    EXPECT_GE(p, prev);
    prev = p;
  }
}

TEST(StdNormalCdf, NanIsInvalidBound) {
  EXPECT_THROW(mvop::std_normal_cdf(std::numeric_limits<double>::quiet_NaN()), mvop::InvalidBound);
}

TEST(StdNormalQuantile, InvertsCdf) {
  for (double p : {1e-12, 1e-6, 0.001, 0.025, 0.3, 0.5, 0.7, 0.975, 0.999, 1.0 - 1e-9}) {
    const double x = mvop::std_normal_quantile(p);
    EXPECT_NEAR(mvop::std_normal_cdf(x), p, 1e-9 * std::max(p, 1e-3)) << "p=" << p;
  }
  EXPECT_NEAR(mvop::std_normal_quantile(0.975), 1.959963984540054, 1e-9);
  EXPECT_EQ(mvop::std_normal_quantile(0.5), 0.0);
}

TEST(BvnCdf, SpecExamples) {
  EXPECT_NEAR(mvop::bvn_cdf(0, 0, 0), 0.25, 1e-15);
  EXPECT_NEAR(mvop::bvn_cdf(0, 0, 0.5), 1.0 / 3.0, 1e-8);
  for (double b2 : {-3.0, -0.4, 0.0, 1.7}) {
    for (double rho : {-0.9, 0.0, 0.6, 0.99}) {
      EXPECT_NEAR(mvop::bvn_cdf(kInf, b2, rho), mvop::std_normal_cdf(b2), 1e-15);
      EXPECT_NEAR(mvop::bvn_cdf(b2, kInf, rho), mvop::std_normal_cdf(b2), 1e-15);
      EXPECT_EQ(mvop::bvn_cdf(-kInf, b2, rho), 0.0);
    }
  }
}

TEST(BvnCdf, OrthantArcsineIdentity) {
  for (double rho = -0.999; rho < 1.0; rho += 0.037) {
    EXPECT_NEAR(mvop::bvn_cdf(0, 0, rho), 0.25 + std::asin(rho) / (2.0 * std::numbers::pi), 1e-12) << rho;
  }
}

TEST(BvnCdf, MatchesOwensTOracle) {
  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> b(-8.0, 8.0), r(-0.999, 0.999);
  for (int i = 0; i < 2000; ++i) {
    const double h = b(eng), k = b(eng), rho = r(eng);
    EXPECT_NEAR(mvop::bvn_cdf(h, k, rho), oracle::bvn(h, k, rho), 1e-10) << h << ' ' << k << ' ' << rho;
  }
}

TEST(BvnCdf, DegenerateCorrelation) {
  EXPECT_THROW(mvop::bvn_cdf(0, 0, 1.0), mvop::DegenerateCorrelation);
  EXPECT_THROW(mvop::bvn_cdf(0, 0, -1.2), mvop::DegenerateCorrelation);
}

TEST(TvnCdf, SpecExamples) {
  EXPECT_NEAR(mvop::tvn_cdf(0, 0, 0, Corr3{}), 0.125, 1e-14);
  EXPECT_NEAR(mvop::tvn_cdf(0, 0, 0, Corr3{0.5, 0.5, 0.5}), 0.25, 1e-6);
  std::mt19937_64 eng(3);
  for (int i = 0; i < 20; ++i) {
    const Corr3 r = oracle::random_corr(eng);
    EXPECT_NEAR(mvop::tvn_cdf(0.8, kInf, kInf, r), mvop::std_normal_cdf(0.8), 1e-15);
  }
}

TEST(TvnCdf, OrthantClosedForm) {
  std::mt19937_64 eng(5);
  for (int i = 0; i < 200; ++i) {
    const Corr3 r = oracle::random_corr(eng, 0.99);
    const double expected = 0.125 + (std::asin(r.r12) + std::asin(r.r13) + std::asin(r.r23)) / (4.0 * std::numbers::pi);
    EXPECT_NEAR(mvop::tvn_cdf(0, 0, 0, r), expected, 1e-10);
  }
}

TEST(TvnCdf, ReducesToBvnWithOneInfiniteBound) {
  std::mt19937_64 eng(7);
  std::uniform_real_distribution<double> b(-6.0, 6.0);
  for (int i = 0; i < 300; ++i) {
    const Corr3 r = oracle::random_corr(eng);
    const double x = b(eng), y = b(eng);
    EXPECT_NEAR(mvop::tvn_cdf(kInf, x, y, r), mvop::bvn_cdf(x, y, r.r23), 1e-9);
    EXPECT_NEAR(mvop::tvn_cdf(x, kInf, y, r), mvop::bvn_cdf(x, y, r.r13), 1e-9);
    EXPECT_NEAR(mvop::tvn_cdf(x, y, kInf, r), mvop::bvn_cdf(x, y, r.r12), 1e-9);
  }
}

TEST(TvnCdf, MatchesConditioningOracle) {
  std::mt19937_64 eng(13);
  std::uniform_real_distribution<double> b(-4.0, 4.0);
  for (int i = 0; i < 60; ++i) {
    const Corr3 r = oracle::random_corr(eng);
    const double b1 = b(eng), b2 = b(eng), b3 = b(eng);
    EXPECT_NEAR(mvop::tvn_cdf(b1, b2, b3, r), oracle::tvn(b1, b2, b3, r), 1e-8)
        << b1 << ' ' << b2 << ' ' << b3 << " r=" << r.r12 << ',' << r.r13 << ',' << r.r23;
  }
}

TEST(TvnCdf, RejectsNonPositiveDefinite) {
  EXPECT_THROW(mvop::tvn_cdf(0, 0, 0, Corr3{0.9, 0.9, -0.9}), mvop::Error);
  EXPECT_THROW(mvop::tvn_cdf(0, 0, 0, Corr3{1.0, 0.0, 0.0}), mvop::Error);
}

TEST(RectangleProb, LowerInfinityEqualsCdf) {
  const Corr3 r{0.3, -0.2, 0.5};
  const std::array<double, 3> up{0.4, -0.3, 1.1};
  EXPECT_NEAR(mvop::rectangle_prob({-kInf, -kInf, -kInf}, up, r), mvop::tvn_cdf(0.4, -0.3, 1.1, r), 1e-15);
}

TEST(RectangleProb, IndependenceFactorizes) {
  const std::array<double, 3> lo{-1.0, 0.2, -kInf}, hi{0.5, 1.4, -0.3};
  double prod = 1.0;
  for (int i = 0; i < 3; ++i) prod *= mvop::std_normal_cdf(hi[i]) - mvop::std_normal_cdf(lo[i]);
  EXPECT_NEAR(mvop::rectangle_prob(lo, hi, Corr3{}), prod, 1e-14);
}

TEST(RectangleProb, MonteCarloAtFittedCorrelations) {
  const Corr3 r{0.439, 0.181, -0.097};
  const std::array<double, 3> lo{-0.5, -0.5, -0.5}, hi{0.5, 0.5, 0.5};
  const auto mc = oracle::rectangle_mc(lo, hi, r, 1'000'000, 2024);
  EXPECT_NEAR(mvop::rectangle_prob(lo, hi, r), mc.p, 3.0 * mc.se);
}

TEST(RectangleProb, InvalidCell) {
  EXPECT_THROW(mvop::rectangle_prob({0, 0, 0}, {1, 0, 1}, Corr3{}), mvop::InvalidCell);
  EXPECT_THROW(mvop::rectangle_prob({2, 0, 0}, {1, 1, 1}, Corr3{}), mvop::InvalidCell);
}

TEST(RectangleProb, MonotoneInBounds) {
  std::mt19937_64 eng(17);
  std::uniform_real_distribution<double> b(-3.0, 3.0), step(0.0, 1.0);
  std::uniform_int_distribution<int> axis(0, 2), side(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const Corr3 r = oracle::random_corr(eng);
    std::array<double, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      const double x = b(eng), y = b(eng);
      lo[a] = std::min(x, y);
      hi[a] = std::max(x, y) + 1e-3;
    }
    const double base = mvop::rectangle_prob(lo, hi, r);
    auto lo2 = lo, hi2 = hi;
    const int a = axis(eng);
    if (side(eng) == 0) {
      lo2[a] -= step(eng);
    } else {
      hi2[a] += step(eng);
    }
    EXPECT_GE(mvop::rectangle_prob(lo2, hi2, r), base - 1e-12);
  }
}

TEST(RectangleProb, GridPartitionSumsToOne) {
  std::mt19937_64 eng(19);
  const std::array<std::vector<double>, 3> cuts{std::vector<double>{-kInf, -1.2, 0.1, kInf},
                                                 std::vector<double>{-kInf, -0.4, 0.3, 0.9, kInf},
                                                 std::vector<double>{-kInf, 0.0, kInf}};
  for (int rep = 0; rep < 20; ++rep) {
    const Corr3 r = oracle::random_corr(eng);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts[0].size(); ++i)
      for (std::size_t j = 0; j + 1 < cuts[1].size(); ++j)
        for (std::size_t k = 0; k + 1 < cuts[2].size(); ++k) {
          total += mvop::rectangle_prob({cuts[0][i], cuts[1][j], cuts[2][k]},
                                        {cuts[0][i + 1], cuts[1][j + 1], cuts[2][k + 1]}, r);
        }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(RectangleProb, AxisPermutationSymmetry) {
  std::mt19937_64 eng(23);
  std::uniform_real_distribution<double> b(-2.5, 2.5);
  for (int i = 0; i < 200; ++i) {
    const Corr3 r = oracle::random_corr(eng);
    std::array<double, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      lo[a] = b(eng);
      hi[a] = lo[a] + 0.05 + std::abs(b(eng));
    }
    const double p = mvop::rectangle_prob(lo, hi, r);
    // Swap axes 1 and 3: r12 <-> r23 (via r32), r13 stays.
    EXPECT_NEAR(mvop::rectangle_prob({lo[2], lo[1], lo[0]}, {hi[2], hi[1], hi[0]}, Corr3{r.r23, r.r13, r.r12}), p,
                1e-10);
    // Cycle (1,2,3) -> (2,3,1).
    EXPECT_NEAR(mvop::rectangle_prob({lo[1], lo[2], lo[0]}, {hi[1], hi[2], hi[0]}, Corr3{r.r23, r.r12, r.r13}), p,
                1e-10);
  }
}

TEST(RectangleProb, ExtremeBoundsAreClamped) {
  const Corr3 r{0.5, 0.2, 0.1};
  EXPECT_NEAR(mvop::rectangle_prob({-1e300, -50, -9}, {1e300, 60, 9}, r), 1.0, 1e-15);
  EXPECT_GE(mvop::rectangle_prob({8.6, 8.7, 8.8}, {9.0, 9.1, kInf}, r), 0.0);
  EXPECT_THROW(mvop::rectangle_prob({std::numeric_limits<double>::quiet_NaN(), 0, 0}, {1, 1, 1}, r),
               mvop::InvalidBound);
}

TEST(RectangleProb, ConcurrentCallsAgree) {
  const Corr3 r{0.439, 0.181, -0.097};
  const double expected = mvop::rectangle_prob({-0.5, -0.1, -1.0}, {0.7, 1.2, 0.3}, r);
  std::vector<double> got(8, 0.0);
  {
    std::vector<std::jthread> ts;
    for (std::size_t t = 0; t < got.size(); ++t) {
      ts.emplace_back([&, t] {
        for (int i = 0; i < 200; ++i) got[t] = mvop::rectangle_prob({-0.5, -0.1, -1.0}, {0.7, 1.2, 0.3}, r);
      });
    }
  }
  for (double g : got) EXPECT_EQ(g, expected);
}
