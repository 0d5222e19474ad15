#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dendrite/capacity.hpp"

using namespace dendrite;

namespace {
double ln_choose(double n, double r) { return std::lgamma(n + 1) - std::lgamma(r + 1) - std::lgamma(n - r + 1); }
}  // namespace

TEST(Capacity, SmallLinearCounts) {
  // Two synapses on two lines: {aa, ab, bb}.
  EXPECT_EQ(*linear_capacity(2, 2).exact, 3);
  EXPECT_EQ(*linear_capacity(1, 50).exact, 1);
  EXPECT_EQ(*linear_capacity(5, 1).exact, 5);
  EXPECT_EQ(multiset_count(4, 3), 20);
  EXPECT_EQ(multiset_count(7, 0), 1);
}

TEST(Capacity, SmallNonlinearCounts) {
  // Two single-synapse branches on two lines.
  EXPECT_EQ(*nonlinear_capacity(2, 2, 1).exact, 3);
  // Three lines, two branches of two: f = 6 distinct branches, C(7, 2) = 21.
  EXPECT_EQ(*nonlinear_capacity(3, 2, 2).exact, 21);
}

TEST(Capacity, SingleBranchEqualsLinear) {
  for (std::size_t k : {1u, 5u, 40u}) {
    EXPECT_EQ(*nonlinear_capacity(30, 1, k).exact, *linear_capacity(30, k).exact);
  }
}

TEST(Capacity, LogMatchesLgammaOracle) {
  const auto lin = linear_capacity(400, 200);
  ASSERT_TRUE(lin.exact);
  const double oracle = ln_choose(599, 200);
  EXPECT_NEAR(lin.ln, oracle, 1e-10 * oracle);
  EXPECT_NEAR(ln_big(*lin.exact), oracle, 1e-10 * oracle);
  // f = C(10 + 399, 10) branches, then C(f + 19, 20).
  const double ln_f = ln_choose(409, 10);
  const auto nl = nonlinear_capacity(400, 20, 10);
  double direct = 0;
  const double f = std::exp(ln_f);
  for (int i = 0; i < 20; ++i) direct += std::log(f + i) - std::log(i + 1.0);
  EXPECT_NEAR(nl.ln, direct, 1e-10 * direct);
}

TEST(Capacity, StableLogOfHugeN) {
  EXPECT_NEAR(ln_multiset_count(std::log(1e300), 2), 2 * std::log(1e300) - std::log(2.0), 1e-9);
  EXPECT_NEAR(ln_multiset_count(std::log(10.0), 3), std::log(220.0), 1e-12);
  EXPECT_EQ(ln_multiset_count(5.0, 0), 0.0);
}

TEST(Capacity, LnBig) {
  EXPECT_NEAR(ln_big(BigInt(1000)), std::log(1000.0), 1e-15);
  const BigInt huge = BigInt(1) << 5000;
  EXPECT_NEAR(ln_big(huge), 5000 * std::log(2.0), 1e-9);
  EXPECT_THROW(ln_big(BigInt(0)), std::invalid_argument);
}

TEST(Capacity, ExactBudget) {
  EXPECT_FALSE(nonlinear_capacity(400, 200, 1, 64).exact);
  EXPECT_GT(nonlinear_capacity(400, 200, 1, 64).ln, 0.0);
}

TEST(Capacity, InvalidArguments) {
  EXPECT_THROW(linear_capacity(0, 3), std::invalid_argument);
  EXPECT_THROW(linear_capacity(3, 0), std::invalid_argument);
  EXPECT_THROW(nonlinear_capacity(3, 0, 2), std::invalid_argument);
  EXPECT_THROW(nonlinear_capacity(3, 2, 0), std::invalid_argument);
  const std::size_t bad[] = {3};
  EXPECT_THROW(capacity_sweep(400, 200, bad), std::invalid_argument);
}

TEST(Capacity, SweepIsUnimodalInBranchCount) {
  const auto pts = capacity_sweep(400, 200);
  ASSERT_GE(pts.size(), 5u);
  std::size_t peak = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_EQ(pts[i].m * pts[i].k, 200u);
    EXPECT_GT(pts[i].m, pts[i - 1].m);
    if (pts[i].ln_capacity > pts[peak].ln_capacity) peak = i;
  }
  for (std::size_t i = 1; i <= peak; ++i) EXPECT_GT(pts[i].ln_capacity, pts[i - 1].ln_capacity);
  for (std::size_t i = peak + 1; i < pts.size(); ++i) EXPECT_LT(pts[i].ln_capacity, pts[i - 1].ln_capacity);
  EXPECT_EQ(best_point(pts).m, pts[peak].m);
}

TEST(Capacity, GrowsWithBranchSize) {
  const std::size_t ks[] = {1, 5, 10, 25, 50};
  const auto pts = capacity_vs_k(400, 20, ks);
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_GT(pts[i].ln_capacity, pts[i - 1].ln_capacity);
}

TEST(Capacity, CsvHeader) {
  const std::size_t ms[] = {1, 2};
  std::ostringstream out;
  write_capacity_csv(out, capacity_sweep(4, 2, ms));
  const std::string s = out.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "m,k,ln_capacity");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3);
}
