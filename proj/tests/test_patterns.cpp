#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "dendrite/patterns.hpp"

using namespace dendrite;

TEST(RandomTask, GaussianTaskHasOneActiveFieldPerDimension) {
  TaskSpec s;
  s.patterns = 1000;
  s.seed = 7;
  const auto pats = generate_random_task(s);
  ASSERT_EQ(pats.size(), 1000u);
  for (const auto& p : pats) {
    ASSERT_EQ(p.size(), 400u);
    EXPECT_EQ(p.active_count(), 40u);
    for (std::size_t g = 0; g < 40; ++g) {
      int ones = 0;
      for (std::size_t i = 0; i < 10; ++i) ones += p.bits[g * 10 + i];
      EXPECT_EQ(ones, 1);
    }
  }
}

TEST(RandomTask, SingleFieldIsAlwaysActive) {
  TaskSpec s;
  s.d_o = 1;
  s.n_rf = 1;
  s.patterns = 2;
  for (const auto& p : generate_random_task(s)) EXPECT_EQ(p.bits, std::vector<std::uint8_t>{1});
}

TEST(RandomTask, FieldsAreEquiprobable) {
  TaskSpec s;
  s.d_o = 2;
  s.n_rf = 2;
  s.patterns = 10000;
  s.seed = 3;
  const auto pats = generate_random_task(s);
  for (std::size_t i = 0; i < 4; ++i) {
    double on = 0;
    for (const auto& p : pats) on += p.bits[i];
    EXPECT_NEAR(on / 10000.0, 0.5, 0.02) << "bit " << i;
  }
}

TEST(RandomTask, BothClassesPresentAndSeedDeterministic) {
  TaskSpec s;
  s.patterns = 50;
  s.seed = 11;
  const auto a = generate_random_task(s), b = generate_random_task(s);
  std::size_t pos = 0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    EXPECT_EQ(a[p].bits, b[p].bits);
    EXPECT_EQ(a[p].label, b[p].label);
    pos += a[p].label;
  }
  EXPECT_GT(pos, 0u);
  EXPECT_LT(pos, a.size());
  s.seed = 12;
  EXPECT_NE(generate_random_task(s)[0].bits, a[0].bits);
}

TEST(RandomTask, RejectsUnusableSpec) {
  TaskSpec s;
  s.n_rf = 0;
  EXPECT_THROW(generate_random_task(s), std::invalid_argument);
  s = TaskSpec{};
  s.patterns = 0;
  EXPECT_THROW(generate_random_task(s), std::invalid_argument);
}

TEST(ReceptiveField, MedianOfNormalDecilesGoesToLowerBin) {
  const auto b = gaussian_rf_boundaries(10);
  ASSERT_EQ(b.size(), 9u);
  EXPECT_DOUBLE_EQ(b[4], 0.0);
  // 0 sits on the fifth boundary; the tie rule puts it in interval 4.
  EXPECT_EQ(rf_index(0.0, b), 4u);
  EXPECT_EQ(rf_index(1e-12, b), 5u);
  EXPECT_EQ(rf_index(-1e-12, b), 4u);
}

TEST(ReceptiveField, ExtremesHitEndBins) {
  const auto b = gaussian_rf_boundaries(10);
  EXPECT_EQ(rf_index(-1e9, b), 0u);
  EXPECT_EQ(rf_index(1e9, b), 9u);
  const auto enc = rf_encode(1e9, b);
  ASSERT_EQ(enc.size(), 10u);
  EXPECT_EQ(enc[9], 1);
  EXPECT_EQ(std::accumulate(enc.begin(), enc.end(), 0), 1);
}

TEST(ReceptiveField, BoundariesAreNormalDeciles) {
  const auto b = gaussian_rf_boundaries(10);
  EXPECT_NEAR(b[0], -1.2815515655446004, 1e-9);
  EXPECT_NEAR(b[8], 1.2815515655446004, 1e-9);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(b[i], -b[b.size() - 1 - i], 1e-12);
}

TEST(ReceptiveField, RejectsUnsortedBoundaries) {
  const std::vector<double> bad = {0.5, 0.1};
  EXPECT_THROW(rf_index(0.2, bad), std::invalid_argument);
}

TEST(RateCode, PoissonCountMatchesRate) {
  BinaryPattern p;
  p.bits.assign(1000, 1);
  const auto sp = to_rate_spikes(p, 250.0, 1.0, 200.0, 5);
  const double mean = static_cast<double>(sp.total_spikes()) / 1000.0;
  EXPECT_GE(mean, 47.0);
  EXPECT_LE(mean, 53.0);
  for (const auto& train : sp.spikes)
    for (std::size_t i = 0; i < train.size(); ++i) {
      EXPECT_GE(train[i], 0.0);
      EXPECT_LE(train[i], 200.0);
      if (i) EXPECT_GT(train[i], train[i - 1]);
    }
}

TEST(RateCode, SilentLineWithZeroLowRate) {
  BinaryPattern p;
  p.bits = {0, 0, 0};
  EXPECT_EQ(to_rate_spikes(p, 250.0, 0.0, 200.0, 1).total_spikes(), 0u);
}

TEST(RateCode, AlmostEqualRatesLookAlike) {
  BinaryPattern on, off;
  on.bits.assign(2000, 1);
  off.bits.assign(2000, 0);
  const double a = static_cast<double>(to_rate_spikes(on, 50.0 + 1e-9, 50.0, 200.0, 2).total_spikes());
  const double b = static_cast<double>(to_rate_spikes(off, 50.0 + 1e-9, 50.0, 200.0, 3).total_spikes());
  // Expected 20000 each; sd about 141.
  EXPECT_NEAR(a / b, 1.0, 0.03);
}

TEST(RateCode, RejectsInvertedRates) {
  BinaryPattern p;
  p.bits = {1};
  EXPECT_THROW(to_rate_spikes(p, 1.0, 5.0, 200.0, 1), std::invalid_argument);
}

TEST(SingleSpike, ZeroJitterIsExact) {
  BinaryPattern p;
  p.bits = {1, 0, 1};
  const auto sp = to_single_spikes(p, 100.0, 0.0, 200.0, 9);
  ASSERT_EQ(sp.spikes[0].size(), 1u);
  EXPECT_EQ(sp.spikes[0][0], 100.0);
  EXPECT_TRUE(sp.spikes[1].empty());
  EXPECT_EQ(sp.spikes[2][0], 100.0);
  const auto again = to_single_spikes(p, 100.0, 0.0, 200.0, 123);
  EXPECT_EQ(again.spikes, sp.spikes);
}

TEST(SingleSpike, JitterStaysInWindow) {
  BinaryPattern p;
  p.bits.assign(500, 1);
  const auto sp = to_single_spikes(p, 100.0, 8.0, 200.0, 4);
  for (const auto& t : sp.spikes) {
    ASSERT_EQ(t.size(), 1u);
    EXPECT_GE(t[0], 96.0);
    EXPECT_LE(t[0], 104.0);
  }
}

TEST(SingleSpike, AllZerosGivesNoSpikes) {
  BinaryPattern p;
  p.bits.assign(10, 0);
  EXPECT_EQ(to_single_spikes(p, 100.0, 8.0, 200.0, 1).total_spikes(), 0u);
  EXPECT_THROW(to_single_spikes(p, 1.0, 8.0, 200.0, 1), std::invalid_argument);
}

TEST(PatternMatrix, ColumnsMatchBits) {
  TaskSpec s;
  s.patterns = 30;
  const auto pats = generate_random_task(s);
  const PatternMatrix x(pats);
  EXPECT_EQ(x.patterns(), 30u);
  EXPECT_EQ(x.dim(), 400u);
  std::size_t pos = 0;
  for (std::size_t p = 0; p < 30; ++p) {
    pos += pats[p].label;
    EXPECT_EQ(x.labels()[p], pats[p].label);
    for (std::size_t a = 0; a < 400; a += 37) EXPECT_EQ(x.bit(p, a), pats[p].bits[a]);
  }
  EXPECT_EQ(x.positives(), pos);
}

TEST(PatternCsv, RoundTrip) {
  TaskSpec s;
  s.d_o = 3;
  s.n_rf = 4;
  s.patterns = 12;
  const auto pats = generate_random_task(s);
  std::stringstream io;
  write_patterns_csv(io, pats);
  EXPECT_EQ(io.str().substr(0, 9), "label,x0,");
  const auto back = read_patterns_csv(io);
  ASSERT_EQ(back.size(), pats.size());
  for (std::size_t p = 0; p < pats.size(); ++p) {
    EXPECT_EQ(back[p].bits, pats[p].bits);
    EXPECT_EQ(back[p].label, pats[p].label);
  }
}
