#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "dendrite/bstdsp.hpp"
#include "dendrite/rng.hpp"

using namespace dendrite;

namespace {

SpikePattern empty_input(std::size_t d, const BstdspParams& p) {
  SpikePattern sp;
  sp.duration = p.psc.duration_ms;
  sp.spikes.resize(d);
  return sp;
}

Connectome one_synapse_each() {
  Connectome c;
  c.d = 2;
  c.plus = Neuron(1, 1);
  c.minus = Neuron(1, 1);
  c.plus.afferent = {0};
  c.minus.afferent = {1};
  return c;
}

kernels::NlParams quadratic(const BstdspParams& p) {
  return bstdsp_nonlinearity(NonlinearityConfig{}, ModelKind::Nonlinear, p);
}

struct Fixture {
  std::vector<BinaryPattern> patterns;
  Connectome c;
  BstdspSetup setup;
};

const Fixture& task(double margin_fraction) {
  static std::map<double, Fixture> cache;
  auto it = cache.find(margin_fraction);
  if (it != cache.end()) return it->second;
  Fixture f;
  TaskSpec ts;
  ts.patterns = 120;
  ts.seed = 31;
  f.patterns = generate_random_task(ts);
  Rng rng(32);
  f.c = Connectome::random(10, 10, 400, rng);
  const BstdspParams base;
  const auto br = quadratic(base);
  f.setup = prepare_bstdsp(f.patterns, f.c, base, br, 0.0);
  if (margin_fraction > 0) {
    f.setup = prepare_bstdsp(f.patterns, f.c, base, br, margin_fraction * base.v_thr_mv / f.setup.margin.eta);
  }
  return cache.emplace(margin_fraction, std::move(f)).first->second;
}

}  // namespace

TEST(BstdspNeuron, SilentWithoutInputOrTeacher) {
  const BstdspParams p;
  const auto r = simulate_bstdsp(empty_input(2, p), one_synapse_each(), p, quadratic(p), -1, true);
  EXPECT_TRUE(r.events.empty());
  EXPECT_EQ(r.n_plus + r.n_minus, 0u);
  for (const auto& tp : r.trace) {
    EXPECT_EQ(tp.v_plus, 0.0);
    EXPECT_EQ(tp.v_minus, 0.0);
  }
}

TEST(BstdspNeuron, TeacherHyperpolarisesAndRelaxes) {
  BstdspParams p;
  p.v_reset_mv = -0.05;
  const auto r = simulate_bstdsp(empty_input(2, p), one_synapse_each(), p, quadratic(p), 1, true);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].kind, BstdspEvent::Kind::Teacher);
  EXPECT_EQ(r.events[0].neuron, 0);
  EXPECT_LT(r.v_at_syn[0], 0.0);
  EXPECT_GT(r.v_at_syn[0], p.v_reset_mv);
  EXPECT_EQ(r.v_at_syn[1], 0.0);
  double prev = -1.0;
  for (const auto& tp : r.trace) {
    if (tp.t_ms < 5.0) continue;
    EXPECT_GE(tp.v_plus, prev - 1e-15);
    EXPECT_LE(tp.v_plus, 0.0);
    prev = tp.v_plus;
  }
  EXPECT_EQ(r.n_plus, 0u);
}

TEST(BstdspNeuron, StrongCoincidentInputFiresAfterSyn) {
  BstdspParams p;
  p.gain = 10.0;
  Connectome c;
  c.d = 4;
  c.plus = Neuron(1, 4);
  c.plus.afferent = {0, 1, 2, 3};
  c.minus = Neuron(1, 4);
  c.minus.afferent = {0, 0, 0, 0};
  BinaryPattern x;
  x.bits = {0, 1, 1, 1};
  const auto sp = to_single_spikes(x, p.t_syn_ms, 0.0, p.psc.duration_ms, 0);
  const auto r = simulate_bstdsp(sp, c, p, quadratic(p));
  EXPECT_GE(r.n_plus, 1u);
  EXPECT_EQ(r.n_minus, 0u);
  double first = 1e9;
  for (const auto& e : r.events)
    if (e.kind == BstdspEvent::Kind::Post) first = std::min(first, e.t_ms);
  EXPECT_GT(first, p.t_syn_ms);
  EXPECT_LT(first, p.t_syn_ms + 10.0);
}

TEST(BstdspRule, CorrectPositiveTable) {
  // o = 1, y = 1: teacher at 1 ms, input at T_syn, (+) crosses V_st at T_syn + 2.
  BstdspParams p;
  p.gamma = 0.169;
  const Connectome c = one_synapse_each();
  SpikePattern sp = empty_input(2, p);
  sp.spikes[0] = {p.t_syn_ms};
  BstdspResult r;
  r.branch_peak[0] = {4.0};
  r.branch_peak[1] = {0.0};
  r.events = {{p.teacher_ms, 0, BstdspEvent::Kind::Teacher, 0},
              {p.t_syn_ms, -1, BstdspEvent::Kind::Pre, 0},
              {p.t_syn_ms + 2.0, 0, BstdspEvent::Kind::Crossing, 0}};
  const auto dc = accumulate_dc(r, sp, c, p);
  const double pot = 4.0 * std::exp(-(p.t_syn_ms - p.teacher_ms) / p.tau_post_ms);
  const double dep = p.gamma * 4.0 * std::exp(-2.0 / p.tau_pre_ms);
  EXPECT_NEAR(dc.plus[0], pot - dep, 1e-15);
  EXPECT_EQ(dc.minus[0], 0.0);
}

TEST(BstdspRule, MissedPositiveTable) {
  // o = 1, y = 0: (+) is taught but silent, (-) crosses.
  BstdspParams p;
  p.gamma = 0.2;
  Connectome c = one_synapse_each();
  c.minus.afferent = {0};
  SpikePattern sp = empty_input(2, p);
  sp.spikes[0] = {p.t_syn_ms};
  BstdspResult r;
  r.branch_peak[0] = {2.0};
  r.branch_peak[1] = {3.0};
  r.events = {{p.teacher_ms, 0, BstdspEvent::Kind::Teacher, 0},
              {p.t_syn_ms, -1, BstdspEvent::Kind::Pre, 0},
              {p.t_syn_ms + 3.0, 1, BstdspEvent::Kind::Crossing, 0}};
  const auto dc = accumulate_dc(r, sp, c, p);
  EXPECT_NEAR(dc.plus[0], 2.0 * std::exp(-99.0 / 50.0), 1e-15);
  EXPECT_NEAR(dc.minus[0], -0.2 * 3.0 * std::exp(-3.0 / 10.0), 1e-15);
}

TEST(BstdspRule, InactiveSlotIsUnchanged) {
  BstdspParams p;
  const Connectome c = one_synapse_each();
  const SpikePattern sp = empty_input(2, p);
  BstdspResult r;
  r.branch_peak[0] = {0.0};
  r.branch_peak[1] = {0.0};
  r.events = {{p.teacher_ms, 0, BstdspEvent::Kind::Teacher, 0}, {103.0, 0, BstdspEvent::Kind::Crossing, 0}};
  const auto dc = accumulate_dc(r, sp, c, p);
  EXPECT_EQ(dc.plus[0], 0.0);
  EXPECT_EQ(dc.minus[0], 0.0);
}

TEST(BstdspCalibration, GammaFromMeasuredRise) {
  const BstdspParams p;
  EXPECT_NEAR(gamma_from_rise(2.0, p), std::exp(-99.0 / 50.0) / std::exp(-0.2), 1e-15);
  EXPECT_NEAR(gamma_from_rise(2.0, p), 0.169, 5e-4);
  BstdspParams slow = p;
  slow.tau_post_ms = 1e15;
  slow.tau_pre_ms = 1e15;
  EXPECT_NEAR(gamma_from_rise(2.0, slow), 1.0, 1e-12);
}

TEST(BstdspCalibration, ZeroMarginKeepsThreshold) {
  const BstdspParams p;
  const auto mc = calibrate_margins(0.0, p, quadratic(p));
  EXPECT_EQ(mc.v_st, p.v_thr_mv);
  EXPECT_EQ(mc.v_reset, 0.0);
  EXPECT_EQ(mc.v_reset_prime, 0.0);
  EXPECT_GT(mc.eta, 0.0);
}

TEST(BstdspCalibration, MarginLevels) {
  const BstdspParams p;  // V_thr = 0.1 mV
  const auto br = quadratic(p);
  const double eta = calibrate_margins(0.0, p, br).eta;
  const auto mc = calibrate_margins(0.02 / eta, p, br);
  EXPECT_NEAR(mc.delta_spike, 0.02, 1e-15);
  EXPECT_NEAR(mc.v_st, 0.08, 1e-15);
  EXPECT_NEAR(mc.v_reset_prime, -0.04, 1e-12);
  EXPECT_LT(mc.v_reset, mc.v_reset_prime);
  // Equal margins: (+) needs V_thr - V_st, (-) needs V_st - V'_reset - V_thr.
  EXPECT_NEAR(p.v_thr_mv - mc.v_st, mc.v_st - mc.v_reset_prime - p.v_thr_mv, 1e-12);
  EXPECT_THROW(calibrate_margins(0.2 / eta, p, br), std::invalid_argument);
  EXPECT_THROW(calibrate_margins(-1.0, p, br), std::invalid_argument);
}

TEST(BstdspCalibration, GainSetsSpikingFraction) {
  const auto& f = task(0.0);
  std::size_t firing = 0;
  for (const auto& x : f.patterns) {
    const auto r = simulate_bstdsp(to_single_spikes(x, 100.0, 0.0, 200.0, 0), f.c, f.setup.params, f.setup.branch);
    firing += r.n_plus + r.n_minus > 0;
  }
  EXPECT_NEAR(double(firing) / double(f.patterns.size()), 0.65, 0.05);
  EXPECT_GT(f.setup.gamma.crossings, 0u);
  EXPECT_GT(f.setup.gamma.gamma, 0.0);
}

TEST(BstdspCalibration, LearnedPatternNearMeanRiseBalances) {
  const auto& f = task(0.5);
  const auto& prm = f.setup.params;
  double best_gap = 1e9;
  std::size_t chosen = f.patterns.size();
  for (std::size_t p = 0; p < f.patterns.size(); ++p) {
    const auto sp = to_single_spikes(f.patterns[p], 100.0, 0.0, 200.0, 0);
    const auto r = simulate_bstdsp(sp, f.c, prm, f.setup.branch, f.patterns[p].label);
    const int taught = f.patterns[p].label ? 0 : 1;
    if (r.crossings[taught] != 1 || r.crossings[1 - taught] != 0) continue;
    for (const auto& e : r.events)
      if (e.kind == BstdspEvent::Kind::Crossing) {
        const double gap = std::fabs(e.t_ms - prm.t_syn_ms - f.setup.gamma.mean_rise_ms);
        if (gap < best_gap) {
          best_gap = gap;
          chosen = p;
        }
      }
  }
  ASSERT_LT(chosen, f.patterns.size());
  ASSERT_LT(best_gap, 0.5);
  const auto sp = to_single_spikes(f.patterns[chosen], 100.0, 0.0, 200.0, 0);
  const auto r = simulate_bstdsp(sp, f.c, prm, f.setup.branch, f.patterns[chosen].label);
  const auto dc = accumulate_dc(r, sp, f.c, prm);
  const int taught = f.patterns[chosen].label ? 0 : 1;
  const Neuron& n = taught == 0 ? f.c.plus : f.c.minus;
  const auto& d = taught == 0 ? dc.plus : dc.minus;
  const double pot_factor = std::exp(-(prm.t_syn_ms - prm.teacher_ms) / prm.tau_post_ms);
  std::size_t checked = 0;
  for (std::size_t j = 0; j < n.m; ++j) {
    for (std::size_t i = 0; i < n.k; ++i) {
      if (!f.patterns[chosen].bits[n.at(j, i)]) continue;
      const double pot = r.branch_peak[taught][j] * pot_factor;
      if (pot <= 0) continue;
      EXPECT_LE(std::fabs(d[j * n.k + i]), 0.1 * pot);
      ++checked;
    }
  }
  EXPECT_GT(checked, 0u);
}

TEST(BstdspTraining, FastFitnessMatchesEventSimulation) {
  for (double frac : {0.0, 0.5}) {
    const auto& f = task(frac);
    const auto fast = bstdsp_fitness(f.patterns, f.c, f.setup.params, f.setup.branch);
    FitnessTable sum;
    sum.plus.assign(f.c.plus.synapses(), 0.0);
    sum.minus.assign(f.c.minus.synapses(), 0.0);
    for (const auto& x : f.patterns) {
      const auto sp = to_single_spikes(x, 100.0, 0.0, 200.0, 0);
      const auto dc = accumulate_dc(simulate_bstdsp(sp, f.c, f.setup.params, f.setup.branch, x.label), sp, f.c,
                                    f.setup.params);
      for (std::size_t s = 0; s < sum.plus.size(); ++s) {
        sum.plus[s] += dc.plus[s] / double(f.patterns.size());
        sum.minus[s] += dc.minus[s] / double(f.patterns.size());
      }
    }
    double scale = 0;
    for (double v : sum.plus) scale = std::max(scale, std::fabs(v));
    for (std::size_t s = 0; s < sum.plus.size(); ++s) {
      EXPECT_NEAR(fast.plus[s], sum.plus[s], 1e-9 * scale) << frac << " slot " << s;
      EXPECT_NEAR(fast.minus[s], sum.minus[s], 1e-9 * scale) << frac << " slot " << s;
    }
  }
}

TEST(BstdspTraining, InitialErrorMatchesEventSimulation) {
  const auto& f = task(0.5);
  LearnConfig cfg;
  cfg.n_min = 0;
  const auto tr = train_bstdsp(f.patterns, f.c, f.setup.params, f.setup.branch, cfg);
  ASSERT_EQ(tr.rows.size(), 1u);
  std::size_t wrong = 0;
  for (const auto& x : f.patterns) {
    const auto r = simulate_bstdsp(to_single_spikes(x, 100.0, 0.0, 200.0, 0), f.c, f.setup.params, f.setup.branch);
    wrong += wta(r.n_plus, r.n_minus) != x.label;
  }
  EXPECT_DOUBLE_EQ(tr.rows[0].mae, double(wrong) / double(f.patterns.size()));
  EXPECT_EQ(test_bstdsp(f.patterns, f.c, f.setup.params, f.setup.branch, 0.0, 1).error, tr.rows[0].mae);
}

TEST(BstdspTraining, ReducesErrorAndBestIsConsistent) {
  const auto& f = task(0.5);
  LearnConfig cfg;
  cfg.n_min = 15;
  const auto tr = train_bstdsp(f.patterns, f.c, f.setup.params, f.setup.branch, cfg);
  EXPECT_LT(tr.best_mae, tr.rows.front().mae);
  EXPECT_DOUBLE_EQ(test_bstdsp(f.patterns, tr.best, f.setup.params, f.setup.branch, 0.0, 1).error, tr.best_mae);
  const auto again = train_bstdsp(f.patterns, f.c, f.setup.params, f.setup.branch, cfg);
  EXPECT_EQ(again.best, tr.best);
}

TEST(BstdspTraining, ToyTaskReachesZeroError) {
  auto pat = [](std::vector<std::uint8_t> b, std::uint8_t l) {
    BinaryPattern p;
    p.bits = std::move(b);
    p.label = l;
    return p;
  };
  const std::vector<BinaryPattern> toy = {pat({1, 1, 0, 0, 0, 0}, 1), pat({0, 0, 1, 1, 0, 0}, 1),
                                          pat({0, 0, 0, 0, 1, 1}, 0), pat({1, 0, 0, 0, 1, 0}, 0)};
  const BstdspParams base;
  const auto br = quadratic(base);
  LearnConfig cfg;
  cfg.n_T = 2;
  cfg.n_R = 3;
  cfg.n_ch = 20;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Connectome init;
    init.d = 6;
    init.plus = Neuron(2, 2);
    init.minus = Neuron(2, 2);
    init.plus.afferent = {0, 2, 4, 1};
    init.minus.afferent = {3, 5, 0, 3};
    const BstdspSetup s = prepare_bstdsp(toy, init, base, br, 0.0);
    cfg.seed = seed;
    const auto tr = train_bstdsp(toy, init, s.params, br, cfg);
    EXPECT_GT(tr.rows.front().mae, 0.0);
    EXPECT_EQ(tr.best_mae, 0.0) << seed;
  }
}

TEST(BstdspTraining, RankAgreementBounds) {
  FitnessTable a{{1, 2, 3}, {3, 2, 1}}, b{{10, 20, 30}, {1, 2, 3}};
  EXPECT_EQ(rank_agreement(a, a), 1.0);
  EXPECT_DOUBLE_EQ(rank_agreement(a, b), 0.5);
  FitnessTable bad{{1}, {1}};
  EXPECT_THROW(rank_agreement(a, bad), std::invalid_argument);
}

TEST(BstdspParams, Validation) {
  BstdspParams p;
  EXPECT_NO_THROW(p.validate());
  p.v_st_mv = 0.2;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = BstdspParams{};
  p.v_reset_mv = 0.1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = BstdspParams{};
  p.tau_u_ms = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(BstdspEvents, CsvHeader) {
  const BstdspParams p;
  SpikePattern sp = empty_input(2, p);
  sp.spikes[0] = {100.0};
  std::ostringstream out;
  write_bstdsp_events_csv(out, simulate_bstdsp(sp, one_synapse_each(), p, quadratic(p), 1));
  EXPECT_EQ(out.str().substr(0, 26), "t_ms,neuron,event,afferent");
  EXPECT_NE(out.str().find("teacher"), std::string::npos);
  EXPECT_NE(out.str().find(",input,pre,0"), std::string::npos);
}
