#include <gtest/gtest.h>

#include <limits>
#include <sstream>

#include "dendrite/rng.hpp"
#include "dendrite/structural.hpp"

using namespace dendrite;

namespace {

BinaryPattern pattern(std::vector<std::uint8_t> bits, std::uint8_t label) {
  BinaryPattern p;
  p.bits = std::move(bits);
  p.label = label;
  return p;
}

std::vector<BinaryPattern> random_patterns(std::size_t P, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<BinaryPattern> out(P);
  for (std::size_t p = 0; p < P; ++p) {
    out[p].bits.resize(d);
    for (auto& b : out[p].bits) b = rng.uniform() < 0.4;
    out[p].label = static_cast<std::uint8_t>(rng.uniform() < 0.5);
  }
  out[0].label = 0;
  out[1].label = 1;
  return out;
}

// Fitness and replacement written out from the definitions, for small d.
Connectome brute_force_step(std::span<const BinaryPattern> pats, const Connectome& c,
                            const NonlinearityConfig& nl) {
  const std::size_t P = pats.size(), m = c.m(), k = c.k();
  std::vector<double> e(P);
  std::vector<std::vector<double>> bj[2];
  for (int n = 0; n < 2; ++n) bj[n].assign(m, std::vector<double>(P));
  for (std::size_t p = 0; p < P; ++p) {
    double a[2] = {0, 0};
    for (int n = 0; n < 2; ++n) {
      const Neuron& nr = n == 0 ? c.plus : c.minus;
      for (std::size_t j = 0; j < m; ++j) a[n] += bj[n][j][p] = b(branch_activation(nr.branch(j), pats[p]), nl);
    }
    e[p] = double(pats[p].label) - double(g(a[0] - a[1]));
  }
  auto fit = [&](int n, std::size_t j, std::uint32_t line) {
    double s = 0;
    for (std::size_t p = 0; p < P; ++p) s += pats[p].bits[line] * bj[n][j][p] * e[p];
    return (n == 0 ? s : -s) / double(P);
  };
  Connectome out = c;
  for (int n = 0; n < 2; ++n) {
    const Neuron& nr = n == 0 ? c.plus : c.minus;
    std::size_t worst = 0;
    for (std::size_t s = 1; s < m * k; ++s)
      if (fit(n, s / k, nr.afferent[s]) < fit(n, worst / k, nr.afferent[worst])) worst = s;
    std::uint32_t best = 0;
    for (std::uint32_t a = 1; a < c.d; ++a)
      if (fit(n, worst / k, a) > fit(n, worst / k, best)) best = a;
    (n == 0 ? out.plus : out.minus).afferent[worst] = best;
  }
  return out;
}

std::vector<BinaryPattern> toy_task() {
  return {pattern({1, 0, 0, 0}, 1), pattern({0, 1, 0, 0}, 1), pattern({0, 0, 1, 0}, 0),
          pattern({0, 0, 0, 1}, 0)};
}

}  // namespace

TEST(Mae, FractionMisclassified) {
  EXPECT_EQ(mae(std::vector<int>{1, 1, 0}, std::vector<int>{1, 1, 0}), 0.0);
  EXPECT_EQ(mae(std::vector<int>{1, 0}, std::vector<int>{0, 1}), 1.0);
  EXPECT_EQ(mae(std::vector<int>{1, 0, 0, 0}, std::vector<int>{1, 1, 0, 0}), 0.25);
  EXPECT_THROW(mae(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
  EXPECT_THROW(mae(std::vector<int>{1}, std::vector<int>{1, 0}), std::invalid_argument);
}

TEST(Fitness, MissedPositiveRewardsPlusAndPenalisesMinus) {
  // Both neurons hold branch [0, 0]: alpha = 0, y = 0 while o = 1.
  Connectome c;
  c.d = 2;
  c.plus = Neuron(1, 2);
  c.plus.afferent = {0, 1};
  c.minus = c.plus;
  NonlinearityConfig nl;
  nl.x_thr = 1.0;
  LearnConfig cfg;
  cfg.nl = nl;
  c.plus.afferent = {0, 0};
  c.minus.afferent = {0, 0};
  const std::vector<BinaryPattern> one = {pattern({1, 0}, 1)};
  const FitnessTable f = fitness_epoch(one, c, cfg, 0.0);
  EXPECT_EQ(f.plus, (std::vector<double>{4.0, 4.0}));
  EXPECT_EQ(f.minus, (std::vector<double>{-4.0, -4.0}));

  // Inactive slot contributes nothing.
  c.plus.afferent = {0, 1};
  const FitnessTable g2 = fitness_epoch(one, c, cfg, 0.0);
  EXPECT_EQ(g2.plus[1], 0.0);
}

TEST(Fitness, CorrectPatternContributesNothing) {
  Connectome c;
  c.d = 2;
  c.plus = Neuron(1, 2);
  c.plus.afferent = {0, 0};
  c.minus = Neuron(1, 2);
  c.minus.afferent = {1, 1};
  const std::vector<BinaryPattern> one = {pattern({1, 0}, 1)};
  const FitnessTable f = fitness_epoch(one, c, LearnConfig{}, 0.0);
  for (double v : f.plus) EXPECT_EQ(v, 0.0);
  for (double v : f.minus) EXPECT_EQ(v, 0.0);
}

TEST(Fitness, AntisymmetricForMirroredNeurons) {
  const auto pats = random_patterns(60, 12, 4);
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    Connectome c = Connectome::random(3, 4, 12, rng);
    c.minus = c.plus;
    const FitnessTable f = fitness_epoch(pats, c, LearnConfig{}, 0.0);
    for (std::size_t i = 0; i < f.plus.size(); ++i) EXPECT_EQ(f.minus[i], -f.plus[i]);
  }
}

TEST(Replacement, WorstSlotFromHandBuiltTable) {
  const std::vector<double> fit = {0.3, -0.2, -0.2, 0.1};
  Rng rng(1);
  EXPECT_EQ(select_worst_slot(fit, 4, rng), 1u);
  EXPECT_EQ(select_worst_slot(fit, 10, rng), 1u);
  for (int i = 0; i < 20; ++i) EXPECT_LT(select_worst_slot(fit, 2, rng), 4u);
}

TEST(Replacement, ExhaustiveSetsMatchBruteForce) {
  for (std::uint64_t s = 0; s < 60; ++s) {
    const std::size_t d = 3 + s % 4, m = 1 + s % 3, k = 1 + (s / 3) % 3;
    const auto pats = random_patterns(14, d, 100 + s);
    Rng rng(200 + s);
    const Connectome c = Connectome::random(m, k, d, rng);
    LearnConfig cfg;
    cfg.n_T = m * k;
    cfg.n_R = d;
    EXPECT_EQ(replacement_step(pats, c, cfg, 0.0, rng), brute_force_step(pats, c, cfg.nl)) << s;
  }
}

TEST(Replacement, IncumbentLineMayWin) {
  const auto pats = random_patterns(10, 1, 3);
  Rng rng(1);
  const Connectome c = Connectome::random(2, 2, 1, rng);
  LearnConfig cfg;
  cfg.n_T = 4;
  cfg.n_R = 1;
  EXPECT_EQ(replacement_step(pats, c, cfg, 0.0, rng), c);
}

TEST(Training, StateObjectiveMatchesEvaluatedProposal) {
  const auto pats = random_patterns(40, 10, 9);
  const PatternMatrix x(pats);
  Rng rng(2);
  for (bool margin : {false, true}) {
    LearnConfig cfg;
    cfg.use_margin = margin;
    cfg.delta0 = 3.0;
    TrainingState st(x, Connectome::random(2, 3, 10, rng), cfg);
    for (int i = 0; i < 50; ++i) {
      Proposal p;
      p.plus = {rng.below(6), st.connectome().plus.afferent[0], 0};
      p.plus.from = st.connectome().plus.afferent[p.plus.slot];
      p.plus.to = static_cast<std::uint32_t>(rng.below(10));
      p.minus.slot = rng.below(6);
      p.minus.from = st.connectome().minus.afferent[p.minus.slot];
      p.minus.to = static_cast<std::uint32_t>(rng.below(10));
      const double predicted = st.evaluate(p);
      st.apply(p);
      EXPECT_EQ(st.objective(), predicted);
      TrainingState fresh(x, st.connectome(), cfg);
      EXPECT_EQ(fresh.objective(), st.objective());
      EXPECT_EQ(fresh.hard_errors(), st.hard_errors());
    }
  }
}

TEST(Training, ToyTaskHasZeroErrorWiringAndTrainingFindsIt) {
  const auto pats = toy_task();
  const NonlinearityConfig nl;
  // Exhaustive check that an error-free connectome exists.
  bool exists = false;
  for (std::uint32_t wp = 0; wp < 256 && !exists; ++wp) {
    for (std::uint32_t wm = 0; wm < 256 && !exists; ++wm) {
      Connectome c;
      c.d = 4;
      c.plus = Neuron(2, 2);
      c.minus = Neuron(2, 2);
      for (int i = 0; i < 4; ++i) {
        c.plus.afferent[i] = (wp >> (2 * i)) & 3;
        c.minus.afferent[i] = (wm >> (2 * i)) & 3;
      }
      bool ok = true;
      for (const auto& p : pats) ok = ok && classify(p, c, nl, ModelKind::Nonlinear) == p.label;
      exists = ok;
    }
  }
  ASSERT_TRUE(exists);
  // With n_T and n_R below the table sizes the sampled T and R let the search escape.
  LearnConfig cfg;
  cfg.n_T = 2;
  cfg.n_R = 2;
  cfg.n_ch = 20;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.seed = seed;
    Rng rng(seed);
    const TrainTrace t = train(pats, Connectome::random(2, 2, 4, rng), cfg);
    EXPECT_EQ(t.best_mae, 0.0) << seed;
    EXPECT_TRUE(t.converged);
    for (const auto& p : pats) EXPECT_EQ(classify(p, t.best, nl, ModelKind::Nonlinear), p.label);
  }
}

TEST(Training, NoMinimaBudgetReturnsInitialEvaluation) {
  const auto pats = random_patterns(30, 8, 2);
  Rng rng(4);
  const Connectome init = Connectome::random(2, 2, 8, rng);
  LearnConfig cfg;
  cfg.n_min = 0;
  cfg.n_T = 4;
  cfg.n_R = 8;
  const TrainTrace t = train(pats, init, cfg);
  EXPECT_EQ(t.best, init);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].kind, TraceRow::Kind::Initial);
  EXPECT_EQ(t.proposals, 0u);
}

TEST(Training, DeterministicConservingAndMonotone) {
  TaskSpec ts;
  ts.patterns = 200;
  ts.seed = 4;
  const auto pats = generate_random_task(ts);
  Rng rng(6);
  const Connectome init = Connectome::random(10, 5, 400, rng);
  LearnConfig cfg;
  cfg.n_min = 15;
  const TrainTrace a = train(pats, init, cfg), b = train(pats, init, cfg);
  EXPECT_EQ(a.best, b.best);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].mae, b.rows[i].mae);
  EXPECT_EQ(a.best.plus.synapses(), 50u);
  EXPECT_EQ(a.best.minus.synapses(), 50u);
  EXPECT_NO_THROW(a.best.validate());
  EXPECT_EQ(a.minima.size(), 15u);
  for (std::size_t i = 1; i < a.rows.size(); ++i) {
    if (a.rows[i].kind == TraceRow::Kind::Accepted) EXPECT_LE(a.rows[i].mae, a.rows[i - 1].mae);
  }
  double best = 1.0;
  for (const auto& r : a.rows) best = std::min(best, r.mae);
  EXPECT_EQ(a.best_mae, best);
  std::vector<int> pred, target;
  for (const auto& p : pats) {
    pred.push_back(classify(p, a.best, cfg.nl, cfg.kind));
    target.push_back(p.label);
  }
  EXPECT_EQ(mae(pred, target), a.best_mae);
}

TEST(Training, MarginScheduleDecaysDelta) {
  TaskSpec ts;
  ts.patterns = 200;
  const auto pats = generate_random_task(ts);
  Rng rng(7);
  LearnConfig cfg;
  cfg.use_margin = true;
  cfg.use_leak = true;
  cfg.nl.z_leak = 0.5;
  cfg.n_min = 30;
  const TrainTrace t = train(pats, Connectome::random(10, 5, 400, rng), cfg);
  ASSERT_FALSE(t.delta_history.empty());
  EXPECT_EQ(t.delta_history.front(), 25.0);
  for (std::size_t i = 1; i < t.delta_history.size(); ++i)
    EXPECT_DOUBLE_EQ(t.delta_history[i], 0.8 * t.delta_history[i - 1]);
}

TEST(Training, NonlinearBeatsLinearOnGaussianTask) {
  TaskSpec ts;
  ts.patterns = 1000;
  ts.seed = 21;
  const auto pats = generate_random_task(ts);
  Rng rng(22);
  LearnConfig nl_cfg;
  const TrainTrace nl = train(pats, Connectome::random(20, 25, 400, rng), nl_cfg);
  LearnConfig l_cfg;
  l_cfg.kind = ModelKind::Linear;
  const TrainTrace l = train(pats, Connectome::random(1, 500, 400, rng), l_cfg);
  EXPECT_LT(nl.best_mae, l.best_mae);
}

TEST(Training, RejectsBadConfig) {
  const auto pats = random_patterns(10, 4, 1);
  Rng rng(1);
  const Connectome c = Connectome::random(2, 2, 4, rng);
  LearnConfig cfg;
  cfg.n_T = 0;
  EXPECT_THROW(train(pats, c, cfg), std::invalid_argument);
  EXPECT_THROW(train(std::vector<BinaryPattern>{}, c, LearnConfig{}), std::invalid_argument);
}

TEST(Trace, CsvHeader) {
  const auto pats = toy_task();
  Rng rng(3);
  LearnConfig cfg;
  cfg.n_T = 4;
  cfg.n_R = 4;
  cfg.n_min = 2;
  std::ostringstream out;
  write_trace_csv(out, train(pats, Connectome::random(2, 2, 4, rng), cfg));
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "proposal,event,mae,soft_error,delta,local_minima");
}
