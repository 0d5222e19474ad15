#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dendrite/kernels.hpp"
#include "dendrite/rng.hpp"
#include "dendrite/spike_engine.hpp"
#include "dendrite/structural.hpp"

using namespace dendrite;

namespace {

SpikePattern one_spike(std::size_t d, std::size_t line, double t) {
  SpikePattern sp;
  sp.duration = 200.0;
  sp.spikes.resize(d);
  sp.spikes[line] = {t};
  return sp;
}

struct Trained {
  std::vector<BinaryPattern> patterns;
  Connectome c;
  LearnConfig cfg;
};

const Trained& trained() {
  static const Trained t = [] {
    Trained r;
    TaskSpec ts;
    ts.patterns = 200;
    ts.seed = 13;
    r.patterns = generate_random_task(ts);
    Rng rng(14);
    r.cfg.n_min = 40;
    r.c = train(r.patterns, Connectome::random(10, 10, 400, rng), r.cfg).best;
    return r;
  }();
  return t;
}

}  // namespace

TEST(Kernel, ShapeAndNormalisation) {
  const LifParams lif;
  EXPECT_EQ(kernel(0.0, lif), 0.0);
  EXPECT_EQ(kernel(-1.0, lif), 0.0);
  EXPECT_LT(kernel(500.0, lif), 1e-20);
  const double t_star = std::log(8.0 / 2.0) * 8.0 * 2.0 / 6.0;
  EXPECT_NEAR(kernel_peak_time(lif), t_star, 1e-12);
  EXPECT_NEAR(t_star, 3.70, 0.01);
  EXPECT_NEAR(kernel(t_star, lif), 1.0, 0.01);
  EXPECT_NEAR(kernel_area(lif), 2.12 * 6.0, 1e-12);
}

TEST(LifParams, Validation) {
  LifParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.steps(), 2000u);
  EXPECT_EQ(p.tau_m_ms(), 50.0);
  p.tau_r_ms = 9.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = LifParams{};
  p.dt_ms = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(BranchCurrent, SilentWithoutSpikes) {
  const LifParams lif;
  const auto nl = spike_nonlinearity(NonlinearityConfig{}, ModelKind::Nonlinear, false, 1.0);
  SpikePattern sp;
  sp.duration = 200.0;
  sp.spikes.resize(3);
  const std::uint32_t br[] = {0, 1, 2};
  for (double t : {0.0, 5.0, 100.0}) EXPECT_EQ(branch_current(br, sp, t, lif, nl), 0.0);
}

TEST(BranchCurrent, QuadraticOfUnitKernel) {
  const LifParams lif;
  const auto nl = spike_nonlinearity(NonlinearityConfig{}, ModelKind::Nonlinear, false, 1.0);
  const auto sp = one_spike(2, 0, 10.0);
  const std::uint32_t single[] = {0};
  const std::uint32_t twice[] = {0, 0};
  double peak = 0;
  for (double t = 0; t < 60; t += 0.05) {
    const double one = branch_current(single, sp, t, lif, nl);
    const double k = kernel(t - 10.0, lif);
    EXPECT_NEAR(one, k * k / 2.0, 1e-12);
    EXPECT_NEAR(branch_current(twice, sp, t, lif, nl), 4.0 * one, 1e-12);
    peak = std::max(peak, one);
  }
  EXPECT_NEAR(peak, 0.5, 0.01);
}

TEST(SpikeNonlinearity, ScalesWithUnitCurrent) {
  NonlinearityConfig cfg;
  cfg.b_sat = 20.0;
  cfg.z_leak = 1.0;
  const double u = 3.0;
  const auto p = spike_nonlinearity(cfg, ModelKind::Nonlinear, true, u);
  for (double z : {0.0, 0.5, 1.5, 3.0, 7.0, 40.0})
    EXPECT_NEAR(kernels::apply_nl(u * z, p), u * b_leak(z, cfg), 1e-9) << z;
}

TEST(Lif, QuietWithoutInput) {
  Rng rng(1);
  const Connectome c = Connectome::random(2, 3, 5, rng);
  SpikePattern sp;
  sp.duration = 200.0;
  sp.spikes.resize(5);
  SpikeModel model;
  const SimResult r = simulate_pair(sp, c, model, true);
  EXPECT_EQ(r.n_plus, 0u);
  EXPECT_EQ(r.n_minus, 0u);
  for (const auto& tp : r.trace) {
    EXPECT_EQ(tp.v_plus, 0.0);
    EXPECT_EQ(tp.v_minus, 0.0);
  }
}

TEST(Lif, ConstantCurrentMatchesClosedForm) {
  const LifParams lif;
  const double decay = std::exp(-lif.dt_ms / lif.tau_m_ms());
  const double gain = lif.r_mohm * (1.0 - decay);
  for (double factor : {0.9, 2.0, 3.0}) {
    const double i_in = factor * lif.v_thr_mv / lif.r_mohm;
    double v = 0.0;
    std::uint32_t n = 0;
    for (std::size_t s = 0; s < lif.steps(); ++s) kernels::lif_step(&v, &i_in, &n, 1, decay, gain, lif.v_thr_mv);
    const double ir = i_in * lif.r_mohm;
    const double expected =
        ir > lif.v_thr_mv ? std::floor(lif.duration_ms / (lif.tau_m_ms() * std::log(ir / (ir - lif.v_thr_mv))))
                          : 0.0;
    EXPECT_LE(std::fabs(double(n) - expected), 1.0) << factor;
    if (factor < 1) EXPECT_EQ(n, 0u);
  }
  // 2 V_thr / R fires every RC ln 2.
  EXPECT_NEAR(lif.duration_ms / (lif.tau_m_ms() * std::log(2.0)), 5.77, 0.01);
}

TEST(Wta, CountsAndTie) {
  EXPECT_EQ(wta(5, 3), 1);
  EXPECT_EQ(wta(3, 5), 0);
  EXPECT_EQ(wta(0, 0), 0);
  EXPECT_EQ(wta(4, 4), 0);
}

TEST(Simulator, BatchEqualsSingle) {
  const auto& t = trained();
  SpikeModel model;
  model.branch = spike_nonlinearity(t.cfg.nl, t.cfg.kind, false, SpikeCoding{}.unit_current(model.lif));
  model.gain = 0.1;
  for (bool diff : {false, true}) {
    model.differential = diff;
    std::vector<SpikePattern> sp;
    for (std::size_t p = 0; p < 9; ++p) sp.push_back(to_rate_spikes(t.patterns[p], 250, 1, 200, p));
    const auto batch = simulate_batch(sp, t.c, model);
    for (std::size_t p = 0; p < sp.size(); ++p) {
      const auto one = simulate_pair(sp[p], t.c, model);
      EXPECT_EQ(batch[p].n_plus, one.n_plus);
      EXPECT_EQ(batch[p].n_minus, one.n_minus);
      EXPECT_EQ(batch[p].mean_branch_plus, one.mean_branch_plus);
    }
  }
}

TEST(Simulator, MeanBranchCurrentTracksReducedModel) {
  // Rate-coded mean PSC per active line is the unit current, so the mean
  // branch input is u z up to Poisson noise and the f_low lines.
  const auto& t = trained();
  SpikeModel model;
  const double u = SpikeCoding{}.unit_current(model.lif);
  model.branch = spike_nonlinearity(NonlinearityConfig{}, ModelKind::Linear, false, u);
  const auto sp = to_rate_spikes(t.patterns[0], 250, 0, 200, 1);
  const auto r = simulate_pair(sp, t.c, model);
  for (std::size_t j = 0; j < t.c.m(); ++j) {
    const double z = branch_activation(t.c.plus.branch(j), t.patterns[0]);
    EXPECT_NEAR(r.mean_branch_plus[j], u * z, 0.35 * u * z + 0.5) << j;
  }
}

TEST(SpikeTest, PositivePatternWinsMostNoiseDraws) {
  const auto& t = trained();
  std::size_t chosen = t.patterns.size();
  double best = 0;
  for (std::size_t p = 0; p < t.patterns.size(); ++p) {
    const double a = decision_value(t.patterns[p], t.c, t.cfg.nl, t.cfg.kind);
    if (t.patterns[p].label == 1 && a > best) {
      best = a;
      chosen = p;
    }
  }
  ASSERT_LT(chosen, t.patterns.size());
  SpikeModel model;
  model.branch = spike_nonlinearity(t.cfg.nl, t.cfg.kind, false, SpikeCoding{}.unit_current(model.lif));
  model.gain = calibrate_gain(t.patterns, t.c, t.cfg.nl, t.cfg.kind, false,
                              SpikeCoding{}.unit_current(model.lif), false, model.lif, 100.0);
  int wins = 0;
  for (std::uint64_t s = 0; s < 20; ++s)
    wins += classify_spikes(to_rate_spikes(t.patterns[chosen], 250, 1, 200, s), t.c, model);
  EXPECT_GT(wins, 10);
}

TEST(SpikeTest, SeededAndDeterministic) {
  const auto& t = trained();
  SpikeTestConfig st;
  st.seed = 5;
  const std::span<const BinaryPattern> some(t.patterns.data(), 40);
  const auto a = spike_test(some, t.c, t.cfg.nl, t.cfg.kind, false, st);
  const auto b = spike_test(some, t.c, t.cfg.nl, t.cfg.kind, false, st);
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_EQ(a.n_plus, b.n_plus);
  EXPECT_EQ(a.error, b.error);
  EXPECT_GT(a.gain, 0.0);
  std::size_t wrong = 0;
  for (std::size_t p = 0; p < some.size(); ++p) wrong += a.predictions[p] != some[p].label;
  EXPECT_DOUBLE_EQ(a.error, double(wrong) / double(some.size()));
}

TEST(SpikeTest, CalibrateGainHitsTargetRate) {
  const auto& t = trained();
  const LifParams lif;
  const double u = SpikeCoding{}.unit_current(lif);
  const double gain = calibrate_gain(t.patterns, t.c, t.cfg.nl, t.cfg.kind, false, u, false, lif, 100.0);
  double drive = 0;
  for (const auto& p : t.patterns) {
    drive += u * std::max(neuron_activation(t.c.plus, p, t.cfg.nl, t.cfg.kind),
                          neuron_activation(t.c.minus, p, t.cfg.nl, t.cfg.kind));
  }
  drive /= double(t.patterns.size());
  // Constant drive of gain * mean: ISI = tau ln(IR / (IR - V_thr)) = 10 ms.
  const double ir = gain * drive * lif.r_mohm;
  EXPECT_NEAR(lif.tau_m_ms() * std::log(ir / (ir - lif.v_thr_mv)), 10.0, 1e-6);
}

TEST(SpikeTest, PulseGainMakesSynchronousSpikesReproduceDecisions) {
  const auto& t = trained();
  SpikeTestConfig st;
  st.coding.kind = SpikeCoding::Kind::Single;
  st.differential = true;
  const auto r = spike_test(t.patterns, t.c, t.cfg.nl, t.cfg.kind, false, st);
  std::size_t agree = 0, counted = 0;
  for (std::size_t p = 0; p < t.patterns.size(); ++p) {
    const double a = decision_value(t.patterns[p], t.c, t.cfg.nl, t.cfg.kind);
    if (a == 0.0) continue;
    ++counted;
    agree += r.predictions[p] == g(a);
  }
  EXPECT_GE(double(agree), 0.95 * double(counted));

  SpikeModel model;
  model.differential = true;
  model.branch = spike_nonlinearity(t.cfg.nl, t.cfg.kind, false, st.coding.unit_current(model.lif));
  const double gain = calibrate_pulse_gain(t.patterns, t.c, t.cfg.nl, t.cfg.kind, false, model, 100.0, 1.05);
  EXPECT_DOUBLE_EQ(gain, r.gain);
  // The weakest favoured peak sits at 1.05 V_thr, so every favoured neuron fires.
  model.gain = gain;
  for (std::size_t p = 0; p < t.patterns.size(); ++p) {
    const double a = decision_value(t.patterns[p], t.c, t.cfg.nl, t.cfg.kind);
    if (a == 0.0) continue;
    const auto sim = simulate_pair(to_single_spikes(t.patterns[p], 100.0, 0.0, 200.0, 0), t.c, model);
    EXPECT_GE(a > 0 ? sim.n_plus : sim.n_minus, 1u) << p;
  }
}

TEST(Validity, ConstantCurrentIsExact) {
  const std::vector<double> flat(500, 3.0);
  const auto v = validity_from_current(flat, 2.0);
  EXPECT_EQ(v.predicted, v.actual);
  EXPECT_EQ(v.relative_deviation(), 0.0);
}

TEST(Validity, SingleKernelIsWorstCase) {
  const LifParams lif;
  std::vector<double> cur;
  for (std::size_t n = 0; n < lif.steps(); ++n) cur.push_back(kernel(double(n) * lif.dt_ms, lif));
  const auto v = validity_from_current(cur, 2.0);
  EXPECT_GT(v.actual, 10.0 * v.predicted);
}

TEST(Validity, DeviationShrinksWithRate) {
  const LifParams lif;
  const std::size_t syn[] = {10};
  const double f[] = {250.0, 2500.0};
  const double tau[] = {8.0};
  const auto pts = validity_check(syn, f, tau, lif, 2.0, 20, 3);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_NEAR(pts[0].f_tau, 2.0, 1e-12);
  EXPECT_NEAR(pts[1].f_tau, 20.0, 1e-12);
  EXPECT_GT(pts[0].relative_deviation(), pts[1].relative_deviation());
  EXPECT_GT(pts[1].relative_deviation(), 0.0);
}

TEST(VoltageTrace, CsvHeader) {
  Rng rng(1);
  const Connectome c = Connectome::random(1, 1, 1, rng);
  const auto r = simulate_pair(one_spike(1, 0, 5.0), c, SpikeModel{}, true);
  std::ostringstream out;
  write_voltage_trace_csv(out, r);
  EXPECT_EQ(out.str().substr(0, 26), "t_ms,v_plus_mV,v_minus_mV\n");
}
