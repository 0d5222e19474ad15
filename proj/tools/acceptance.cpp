// acceptance: one PASS/FAIL line per acceptance criterion.
//
//   acceptance            all criteria
//   acceptance 1 4 12     selected criteria
//
// Exit status is 0 when every selected criterion passes, 1 otherwise.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dendrite/analysis.hpp"
#include "dendrite/bstdsp.hpp"
#include "dendrite/capacity.hpp"
#include "dendrite/datasets.hpp"
#include "dendrite/experiments.hpp"
#include "dendrite/rng.hpp"
#include "dendrite/spike_engine.hpp"
#include "dendrite/structural.hpp"

using namespace dendrite;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Opts {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string num(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

template <class F>
std::vector<double> per_trial(std::size_t trials, std::size_t threads, F&& fn) {
  std::vector<double> out(trials);
  parallel_for(trials, threads, [&](std::size_t t) { out[t] = fn(t); });
  return out;
}

const std::vector<std::size_t> kMs = {10, 20, 50};
const std::vector<std::size_t> kKs = {5, 10, 15, 25, 50};

// ---- 1 ----------------------------------------------------------------------

Verdict capacity_maximum(const Opts&) {
  const std::vector<std::size_t> ms = {2, 4, 5, 10, 20, 25, 40, 50, 100, 200};
  std::size_t best_m = 0;
  BigInt best = 0;
  std::ostringstream lns;
  for (std::size_t m : ms) {
    const CapacityValue v = nonlinear_capacity(400, m, 200 / m, kExactBits);
    if (!v.exact) return {false, "exact value unavailable at m=" + std::to_string(m)};
    if (*v.exact > best) {
      best = *v.exact;
      best_m = m;
    }
    lns << " m" << m << '=' << num(v.ln, 6);
  }
  return {best_m == 50, "argmax m=" + std::to_string(best_m) + " (expected 50); ln C:" + lns.str()};
}

// ---- 2, 3 -------------------------------------------------------------------

double rm_mae(std::size_t P, std::size_t m, std::size_t k, ModelKind kind, std::uint64_t seed,
              std::size_t trial) {
  const auto pats = task_patterns(P, seed, trial);
  const Connectome init = initial_connectome(m, k, pats.front().size(), seed, trial);
  return train_reduced(pats, init, learn_config(Trainer::RM, kind, k, seed, trial)).train_mae;
}

Verdict linear_vs_nonlinear(const Opts& o) {
  const auto nl = per_trial(5, o.threads, [&](std::size_t t) {
    return rm_mae(1000, 20, 10, ModelKind::Nonlinear, o.seed, t);
  });
  const auto l = per_trial(5, o.threads, [&](std::size_t t) {
    return rm_mae(1000, 1, 200, ModelKind::Linear, o.seed, t);
  });
  bool every = true;
  for (std::size_t t = 0; t < 5; ++t) every = every && nl[t] < l[t];
  const double mn = 100.0 * mean(nl), ml = 100.0 * mean(l);
  const bool pass = every && std::fabs(mn - 9.0) <= 3.0 && std::fabs(ml - 19.0) <= 3.0;
  return {pass, "NL " + num(mn) + "% (9+-3), L " + num(ml) + "% (19+-3), NL<L in every trial: " +
                    (every ? "yes" : "no")};
}

Verdict k_scaling(const Opts& o) {
  std::map<std::size_t, double> m_mae;
  for (std::size_t m : kMs) {
    m_mae[m] = mean(per_trial(5, o.threads, [&](std::size_t t) {
      return rm_mae(1000, m, 25, ModelKind::Nonlinear, o.seed, t);
    }));
  }
  const double r20 = m_mae[10] / m_mae[20], r50 = m_mae[10] / m_mae[50];
  const bool pass = r20 >= 1.4 && r20 <= 2.8 && r50 >= 4.0 && r50 <= 9.0;
  return {pass, "MAE m10 " + num(100 * m_mae[10]) + "%, m20 " + num(100 * m_mae[20]) + "%, m50 " +
                    num(100 * m_mae[50]) + "%; m10/m20 " + num(r20) + " in [1.4,2.8], m10/m50 " +
                    num(r50) + " in [4,9]"};
}

// ---- 4, 5 -------------------------------------------------------------------

struct GridCell {
  std::size_t m, k;
  double rm_train = 0, rm_spike = 0, rmwm_train = 0, rmwm_spike = 0;
};

std::vector<GridCell> noise_grid(const Opts& o, bool with_rmwm) {
  std::vector<GridCell> cells;
  for (std::size_t m : kMs)
    for (std::size_t k : kKs) cells.push_back({m, k});
  const std::size_t trials = 5;
  const std::size_t variants = with_rmwm ? 2 : 1;
  std::vector<std::pair<double, double>> res(cells.size() * trials * variants);
  parallel_for(res.size(), o.threads, [&](std::size_t i) {
    const std::size_t v = i % variants, t = (i / variants) % trials, c = i / (variants * trials);
    const auto pats = task_patterns(1000, o.seed, t);
    const Connectome init = initial_connectome(cells[c].m, cells[c].k, pats.front().size(), o.seed, t);
    const Trainer tr = v == 0 ? Trainer::RM : Trainer::RMWM;
    const ReducedRun run =
        train_reduced(pats, init, learn_config(tr, ModelKind::Nonlinear, cells[c].k, o.seed, t));
    res[i] = {run.train_mae, spike_test_run(pats, run, v == 1, -1.0, o.seed, t).error};
  });
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t v = 0; v < variants; ++v) {
      double tr = 0, sp = 0;
      for (std::size_t t = 0; t < trials; ++t) {
        tr += res[(c * trials + t) * variants + v].first / trials;
        sp += res[(c * trials + t) * variants + v].second / trials;
      }
      (v == 0 ? cells[c].rm_train : cells[c].rmwm_train) = tr;
      (v == 0 ? cells[c].rm_spike : cells[c].rmwm_spike) = sp;
    }
  }
  return cells;
}

std::string cell_name(const GridCell& c) {
  return "m" + std::to_string(c.m) + "k" + std::to_string(c.k);
}

Verdict rm_noise_degradation(const Opts& o) {
  const auto cells = noise_grid(o, false);
  std::size_t in_band = 0, in_target = 0;
  std::ostringstream s;
  for (const auto& c : cells) {
    const double r = c.rm_train > 0 ? c.rm_spike / c.rm_train : std::numeric_limits<double>::infinity();
    in_band += r >= 1.5 && r <= 8.0;
    in_target += r >= 2.0 && r <= 5.0;
    s << ' ' << cell_name(c) << '=' << num(r, 3);
  }
  const bool pass = in_band == cells.size() && 2 * in_target >= cells.size();
  return {pass, std::to_string(in_band) + "/" + std::to_string(cells.size()) + " in [1.5,8], " +
                    std::to_string(in_target) + " in [2,5] (need half); spike/train:" + s.str()};
}

Verdict rmwm_improvement(const Opts& o) {
  const auto cells = noise_grid(o, true);
  std::size_t good = 0;
  double best = 0;
  std::ostringstream s;
  for (const auto& c : cells) {
    const double f = c.rmwm_spike > 0 ? c.rm_spike / c.rmwm_spike : std::numeric_limits<double>::infinity();
    good += f >= 1.5;
    best = std::max(best, f);
    s << ' ' << cell_name(c) << '=' << num(f, 3);
  }
  const bool pass = 5 * good >= 4 * cells.size() && best >= 5.0;
  return {pass, std::to_string(good) + "/" + std::to_string(cells.size()) +
                    " cells with factor >= 1.5 (need 80%), best " + num(best, 3) +
                    " (need >= 5); RM/RMWM spike error:" + s.str()};
}

// ---- 6 ----------------------------------------------------------------------

Verdict single_spike_generalization(const Opts& o) {
  const double tau_f = LifParams{}.tau_f_ms;
  const std::vector<double> jitters = {0.5 * tau_f, tau_f, 2 * tau_f, 3 * tau_f};
  const std::size_t trials = 5;
  std::vector<std::vector<double>> res(kKs.size() * trials);
  parallel_for(res.size(), o.threads, [&](std::size_t i) {
    const std::size_t k = kKs[i / trials], t = i % trials;
    const auto pats = task_patterns(1000, o.seed, t);
    const Connectome init = initial_connectome(20, k, pats.front().size(), o.seed, t);
    const ReducedRun run =
        train_reduced(pats, init, learn_config(Trainer::RMWM, ModelKind::Nonlinear, k, o.seed, t));
    res[i].push_back(run.train_mae);
    for (double j : jitters) res[i].push_back(spike_test_run(pats, run, true, j, o.seed, t).error);
  });
  bool pass = true;
  std::ostringstream s;
  for (std::size_t q = 0; q < kKs.size(); ++q) {
    std::vector<double> m(jitters.size() + 1, 0.0);
    for (std::size_t t = 0; t < trials; ++t)
      for (std::size_t c = 0; c < m.size(); ++c) m[c] += res[q * trials + t][c] / trials;
    bool rising = true;
    for (std::size_t c = 2; c < m.size(); ++c) rising = rising && m[c] > m[c - 1];
    bool bounded = true;
    for (std::size_t c = 1; c <= jitters.size(); ++c)
      if (jitters[c - 1] <= tau_f) bounded = bounded && m[c] <= 4.0 * m[0];
    pass = pass && rising && bounded;
    s << " k" << kKs[q] << ": train " << num(100 * m[0], 3) << "% test";
    for (std::size_t c = 1; c < m.size(); ++c) s << ' ' << num(100 * m[c], 3);
    s << "%" << (rising ? "" : " [not increasing]") << (bounded ? "" : " [> 4x train]") << ';';
  }
  return {pass, "m=20, jitter 4/8/16/24 ms:" + s.str()};
}

// ---- 7, 8 -------------------------------------------------------------------

Verdict bstdsp_margin_effect(const Opts& o) {
  const std::vector<std::size_t> ks = {15, 25, 50};
  const std::size_t trials = 3;
  std::vector<double> err(ks.size() * trials * 2);
  parallel_for(err.size(), o.threads, [&](std::size_t i) {
    const bool margin = i % 2;
    const std::size_t t = (i / 2) % trials, k = ks[i / (2 * trials)];
    err[i] = bstdsp_run(500, 20, k, margin ? 0.5 : 0.0, 8.0, o.seed, t).test_error;
  });
  bool each = true;
  double best = std::numeric_limits<double>::infinity();
  std::ostringstream s;
  for (std::size_t q = 0; q < ks.size(); ++q) {
    double with = 0, without = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      without += err[(q * trials + t) * 2] / trials;
      with += err[(q * trials + t) * 2 + 1] / trials;
    }
    const double r = without > 0 ? with / without : std::numeric_limits<double>::infinity();
    each = each && r <= 0.5;
    best = std::min(best, r);
    s << " k" << ks[q] << ": " << num(100 * with, 3) << "% vs " << num(100 * without, 3) << "% (ratio "
      << num(r, 3) << ')';
  }
  const bool pass = each && best <= 0.25;
  return {pass, "margin/no-margin test error, ratio <= 0.5 each and best <= 0.25;" + s.str()};
}

Verdict rank_agreement_check(const Opts& o) {
  const std::vector<std::size_t> ks = {5, 10, 25};
  std::vector<double> agree(ks.size());
  parallel_for(ks.size(), o.threads, [&](std::size_t q) {
    const auto pats = task_patterns(500, o.seed, 0);
    const Connectome c = initial_connectome(20, ks[q], pats.front().size(), o.seed, 0);
    const BstdspParams base;
    const auto branch = bstdsp_nonlinearity(NonlinearityConfig{}, ModelKind::Nonlinear, base);
    const BstdspSetup probe = prepare_bstdsp(pats, c, base, branch, 0.0);
    const BstdspSetup setup = prepare_bstdsp(pats, c, base, branch, 0.5 * base.v_thr_mv / probe.margin.eta);
    const FitnessTable rm = fitness_epoch(pats, c, LearnConfig{}, 0.0);
    agree[q] = rank_agreement(rm, bstdsp_fitness(pats, c, setup.params, branch));
  });
  bool pass = true;
  std::ostringstream s;
  for (std::size_t q = 0; q < ks.size(); ++q) {
    pass = pass && agree[q] >= 0.9;
    s << " k" << ks[q] << '=' << num(agree[q], 3);
  }
  return {pass, "slot-pair order agreement >= 0.90:" + s.str()};
}

// ---- 9 ----------------------------------------------------------------------

Verdict uci_benchmarks(const Opts& o) {
  struct Target { std::string name; double binary, spike; };
  const std::vector<Target> targets = {{"BC", 96.01, 95.93}, {"HEART", 75.3, 74.53}, {"ION", 89.22, 88.96}};
  const std::size_t trials = 5;
  bool pass = true;
  std::ostringstream s;
  for (const auto& tg : targets) {
    const DatasetSpec spec = *find_dataset(tg.name);
    std::vector<std::pair<double, double>> acc(trials);
    parallel_for(trials, o.threads, [&](std::size_t t) {
      const BenchmarkRun r = benchmark_run(spec, default_data_dir(), o.seed, t);
      acc[t] = {100 * r.binary_accuracy, 100 * r.spike_accuracy};
    });
    double bin = 0, spk = 0;
    for (const auto& [b, sp] : acc) {
      bin += b / trials;
      spk += sp / trials;
    }
    const bool ok = std::fabs(bin - tg.binary) <= 2.5 && std::fabs(spk - tg.spike) <= 2.5 &&
                    bin - spk >= 0.0 && bin - spk <= 1.0;
    pass = pass && ok;
    s << ' ' << tg.name << " binary " << num(bin) << " (" << tg.binary << ") spike " << num(spk) << " ("
      << tg.spike << ")" << (ok ? "" : " [out]") << ';';
  }
  return {pass, "test accuracy %, +-2.5 and spike in [binary-1, binary]:" + s.str()};
}

// ---- 10, 11 -----------------------------------------------------------------

Verdict kernel_normalization(const Opts&) {
  const LifParams lif;
  NonlinearityConfig lin;
  const auto nl = spike_nonlinearity(lin, ModelKind::Linear, false, 1.0);
  SpikePattern sp;
  sp.duration = lif.duration_ms;
  sp.spikes = {{0.0}};
  const std::uint32_t branch[] = {0};
  double peak = 0, t_peak = 0;
  for (std::size_t n = 0; n <= lif.steps(); ++n) {
    const double t = static_cast<double>(n) * lif.dt_ms;
    const double v = branch_current(branch, sp, t, lif, nl);
    if (v > peak) {
      peak = v;
      t_peak = t;
    }
  }
  const bool pass = std::fabs(peak - 1.0) <= 0.01 && std::fabs(t_peak - 3.70) <= lif.dt_ms / 2;
  return {pass, "peak " + num(peak, 5) + " nA at " + num(t_peak, 4) + " ms (1.00+-0.01 at 3.70 ms, closed form " +
                    num(kernel_peak_time(lif), 5) + " ms)"};
}

Verdict validity_trend(const Opts& o) {
  const LifParams lif;
  const std::vector<double> f_tau = {0.5, 2, 8, 20};
  std::vector<double> f_hz;
  for (double x : f_tau) f_hz.push_back(x / lif.tau_f_ms * 1000.0);
  const std::size_t syn[] = {10};
  const double taus[] = {lif.tau_f_ms};
  const auto pts = validity_check(syn, f_hz, taus, lif, 2.0, 20, o.seed);
  bool pass = pts.size() == f_tau.size();
  std::ostringstream s;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double dev = std::fabs(pts[i].relative_deviation());
    if (i > 0) pass = pass && dev < std::fabs(pts[i - 1].relative_deviation());
    s << " f_tau " << num(pts[i].f_tau, 3) << ": " << num(dev, 4);
  }
  return {pass, "|relative deviation| strictly decreasing:" + s.str()};
}

// ---- 12 ---------------------------------------------------------------------

std::vector<BinaryPattern> small_task(std::size_t P, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<BinaryPattern> out(P);
  for (std::size_t p = 0; p < P; ++p) {
    out[p].bits.resize(d);
    for (auto& b : out[p].bits) b = rng.uniform() < 0.4;
    out[p].label = static_cast<std::uint8_t>(p % 2);
  }
  return out;
}

// Worst slot by direct evaluation of c_ij, then the best line by the same rule.
Connectome oracle_step(std::span<const BinaryPattern> pats, const Connectome& c, const NonlinearityConfig& nl) {
  const std::size_t P = pats.size(), m = c.m(), k = c.k(), d = c.d;
  std::vector<double> sgn(P);
  std::vector<std::vector<double>> bj[2];
  for (int n = 0; n < 2; ++n) bj[n].assign(m, std::vector<double>(P));
  for (std::size_t p = 0; p < P; ++p) {
    double a[2] = {0, 0};
    for (int n = 0; n < 2; ++n) {
      const Neuron& nr = n == 0 ? c.plus : c.minus;
      for (std::size_t j = 0; j < m; ++j) {
        bj[n][j][p] = b(branch_activation(nr.branch(j), pats[p]), nl);
        a[n] += bj[n][j][p];
      }
    }
    const double e = double(pats[p].label) - (a[0] - a[1] > 0 ? 1.0 : 0.0);
    sgn[p] = e > 0 ? 1.0 : (e < 0 ? -1.0 : 0.0);
  }
  auto fit = [&](int n, std::size_t j, std::uint32_t aff) {
    double s = 0;
    for (std::size_t p = 0; p < P; ++p) s += pats[p].bits[aff] * bj[n][j][p] * sgn[p];
    return (n == 0 ? 1.0 : -1.0) * s / double(P);
  };
  Connectome out = c;
  for (int n = 0; n < 2; ++n) {
    const Neuron& nr = n == 0 ? c.plus : c.minus;
    std::size_t worst = 0;
    double wf = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < m * k; ++s) {
      const double f = fit(n, s / k, nr.afferent[s]);
      if (f < wf) {
        wf = f;
        worst = s;
      }
    }
    std::uint32_t best = 0;
    double bf = -std::numeric_limits<double>::infinity();
    for (std::uint32_t a = 0; a < d; ++a) {
      const double f = fit(n, worst / k, a);
      if (f > bf) {
        bf = f;
        best = a;
      }
    }
    (n == 0 ? out.plus : out.minus).afferent[worst] = best;
  }
  return out;
}

Verdict property_suite(const Opts& o) {
  std::vector<std::string> failed;
  auto check = [&](bool ok, const std::string& name) {
    if (!ok) failed.push_back(name);
  };

  const auto pats = task_patterns(200, o.seed, 0);
  const Connectome init = initial_connectome(10, 5, pats.front().size(), o.seed, 0);
  LearnConfig cfg = learn_config(Trainer::RMWM, ModelKind::Nonlinear, 5, o.seed, 0);
  cfg.n_min = 20;
  const TrainTrace a = train(pats, init, cfg), b = train(pats, init, cfg);
  bool same = a.best == b.best && a.rows.size() == b.rows.size() && a.best_mae == b.best_mae &&
              task_patterns(200, o.seed, 0)[7].bits == pats[7].bits;
  for (std::size_t i = 0; same && i < a.rows.size(); ++i)
    same = a.rows[i].proposal == b.rows[i].proposal && a.rows[i].mae == b.rows[i].mae;
  check(same, "determinism");

  bool conserved = a.best.plus.synapses() == 50 && a.best.minus.synapses() == 50 &&
                   a.best.plus.afferent.size() == 50 && a.best.minus.afferent.size() == 50;
  try {
    a.best.validate();
  } catch (const std::exception&) {
    conserved = false;
  }
  check(conserved, "s=m*k conservation");

  Connectome mirror = init;
  mirror.minus = mirror.plus;
  const FitnessTable ft = fitness_epoch(pats, mirror, LearnConfig{}, 0.0);
  bool anti = true;
  for (std::size_t i = 0; i < ft.plus.size(); ++i) anti = anti && ft.minus[i] == -ft.plus[i];
  check(anti, "fitness antisymmetry");

  bool gm = true;
  for (double delta : {0.5, 3.0, 25.0})
    for (double al = -100; al <= 100; al += 0.25)
      if (std::fabs(al) > delta) gm = gm && g_margin(al, delta) == g(al);
  check(gm, "g_margin/g agreement");

  bool oracle = true;
  for (std::uint64_t s = 0; s < 40; ++s) {
    const std::size_t d = 3 + s % 4, m = 1 + s % 3, k = 1 + (s / 3) % 3;
    const auto tp = small_task(12, d, derive_seed(o.seed, 0x6f72, s));
    Rng rng(derive_seed(o.seed, 0x6f73, s));
    const Connectome c = Connectome::random(m, k, d, rng);
    LearnConfig lc;
    lc.n_T = m * k;
    lc.n_R = d;
    oracle = oracle && replacement_step(tp, c, lc, 0.0, rng) == oracle_step(tp, c, lc.nl);
  }
  check(oracle, "replacement_step oracle (d<=6)");

  bool monotone = true;
  {
    double last = std::numeric_limits<double>::infinity(), last_delta = -1;
    for (const auto& r : a.rows) {
      if (r.kind == TraceRow::Kind::Accepted && r.delta == last_delta) monotone = monotone && r.soft_error <= last;
      last = r.soft_error;
      last_delta = r.delta;
    }
  }
  LearnConfig rm_cfg = learn_config(Trainer::RM, ModelKind::Nonlinear, 5, o.seed, 0);
  rm_cfg.n_min = 20;
  {
    const TrainTrace t = train(pats, init, rm_cfg);
    double last = std::numeric_limits<double>::infinity();
    for (const auto& r : t.rows) {
      if (r.kind == TraceRow::Kind::Accepted) monotone = monotone && r.mae <= last;
      last = r.mae;
    }
  }
  check(monotone, "monotone accepted objective");

  std::string detail = "6 properties";
  if (!failed.empty()) {
    detail += "; failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict(const Opts&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> ids;
  Opts o;
  app.add_option("criteria", ids, "Criterion numbers (default: all)")->check(CLI::Range(1, 12));
  app.add_option("--seed", o.seed, "Master seed")->capture_default_str();
  app.add_option("--threads,-j", o.threads, "Worker threads")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all = {
      {1, "capacity-optimum", capacity_maximum},
      {2, "linear-vs-nonlinear", linear_vs_nonlinear},
      {3, "k-scaling", k_scaling},
      {4, "rm-noise-degradation", rm_noise_degradation},
      {5, "rmwm-improvement", rmwm_improvement},
      {6, "single-spike-generalization", single_spike_generalization},
      {7, "bstdsp-margin", bstdsp_margin_effect},
      {8, "bstdsp-rank-agreement", rank_agreement_check},
      {9, "uci-benchmarks", uci_benchmarks},
      {10, "kernel-normalization", kernel_normalization},
      {11, "reduced-model-validity", validity_trend},
      {12, "property-suite", property_suite},
  };
  if (ids.empty())
    for (const auto& c : all) ids.push_back(c.id);

  bool ok = true;
  for (int id : ids) {
    const Criterion& c = all[static_cast<std::size_t>(id - 1)];
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run(o);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", id, c.name, v.detail.c_str(), sec);
    std::fflush(stdout);
    ok = ok && v.pass;
  }
  return ok ? 0 : 1;
}
