#include "dendrite/bstdsp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "dendrite/csv.hpp"
#include "search.hpp"
#include "spike_internal.hpp"

namespace dendrite {

namespace {

constexpr std::uint64_t kBstdspStream = 0x4253;  // "BS"
constexpr double kNever = 1e300;

struct Membrane {
  double ev, eu, a;  // exp(-dt/tau_v), exp(-dt/tau_u), tau_u / (tau_u - tau_v)
};

Membrane membrane(const BstdspParams& p) {
  return {std::exp(-p.psc.dt_ms / p.tau_v_ms), std::exp(-p.psc.dt_ms / p.tau_u_ms),
          p.tau_u_ms / (p.tau_u_ms - p.tau_v_ms)};
}

// Exact update for drive constant over the step and u decaying exponentially.
inline void step_membrane(double& v, double& u, double drive, const Membrane& mb) {
  v = v * mb.ev + drive * (1.0 - mb.ev) + mb.a * u * (mb.eu - mb.ev);
  u = u * mb.eu;
}

std::size_t teacher_step(const BstdspParams& p) {
  const double n = std::round(p.teacher_ms / p.psc.dt_ms) - 1.0;
  return n < 0.0 ? 0 : static_cast<std::size_t>(n);
}

std::size_t syn_step(const BstdspParams& p) {
  const double n = std::round(p.t_syn_ms / p.psc.dt_ms) - 1.0;
  return n < 0.0 ? 0 : static_cast<std::size_t>(n);
}

SpikePattern synchronous(const BinaryPattern& x, const BstdspParams& p) {
  return to_single_spikes(x, p.t_syn_ms, 0.0, p.psc.duration_ms, 0);
}

BstdspParams silent_threshold(BstdspParams p) {
  p.v_thr_mv = kNever;
  p.v_st_mv = kNever;
  return p;
}

}  // namespace

void BstdspParams::validate() const {
  psc.validate();
  if (!(v_thr_mv > 0.0)) throw std::invalid_argument("bstdsp: require V_thr > 0");
  if (!(v_st_mv > 0.0 && v_st_mv <= v_thr_mv)) {
    throw std::invalid_argument("bstdsp: require 0 < V_st <= V_thr");
  }
  if (!(v_reset_mv <= 0.0)) throw std::invalid_argument("bstdsp: require V_reset <= 0");
  if (!(tau_v_ms > 0.0 && tau_u_ms > tau_v_ms)) {
    throw std::invalid_argument("bstdsp: require tau_u > tau_v > 0");
  }
  if (!(tau_pre_ms > 0.0 && tau_post_ms > 0.0)) {
    throw std::invalid_argument("bstdsp: require tau_pre, tau_post > 0");
  }
  if (!(teacher_ms >= 0.0 && teacher_ms < t_syn_ms && t_syn_ms <= psc.duration_ms)) {
    throw std::invalid_argument("bstdsp: require 0 <= teacher < T_syn <= T");
  }
  if (!(gamma >= 0.0) || !(gain > 0.0)) throw std::invalid_argument("bstdsp: require gamma >= 0, gain > 0");
}

kernels::NlParams bstdsp_nonlinearity(const NonlinearityConfig& cfg, ModelKind kind,
                                      const BstdspParams& params) {
  return spike_nonlinearity(cfg, kind, false, kernel(kernel_peak_time(params.psc), params.psc));
}

BstdspResult simulate_bstdsp(const SpikePattern& spikes, const Connectome& c,
                             const BstdspParams& params, const kernels::NlParams& branch,
                             int teacher, bool record_trace) {
  params.validate();
  if (spikes.afferents() != c.d) throw std::invalid_argument("spike pattern width != d");
  const LifParams& lif = params.psc;
  const std::size_t m = c.m();
  const std::size_t steps = lif.steps();
  const auto contacts = detail::invert(c);
  const auto events = detail::bin_events(spikes, lif);
  const Membrane mb = membrane(params);
  const double df = std::exp(-lif.dt_ms / lif.tau_f_ms);
  const double dr = std::exp(-lif.dt_ms / lif.tau_r_ms);
  const int taught = teacher < 0 ? -1 : (teacher != 0 ? 0 : 1);
  const std::size_t n_teach = teacher_step(params);
  const std::size_t n_syn = syn_step(params);

  BstdspResult r;
  for (std::size_t a = 0; a < spikes.spikes.size(); ++a) {
    for (double t : spikes.spikes[a]) {
      r.events.push_back({t, -1, BstdspEvent::Kind::Pre, static_cast<std::uint32_t>(a)});
    }
  }
  r.branch_peak[0].assign(m, 0.0);
  r.branch_peak[1].assign(m, 0.0);
  if (record_trace) r.trace.push_back({0.0, 0.0, 0.0});

  std::vector<double> fall(2 * m, 0.0), rise(2 * m, 0.0), acc(2 * m, 0.0), out(2 * m, 0.0);
  double v[2] = {0.0, 0.0}, u[2] = {0.0, 0.0};
  std::uint32_t count[2] = {0, 0};
  std::size_t cursor = 0;
  for (std::size_t n = 0; n < steps; ++n) {
    for (; cursor < events.size() && events[cursor].step == n; ++cursor) {
      for (const auto& ct : contacts[events[cursor].afferent]) {
        fall[ct.state] += ct.weight * events[cursor].fall;
        rise[ct.state] += ct.weight * events[cursor].rise;
      }
    }
    kernels::psc_branch_step(fall.data(), rise.data(), acc.data(), out.data(), 2 * m, df, dr,
                             lif.i0, branch);
    double in[2] = {0.0, 0.0};
    for (std::size_t nr = 0; nr < 2; ++nr) {
      for (std::size_t j = 0; j < m; ++j) {
        const double o = out[nr * m + j];
        in[nr] += o;
        r.branch_peak[nr][j] = std::max(r.branch_peak[nr][j], o);
      }
    }
    const double diff = in[0] - in[1];
    const double drive[2] = {params.gain * (diff > 0.0 ? diff : 0.0),
                             params.gain * (diff < 0.0 ? -diff : 0.0)};
    const double t0 = static_cast<double>(n) * lif.dt_ms;
    const double t1 = static_cast<double>(n + 1) * lif.dt_ms;
    for (int nr = 0; nr < 2; ++nr) {
      const double before = v[nr];
      step_membrane(v[nr], u[nr], drive[nr], mb);
      if (before < params.v_st_mv && v[nr] >= params.v_st_mv) {
        const double tc = t0 + lif.dt_ms * (params.v_st_mv - before) / (v[nr] - before);
        r.events.push_back({tc, nr, BstdspEvent::Kind::Crossing, 0});
        ++r.crossings[nr];
      }
      if (v[nr] >= params.v_thr_mv) {
        v[nr] = params.v_reset_mv;
        u[nr] = params.v_reset_mv;
        ++count[nr];
        r.events.push_back({t1, nr, BstdspEvent::Kind::Post, 0});
      }
    }
    if (taught >= 0 && n == n_teach) {
      v[taught] = params.v_reset_mv;
      u[taught] = params.v_reset_mv;
      r.events.push_back({params.teacher_ms, taught, BstdspEvent::Kind::Teacher, 0});
    }
    for (int nr = 0; nr < 2; ++nr) r.v_peak[nr] = std::max(r.v_peak[nr], v[nr]);
    if (n == n_syn) {
      r.v_at_syn[0] = v[0];
      r.v_at_syn[1] = v[1];
    }
    if (record_trace) r.trace.push_back({t1, v[0], v[1]});
  }
  std::stable_sort(r.events.begin(), r.events.end(),
                   [](const BstdspEvent& a, const BstdspEvent& b) { return a.t_ms < b.t_ms; });
  r.n_plus = count[0];
  r.n_minus = count[1];
  return r;
}

FitnessTable accumulate_dc(const BstdspResult& r, const SpikePattern& spikes, const Connectome& c,
                           const BstdspParams& params) {
  const Neuron* neurons[2] = {&c.plus, &c.minus};
  std::vector<double> post[2], cross[2];
  for (const auto& e : r.events) {
    if (e.neuron < 0) continue;
    if (e.kind == BstdspEvent::Kind::Crossing) cross[e.neuron].push_back(e.t_ms);
    else post[e.neuron].push_back(e.t_ms);  // output and teacher spikes
  }
  auto last_before = [](const std::vector<double>& times, double t) {
    double last = -1.0;
    bool have = false;
    for (double x : times) {
      if (x < t) {
        last = x;
        have = true;
      }
    }
    return std::pair<bool, double>(have, last);
  };

  FitnessTable dc;
  std::vector<double>* out[2] = {&dc.plus, &dc.minus};
  for (int n = 0; n < 2; ++n) {
    const Neuron& nr = *neurons[n];
    out[n]->assign(nr.synapses(), 0.0);
    for (std::size_t j = 0; j < nr.m; ++j) {
      const double bj = r.branch_peak[n].empty() ? 0.0 : r.branch_peak[n][j];
      for (std::size_t i = 0; i < nr.k; ++i) {
        const auto& train = spikes.spikes[nr.at(j, i)];
        double pot = 0.0, dep = 0.0;
        for (double ts : train) {
          const auto [have, tp] = last_before(post[n], ts);
          if (have) pot += std::exp(-(ts - tp) / params.tau_post_ms);
        }
        for (double tc : cross[n]) {
          const auto [have, ts] = last_before(train, tc);
          if (have) dep += std::exp(-(tc - ts) / params.tau_pre_ms);
        }
        (*out[n])[j * nr.k + i] = bj * pot - params.gamma * bj * dep;
      }
    }
  }
  return dc;
}

double gamma_from_rise(double mean_rise_ms, const BstdspParams& params) {
  return std::exp(-(params.t_syn_ms - params.teacher_ms) / params.tau_post_ms) /
         std::exp(-mean_rise_ms / params.tau_pre_ms);
}

GammaCalibration calibrate_gamma(std::span<const BinaryPattern> patterns, const Connectome& c,
                                 const BstdspParams& params, const kernels::NlParams& branch) {
  GammaCalibration g;
  double sum = 0.0;
  for (const auto& x : patterns) {
    const BstdspResult r = simulate_bstdsp(synchronous(x, params), c, params, branch, x.label);
    for (const auto& e : r.events) {
      if (e.kind != BstdspEvent::Kind::Crossing) continue;
      sum += e.t_ms - params.t_syn_ms;
      ++g.crossings;
    }
  }
  if (g.crossings == 0) {
    throw std::runtime_error("calibrate_gamma: no V_st crossings (V_st too high for the drive)");
  }
  g.mean_rise_ms = sum / static_cast<double>(g.crossings);
  g.gamma = gamma_from_rise(g.mean_rise_ms, params);
  return g;
}

MarginCalibration calibrate_margins(double delta, const BstdspParams& params,
                                    const kernels::NlParams& branch) {
  if (!(delta >= 0.0)) throw std::invalid_argument("calibrate_margins: delta must be >= 0");
  Connectome probe;
  probe.d = 2;
  probe.plus = Neuron(1, 1);
  probe.minus = Neuron(1, 1);
  probe.plus.afferent[0] = 0;
  probe.minus.afferent[0] = 1;

  BstdspParams quiet = silent_threshold(params);
  quiet.v_reset_mv = 0.0;
  SpikePattern one;
  one.duration = params.psc.duration_ms;
  one.spikes.resize(2);
  one.spikes[0].push_back(params.t_syn_ms);
  const BstdspResult single = simulate_bstdsp(one, probe, quiet, branch);

  MarginCalibration mc;
  mc.eta = single.v_peak[0] - single.v_peak[1];
  mc.delta_spike = mc.eta * delta;
  if (mc.delta_spike >= params.v_thr_mv) {
    throw std::invalid_argument("calibrate_margins: delta_spike >= V_thr, margin infeasible");
  }
  mc.v_st = params.v_thr_mv - mc.delta_spike;
  SpikePattern none = one;
  none.spikes[0].clear();
  if (mc.delta_spike > 0.0) {
    BstdspParams unit = quiet;
    unit.v_reset_mv = -1.0;
    const double kappa = -simulate_bstdsp(none, probe, unit, branch, 1).v_at_syn[0];
    if (!(kappa > 0.0)) throw std::runtime_error("calibrate_margins: hyperpolarization vanished");
    mc.v_reset = (mc.v_st - params.v_thr_mv - mc.delta_spike) / kappa;
  }
  BstdspParams check = quiet;
  check.v_reset_mv = mc.v_reset;
  mc.v_reset_prime = simulate_bstdsp(none, probe, check, branch, 1).v_at_syn[0];
  return mc;
}

double calibrate_bstdsp_gain(std::span<const BinaryPattern> patterns, const Connectome& c,
                             const BstdspParams& params, const kernels::NlParams& branch,
                             double spiking_fraction) {
  if (patterns.empty()) throw std::invalid_argument("calibrate_bstdsp_gain: no patterns");
  if (!(spiking_fraction > 0.0 && spiking_fraction <= 1.0)) {
    throw std::invalid_argument("calibrate_bstdsp_gain: fraction must be in (0, 1]");
  }
  BstdspParams unit = silent_threshold(params);
  unit.gain = 1.0;
  unit.v_reset_mv = 0.0;
  std::vector<double> q;
  q.reserve(patterns.size());
  for (const auto& x : patterns) {
    const BstdspResult r = simulate_bstdsp(synchronous(x, unit), c, unit, branch);
    q.push_back(std::max(r.v_peak[0], r.v_peak[1]));
  }
  std::sort(q.begin(), q.end());
  const auto idx = static_cast<std::size_t>(
      std::floor((1.0 - spiking_fraction) * static_cast<double>(q.size())));
  const std::size_t i = std::min(idx, q.size() - 1);
  const double hi = q[i];
  if (!(hi > 0.0)) throw std::runtime_error("calibrate_bstdsp_gain: patterns give no drive");
  // Branch counts are integers, so peaks come in discrete levels. The
  // threshold goes between hi and the next lower level, never on one.
  double lo = 0.0;
  for (std::size_t j = i; j-- > 0;) {
    if (q[j] < hi * (1.0 - 1e-9)) {
      lo = q[j];
      break;
    }
  }
  return params.v_thr_mv / (lo > 0.0 ? 0.5 * (lo + hi) : 0.5 * hi);
}

BstdspSetup prepare_bstdsp(std::span<const BinaryPattern> patterns, const Connectome& init,
                           const BstdspParams& base, const kernels::NlParams& branch,
                           double delta, double spiking_fraction) {
  BstdspSetup s;
  s.branch = branch;
  s.params = base;
  s.params.v_st_mv = base.v_thr_mv;
  s.params.v_reset_mv = 0.0;
  s.params.gain = calibrate_bstdsp_gain(patterns, init, s.params, branch, spiking_fraction);
  s.margin = calibrate_margins(delta, s.params, branch);
  s.params.v_st_mv = s.margin.v_st;
  s.params.v_reset_mv = s.margin.v_reset;
  s.gamma = calibrate_gamma(patterns, init, s.params, branch);
  s.params.gamma = s.gamma.gamma;
  return s;
}

namespace {

// Delta = 0 training state. All input arrives at T_syn, so each branch's
// output is a function of its active-synapse count z alone and the somatic
// input of a pattern is a sum of per-z waveforms. Runs start at T_syn from
// the precomputed teacher-only state.
class BstdspState {
 public:
  BstdspState(const PatternMatrix& x, Connectome c, const BstdspParams& prm,
              const kernels::NlParams& nl)
      : x_(x), c_(std::move(c)), prm_(prm), mb_(membrane(prm)), P_(x.patterns()),
        m_(c_.m()), k_(c_.k()) {
    prm_.validate();
    c_.validate();
    if (x_.dim() != c_.d) throw std::invalid_argument("bstdsp: pattern width != connectome d");
    if (P_ == 0) throw std::invalid_argument("bstdsp: no patterns");
    build_tables(nl);
    rebuild();
  }

  const Connectome& connectome() const noexcept { return c_; }
  double objective() const noexcept { return score(hard_, unlearned_); }
  // Classification errors first, unlearned patterns break ties.
  double score(long hard, long unlearned) const noexcept {
    return static_cast<double>(hard) * static_cast<double>(P_ + 1) + static_cast<double>(unlearned);
  }
  std::size_t hard_errors() const noexcept { return hard_; }
  double hard_mae() const noexcept { return static_cast<double>(hard_) / static_cast<double>(P_); }
  double soft_error() const noexcept { return static_cast<double>(unlearned_); }
  double delta() const noexcept { return prm_.v_thr_mv - prm_.v_st_mv; }
  void set_delta(double) noexcept {}

  const FitnessTable& fitness() {
    if (fit_valid_) return fit_;
    if (!weight_valid_) refresh_weights();
    const Neuron* neurons[2] = {&c_.plus, &c_.minus};
    std::vector<double>* out[2] = {&fit_.plus, &fit_.minus};
    const double inv_p = 1.0 / static_cast<double>(P_);
    for (int n = 0; n < 2; ++n) {
      out[n]->resize(m_ * k_);
      for (std::size_t j = 0; j < m_; ++j) {
        const double* w = weight_[n].data() + j * P_;
        for (std::size_t i = 0; i < k_; ++i) {
          const auto col = x_.column(neurons[n]->at(j, i));
          (*out[n])[j * k_ + i] = kernels::masked_sum(col.data(), w, P_) * inv_p;
        }
      }
    }
    fit_valid_ = true;
    return fit_;
  }

  double candidate_fitness(int neuron, std::size_t branch, std::uint32_t afferent) {
    if (!weight_valid_) refresh_weights();
    const double* w = weight_[neuron].data() + branch * P_;
    return kernels::masked_sum(x_.column(afferent).data(), w, P_) / static_cast<double>(P_);
  }

  double evaluate(const Proposal& pr) {
    long unlearned = static_cast<long>(unlearned_);
    long hard = static_cast<long>(hard_);
    for_each_affected(pr, [&](std::size_t p, const double* plus, const double* minus) {
      const Outcome o = run(p, plus, minus);
      unlearned += static_cast<long>(!o.learned) - static_cast<long>(!out_[p].learned);
      hard += static_cast<long>(o.wrong) - static_cast<long>(out_[p].wrong);
    });
    return score(hard, unlearned);
  }

  void apply(const Proposal& pr) {
    const Proposal::Side* sides[2] = {&pr.plus, &pr.minus};
    Neuron* neurons[2] = {&c_.plus, &c_.minus};
    for (int n = 0; n < 2; ++n) {
      if (neurons[n]->afferent[sides[n]->slot] != sides[n]->from) {
        throw std::logic_error("proposal does not match the current connectome");
      }
    }
    for_each_affected(pr, [&](std::size_t p, const double* plus, const double* minus) {
      out_[p] = run(p, plus, minus);
      double* dst[2] = {in_[0].data() + p * L_, in_[1].data() + p * L_};
      if (plus != dst[0]) std::copy(plus, plus + L_, dst[0]);
      if (minus != dst[1]) std::copy(minus, minus + L_, dst[1]);
    });
    for (int n = 0; n < 2; ++n) {
      const auto& sd = *sides[n];
      if (sd.from == sd.to) continue;
      neurons[n]->afferent[sd.slot] = sd.to;
      const auto rem = x_.column(sd.from);
      const auto add = x_.column(sd.to);
      auto* z = z_[n].data() + (sd.slot / k_) * P_;
      for (std::size_t p = 0; p < P_; ++p) z[p] = static_cast<std::uint16_t>(z[p] - rem[p] + add[p]);
    }
    recount();
  }

 private:
  struct Outcome {
    double e[2] = {0.0, 0.0};  // per-neuron trace factor of Delta c
    bool learned = false;
    bool wrong = false;
  };

  struct Run {
    std::uint32_t spikes = 0;
    std::uint32_t crossings = 0;
    double depression = 0.0;
  };

  void build_tables(const kernels::NlParams& nl) {
    const LifParams& lif = prm_.psc;
    const std::size_t steps = lif.steps();
    // bin_events places the T_syn spike; the table starts at its step.
    SpikePattern one;
    one.duration = lif.duration_ms;
    one.spikes.assign(1, {prm_.t_syn_ms});
    const auto ev = detail::bin_events(one, lif);
    n0_ = ev.front().step;
    L_ = steps - n0_;
    const double df = std::exp(-lif.dt_ms / lif.tau_f_ms);
    const double dr = std::exp(-lif.dt_ms / lif.tau_r_ms);
    wave_.assign((k_ + 1) * L_, 0.0);
    peak_.assign(k_ + 1, 0.0);
    for (std::size_t z = 1; z <= k_; ++z) {
      double f = static_cast<double>(z) * ev.front().fall;
      double r = static_cast<double>(z) * ev.front().rise;
      double* w = wave_.data() + z * L_;
      for (std::size_t t = 0; t < L_; ++t) {
        f *= df;
        r *= dr;
        w[t] = kernels::apply_nl(lif.i0 * (f - r), nl);
        peak_[z] = std::max(peak_[z], w[t]);
      }
    }
    const double* w1 = wave_.data() + L_;
    t_peak_ = static_cast<std::size_t>(std::max_element(w1, w1 + L_) - w1);
    // Teacher-only state at the start of the input window.
    double v = 0.0, u = 0.0;
    const std::size_t nt = teacher_step(prm_);
    for (std::size_t n = 0; n < n0_; ++n) {
      step_membrane(v, u, 0.0, mb_);
      if (n == nt) v = u = prm_.v_reset_mv;
    }
    v0_ = v;
    u0_ = u;
    r_teacher_ = std::exp(-(prm_.t_syn_ms - prm_.teacher_ms) / prm_.tau_post_ms);
    scratch_[0].resize(L_);
    scratch_[1].resize(L_);
  }

  void rebuild() {
    const Neuron* neurons[2] = {&c_.plus, &c_.minus};
    for (int n = 0; n < 2; ++n) {
      z_[n].assign(m_ * P_, 0);
      for (std::size_t j = 0; j < m_; ++j) {
        auto* z = z_[n].data() + j * P_;
        for (auto aff : neurons[n]->branch(j)) {
          const auto col = x_.column(aff);
          for (std::size_t p = 0; p < P_; ++p) z[p] = static_cast<std::uint16_t>(z[p] + col[p]);
        }
      }
      in_[n].assign(P_ * L_, 0.0);
      for (std::size_t p = 0; p < P_; ++p) {
        double* dst = in_[n].data() + p * L_;
        for (std::size_t j = 0; j < m_; ++j) {
          const double* w = wave_.data() + z_[n][j * P_ + p] * L_;
          for (std::size_t t = 0; t < L_; ++t) dst[t] += w[t];
        }
      }
    }
    out_.resize(P_);
    for (std::size_t p = 0; p < P_; ++p) {
      out_[p] = run(p, in_[0].data() + p * L_, in_[1].data() + p * L_);
    }
    recount();
  }

  void recount() {
    unlearned_ = 0;
    hard_ = 0;
    for (const auto& o : out_) {
      unlearned_ += !o.learned;
      hard_ += o.wrong;
    }
    fit_valid_ = false;
    weight_valid_ = false;
  }

  void refresh_weights() {
    for (int n = 0; n < 2; ++n) {
      weight_[n].resize(m_ * P_);
      for (std::size_t j = 0; j < m_; ++j) {
        const auto* z = z_[n].data() + j * P_;
        double* w = weight_[n].data() + j * P_;
        for (std::size_t p = 0; p < P_; ++p) w[p] = peak_[z[p]] * out_[p].e[n];
      }
    }
    weight_valid_ = true;
  }

  // Calls f(p, plus_input, minus_input) for every pattern whose branch
  // activity changes under the proposal.
  template <class F>
  void for_each_affected(const Proposal& pr, F&& f) {
    const Proposal::Side* sides[2] = {&pr.plus, &pr.minus};
    const std::uint8_t* rem[2];
    const std::uint8_t* add[2];
    bool live[2];
    for (int n = 0; n < 2; ++n) {
      live[n] = sides[n]->from != sides[n]->to;
      rem[n] = x_.column(sides[n]->from).data();
      add[n] = x_.column(sides[n]->to).data();
    }
    for (std::size_t p = 0; p < P_; ++p) {
      bool touched[2];
      for (int n = 0; n < 2; ++n) touched[n] = live[n] && rem[n][p] != add[n][p];
      if (!touched[0] && !touched[1]) continue;
      const double* in[2];
      for (int n = 0; n < 2; ++n) {
        const double* cur = in_[n].data() + p * L_;
        in[n] = cur;
        if (!touched[n]) continue;
        const std::size_t j = sides[n]->slot / k_;
        const std::size_t z = z_[n][j * P_ + p];
        const std::size_t nz = z - rem[n][p] + add[n][p];
        const double* wo = wave_.data() + z * L_;
        const double* wn = wave_.data() + nz * L_;
        double* dst = scratch_[n].data();
        for (std::size_t t = 0; t < L_; ++t) dst[t] = (cur[t] - wo[t]) + wn[t];
        in[n] = dst;
      }
      f(p, in[0], in[1]);
    }
  }

  Run simulate(const double* self, const double* other, bool taught) const {
    Run r;
    double v = taught ? v0_ : 0.0;
    double u = taught ? u0_ : 0.0;
    const double dt = prm_.psc.dt_ms;
    for (std::size_t t = 0; t < L_; ++t) {
      const double diff = self[t] - other[t];
      const double drive = prm_.gain * (diff > 0.0 ? diff : 0.0);
      const double before = v;
      step_membrane(v, u, drive, mb_);
      if (before < prm_.v_st_mv && v >= prm_.v_st_mv) {
        const double tc = static_cast<double>(n0_ + t) * dt +
                          dt * (prm_.v_st_mv - before) / (v - before);
        r.depression += std::exp(-(tc - prm_.t_syn_ms) / prm_.tau_pre_ms);
        ++r.crossings;
      }
      if (v >= prm_.v_thr_mv) {
        v = u = prm_.v_reset_mv;
        ++r.spikes;
      }
      // Past the kernel peak the input only decays and u <= 0, so V stays
      // below max(V, gain * self).
      if (t > t_peak_ && v < prm_.v_st_mv && prm_.gain * self[t] < prm_.v_st_mv) break;
    }
    return r;
  }

  Outcome run(std::size_t p, const double* plus, const double* minus) const {
    const int o = x_.labels()[p] != 0 ? 1 : 0;
    const int taught = o == 1 ? 0 : 1;
    const double* in[2] = {plus, minus};
    const Run t = simulate(in[taught], in[1 - taught], true);
    const Run rest = simulate(in[1 - taught], in[taught], false);
    const Run free = simulate(in[taught], in[1 - taught], false);
    Outcome out;
    out.e[taught] = r_teacher_ - prm_.gamma * t.depression;
    out.e[1 - taught] = -prm_.gamma * rest.depression;
    out.learned = t.crossings > 0 && rest.crossings == 0;
    const std::uint32_t n_plus = taught == 0 ? free.spikes : rest.spikes;
    const std::uint32_t n_minus = taught == 0 ? rest.spikes : free.spikes;
    out.wrong = wta(n_plus, n_minus) != o;
    return out;
  }

  const PatternMatrix& x_;
  Connectome c_;
  BstdspParams prm_;
  Membrane mb_;
  std::size_t P_, m_, k_;
  std::size_t n0_ = 0, L_ = 0, t_peak_ = 0;
  double v0_ = 0.0, u0_ = 0.0, r_teacher_ = 0.0;
  std::vector<double> wave_;  // [z * L + t]
  std::vector<double> peak_;  // peak branch output per z
  std::vector<std::uint16_t> z_[2];  // [branch * P + p]
  std::vector<double> in_[2];        // [p * L + t]
  std::vector<double> scratch_[2];
  std::vector<Outcome> out_;
  std::vector<double> weight_[2];
  FitnessTable fit_;
  bool fit_valid_ = false;
  bool weight_valid_ = false;
  std::size_t unlearned_ = 0, hard_ = 0;
};

}  // namespace

TrainTrace train_bstdsp(std::span<const BinaryPattern> patterns, const Connectome& init,
                        const BstdspParams& params, const kernels::NlParams& branch,
                        const LearnConfig& cfg) {
  if (patterns.empty()) throw std::invalid_argument("train_bstdsp: no patterns");
  init.validate();
  cfg.validate(init.plus.synapses(), init.d);
  const PatternMatrix x(patterns);
  BstdspState st(x, init, params, branch);
  return detail::search(st, cfg, false, x.patterns(), kBstdspStream);
}

FitnessTable bstdsp_fitness(std::span<const BinaryPattern> patterns, const Connectome& c,
                            const BstdspParams& params, const kernels::NlParams& branch) {
  const PatternMatrix x(patterns);
  BstdspState st(x, c, params, branch);
  return st.fitness();
}

BstdspTestResult test_bstdsp(std::span<const BinaryPattern> patterns, const Connectome& c,
                             const BstdspParams& params, const kernels::NlParams& branch,
                             double jitter_ms, std::uint64_t seed) {
  BstdspTestResult out;
  if (patterns.empty()) return out;
  std::size_t wrong = 0;
  for (std::size_t p = 0; p < patterns.size(); ++p) {
    const SpikePattern sp = to_single_spikes(patterns[p], params.t_syn_ms, jitter_ms,
                                             params.psc.duration_ms, derive_seed(seed, p));
    const BstdspResult r = simulate_bstdsp(sp, c, params, branch);
    const int y = wta(r.n_plus, r.n_minus);
    out.predictions.push_back(y);
    wrong += y != patterns[p].label;
  }
  out.error = static_cast<double>(wrong) / static_cast<double>(patterns.size());
  return out;
}

double rank_agreement(const FitnessTable& a, const FitnessTable& b) {
  if (a.plus.size() != b.plus.size() || a.minus.size() != b.minus.size()) {
    throw std::invalid_argument("rank_agreement: table shapes differ");
  }
  std::size_t agree = 0, total = 0;
  auto sign = [](double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); };
  for (const auto* pair : {&a.plus, &a.minus}) {
    const auto& x = *pair;
    const auto& y = pair == &a.plus ? b.plus : b.minus;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = i + 1; j < x.size(); ++j) {
        agree += sign(x[i] - x[j]) == sign(y[i] - y[j]);
        ++total;
      }
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(total);
}

void write_bstdsp_events_csv(std::ostream& out, const BstdspResult& r) {
  out << "t_ms,neuron,event,afferent\n";
  for (const auto& e : r.events) {
    const char* kind = e.kind == BstdspEvent::Kind::Pre
                           ? "pre"
                           : (e.kind == BstdspEvent::Kind::Post
                                  ? "post"
                                  : (e.kind == BstdspEvent::Kind::Teacher ? "teacher" : "crossing"));
    const char* who = e.neuron < 0 ? "input" : (e.neuron == 0 ? "+" : "-");
    out << csv::fmt(e.t_ms) << ',' << who << ',' << kind << ',';
    if (e.kind == BstdspEvent::Kind::Pre) out << e.afferent;
    out << '\n';
  }
}

}  // namespace dendrite
