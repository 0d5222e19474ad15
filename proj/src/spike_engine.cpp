#include "dendrite/spike_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "dendrite/csv.hpp"
#include "dendrite/rng.hpp"
#include "spike_internal.hpp"

namespace dendrite {

std::size_t LifParams::steps() const {
  return static_cast<std::size_t>(std::llround(duration_ms / dt_ms));
}

void LifParams::validate() const {
  if (!(tau_r_ms > 0.0) || !(tau_f_ms > tau_r_ms)) {
    throw std::invalid_argument("lif: require tau_f > tau_r > 0");
  }
  if (!(dt_ms > 0.0) || dt_ms > tau_r_ms / 4.0) throw std::invalid_argument("lif: require dt <= tau_r/4");
  if (!(v_thr_mv > 0.0)) throw std::invalid_argument("lif: require V_thr > 0");
  if (!(r_mohm > 0.0) || !(c_nf > 0.0)) throw std::invalid_argument("lif: require R, C > 0");
  const double n = duration_ms / dt_ms;
  if (!(duration_ms > 0.0) || std::fabs(n - std::round(n)) > 1e-9 * std::max(1.0, n)) {
    throw std::invalid_argument("lif: dt must divide the duration");
  }
}

double kernel(double t_ms, const LifParams& p) {
  if (t_ms < 0.0) return 0.0;
  return p.i0 * (std::exp(-t_ms / p.tau_f_ms) - std::exp(-t_ms / p.tau_r_ms));
}

double kernel_peak_time(const LifParams& p) {
  return std::log(p.tau_f_ms / p.tau_r_ms) * p.tau_f_ms * p.tau_r_ms / (p.tau_f_ms - p.tau_r_ms);
}

double kernel_area(const LifParams& p) { return p.i0 * (p.tau_f_ms - p.tau_r_ms); }

SpikePattern SpikeCoding::encode(const BinaryPattern& p, const LifParams& lif,
                                 std::uint64_t seed) const {
  if (kind == Kind::Rate) return to_rate_spikes(p, f_high_hz, f_low_hz, lif.duration_ms, seed);
  return to_single_spikes(p, t_syn_ms, jitter_ms, lif.duration_ms, seed);
}

double SpikeCoding::unit_current(const LifParams& lif) const {
  if (kind == Kind::Rate) return f_high_hz * 1e-3 * kernel_area(lif);
  return kernel(kernel_peak_time(lif), lif);
}

kernels::NlParams spike_nonlinearity(const NonlinearityConfig& cfg, ModelKind kind, bool leak,
                                     double unit_current) {
  kernels::NlParams p = cfg.params(kind, leak);
  if (p.linear) return p;
  p.leak = p.leak * unit_current;
  p.inv_thr = 1.0 / (cfg.x_thr * std::pow(unit_current, cfg.exponent - 1));
  p.sat = cfg.b_sat * unit_current;
  return p;
}

double branch_current(std::span<const std::uint32_t> branch, const SpikePattern& spikes,
                      double t_ms, const LifParams& lif, const kernels::NlParams& nl) {
  double in = 0.0;
  for (auto a : branch) {
    for (double ts : spikes.spikes[a]) {
      if (ts < t_ms) in += kernel(t_ms - ts, lif);
    }
  }
  return kernels::apply_nl(in, nl);
}

namespace detail {

std::vector<std::vector<Contact>> invert(const Connectome& c) {
  std::vector<std::vector<Contact>> out(c.d);
  const std::size_t m = c.m();
  const Neuron* neurons[2] = {&c.plus, &c.minus};
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t j = 0; j < m; ++j) {
      for (auto a : neurons[n]->branch(j)) {
        auto& list = out[a];
        const auto state = static_cast<std::uint32_t>(n * m + j);
        auto it = std::find_if(list.begin(), list.end(),
                               [&](const Contact& x) { return x.state == state; });
        if (it == list.end()) list.push_back({state, 1.0});
        else it->weight += 1.0;
      }
    }
  }
  return out;
}

std::vector<Event> bin_events(const SpikePattern& sp, const LifParams& lif) {
  std::vector<Event> ev;
  ev.reserve(sp.total_spikes());
  const std::size_t steps = lif.steps();
  for (std::size_t a = 0; a < sp.spikes.size(); ++a) {
    for (double t : sp.spikes[a]) {
      if (t < 0.0 || t > lif.duration_ms) continue;
      // Step n covers (n dt, (n + 1) dt]; t = 0 joins step 0.
      double idx = std::ceil(t / lif.dt_ms) - 1.0;
      if (idx < 0.0) idx = 0.0;
      auto n = static_cast<std::size_t>(idx);
      if (n >= steps) n = steps - 1;
      const double offset = std::clamp(t - static_cast<double>(n) * lif.dt_ms, 0.0, lif.dt_ms);
      ev.push_back({n, static_cast<std::uint32_t>(a), std::exp(offset / lif.tau_f_ms),
                    std::exp(offset / lif.tau_r_ms)});
    }
  }
  std::stable_sort(ev.begin(), ev.end(), [](const Event& x, const Event& y) {
    return x.step < y.step || (x.step == y.step && x.afferent < y.afferent);
  });
  return ev;
}

}  // namespace detail

namespace {

using detail::Event;

std::vector<SimResult> run(std::span<const SpikePattern> spikes, const Connectome& c,
                           const SpikeModel& model, bool record_trace) {
  model.lif.validate();
  const LifParams& lif = model.lif;
  const std::size_t batch = spikes.size();
  const std::size_t m = c.m();
  const std::size_t block = 2 * m;
  const std::size_t steps = lif.steps();
  const auto contacts = detail::invert(c);

  std::vector<std::vector<Event>> events(batch);
  std::vector<std::size_t> cursor(batch, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    if (spikes[b].afferents() != c.d) throw std::invalid_argument("spike pattern width != d");
    events[b] = detail::bin_events(spikes[b], lif);
  }

  std::vector<double> fall(batch * block, 0.0), rise(batch * block, 0.0);
  std::vector<double> acc(batch * block, 0.0), out(batch * block, 0.0);
  std::vector<double> soma(2 * batch, 0.0), drive(2 * batch, 0.0), v(2 * batch, 0.0);
  std::vector<std::uint32_t> count(2 * batch, 0);
  std::vector<double> d_plus(batch), d_minus(batch), r_plus(batch), r_minus(batch);

  const double df = std::exp(-lif.dt_ms / lif.tau_f_ms);
  const double dr = std::exp(-lif.dt_ms / lif.tau_r_ms);
  const double dm = std::exp(-lif.dt_ms / lif.tau_m_ms());
  const double drive_gain = lif.r_mohm * model.gain * (1.0 - dm);

  std::vector<SimResult> res(batch);
  if (record_trace) {
    for (auto& r : res) r.trace.reserve(steps + 1);
    for (auto& r : res) r.trace.push_back({0.0, 0.0, 0.0});
  }

  for (std::size_t n = 0; n < steps; ++n) {
    for (std::size_t b = 0; b < batch; ++b) {
      auto& ev = events[b];
      std::size_t& i = cursor[b];
      double* fb = fall.data() + b * block;
      double* rb = rise.data() + b * block;
      for (; i < ev.size() && ev[i].step == n; ++i) {
        for (const auto& ct : contacts[ev[i].afferent]) {
          fb[ct.state] += ct.weight * ev[i].fall;
          rb[ct.state] += ct.weight * ev[i].rise;
        }
      }
    }
    kernels::psc_branch_step(fall.data(), rise.data(), acc.data(), out.data(), batch * block, df,
                             dr, lif.i0, model.branch);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* ob = out.data() + b * block;
      double ip = 0.0, im = 0.0;
      for (std::size_t j = 0; j < m; ++j) ip += ob[j];
      for (std::size_t j = 0; j < m; ++j) im += ob[m + j];
      d_plus[b] = ip;
      d_minus[b] = im;
    }
    if (model.differential) {
      kernels::rectified_difference(d_plus.data(), d_minus.data(), r_plus.data(), r_minus.data(),
                                    batch);
      for (std::size_t b = 0; b < batch; ++b) {
        drive[2 * b] = r_plus[b];
        drive[2 * b + 1] = r_minus[b];
      }
    } else {
      for (std::size_t b = 0; b < batch; ++b) {
        drive[2 * b] = d_plus[b];
        drive[2 * b + 1] = d_minus[b];
      }
    }
    kernels::lif_step(v.data(), drive.data(), count.data(), 2 * batch, dm, drive_gain,
                      lif.v_thr_mv);
    if (record_trace) {
      const double t = static_cast<double>(n + 1) * lif.dt_ms;
      for (std::size_t b = 0; b < batch; ++b) res[b].trace.push_back({t, v[2 * b], v[2 * b + 1]});
    }
  }

  const double inv_steps = 1.0 / static_cast<double>(steps);
  for (std::size_t b = 0; b < batch; ++b) {
    auto& r = res[b];
    r.n_plus = count[2 * b];
    r.n_minus = count[2 * b + 1];
    r.mean_branch_plus.resize(m);
    r.mean_branch_minus.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      r.mean_branch_plus[j] = acc[b * block + j] * inv_steps;
      r.mean_branch_minus[j] = acc[b * block + m + j] * inv_steps;
    }
  }
  return res;
}

}  // namespace

SimResult simulate_pair(const SpikePattern& spikes, const Connectome& c, const SpikeModel& model,
                        bool record_trace) {
  return std::move(run(std::span<const SpikePattern>(&spikes, 1), c, model, record_trace).front());
}

std::vector<SimResult> simulate_batch(std::span<const SpikePattern> spikes, const Connectome& c,
                                      const SpikeModel& model) {
  if (spikes.empty()) return {};
  return run(spikes, c, model, false);
}

int classify_spikes(const SpikePattern& spikes, const Connectome& c, const SpikeModel& model) {
  const SimResult r = simulate_pair(spikes, c, model);
  return wta(r.n_plus, r.n_minus);
}

double calibrate_gain(std::span<const BinaryPattern> patterns, const Connectome& c,
                      const NonlinearityConfig& cfg, ModelKind kind, bool leak,
                      double unit_current, bool differential, const LifParams& lif,
                      double target_rate_hz) {
  if (!(target_rate_hz > 0.0)) throw std::invalid_argument("target rate must be > 0");
  double total = 0.0;
  for (const auto& x : patterns) {
    const double ap = neuron_activation(c.plus, x, cfg, kind, leak);
    const double am = neuron_activation(c.minus, x, cfg, kind, leak);
    total += differential ? std::fabs(ap - am) : std::max(ap, am);
  }
  const double mean_drive =
      patterns.empty() ? 0.0 : unit_current * total / static_cast<double>(patterns.size());
  if (!(mean_drive > 0.0)) return 1.0;
  const double isi = 1000.0 / target_rate_hz;
  const double v_inf = lif.v_thr_mv / (1.0 - std::exp(-isi / lif.tau_m_ms()));
  return v_inf / (lif.r_mohm * mean_drive);
}

double calibrate_pulse_gain(std::span<const BinaryPattern> patterns, const Connectome& c,
                            const NonlinearityConfig& cfg, ModelKind kind, bool leak,
                            const SpikeModel& model, double t_syn_ms, double headroom) {
  if (!(headroom > 0.0)) throw std::invalid_argument("calibrate_pulse_gain: headroom must be > 0");
  SpikeModel probe = model;
  probe.gain = 1.0;
  probe.lif.v_thr_mv = std::numeric_limits<double>::max();
  double weakest = std::numeric_limits<double>::infinity();
  for (const auto& x : patterns) {
    const double alpha = decision_value(x, c, cfg, kind, leak);
    if (alpha == 0.0) continue;
    const SpikePattern sp = to_single_spikes(x, t_syn_ms, 0.0, probe.lif.duration_ms, 0);
    const SimResult r = simulate_pair(sp, c, probe, true);
    double peak = 0.0;
    for (const auto& tp : r.trace) peak = std::max(peak, alpha > 0.0 ? tp.v_plus : tp.v_minus);
    if (peak > 0.0) weakest = std::min(weakest, peak);
  }
  if (!std::isfinite(weakest)) return 1.0;
  return headroom * model.lif.v_thr_mv / weakest;
}

SpikeTestResult spike_test(std::span<const BinaryPattern> patterns, const Connectome& c,
                           const NonlinearityConfig& cfg, ModelKind kind, bool leak,
                           const SpikeTestConfig& test) {
  SpikeTestResult out;
  if (patterns.empty()) return out;
  const double u = test.coding.unit_current(test.lif);
  SpikeModel model;
  model.lif = test.lif;
  model.branch = spike_nonlinearity(cfg, kind, leak, u);
  model.differential = test.differential;
  if (test.gain > 0.0) {
    model.gain = test.gain;
  } else if (test.coding.kind == SpikeCoding::Kind::Single) {
    model.gain = calibrate_pulse_gain(patterns, c, cfg, kind, leak, model, test.coding.t_syn_ms,
                                      test.pulse_headroom);
  } else {
    model.gain = calibrate_gain(patterns, c, cfg, kind, leak, u, test.differential, test.lif,
                                test.target_rate_hz);
  }
  out.gain = model.gain;

  const std::size_t batch = std::max<std::size_t>(1, test.batch);
  std::size_t wrong = 0;
  std::vector<SpikePattern> chunk;
  for (std::size_t start = 0; start < patterns.size(); start += batch) {
    const std::size_t end = std::min(patterns.size(), start + batch);
    chunk.clear();
    for (std::size_t p = start; p < end; ++p) {
      chunk.push_back(test.coding.encode(patterns[p], test.lif, derive_seed(test.seed, p)));
    }
    const auto res = simulate_batch(chunk, c, model);
    for (std::size_t i = 0; i < res.size(); ++i) {
      const int y = wta(res[i].n_plus, res[i].n_minus);
      out.predictions.push_back(y);
      out.n_plus.push_back(res[i].n_plus);
      out.n_minus.push_back(res[i].n_minus);
      wrong += y != patterns[start + i].label;
    }
  }
  out.error = static_cast<double>(wrong) / static_cast<double>(patterns.size());
  return out;
}

ValidityPoint validity_from_current(std::span<const double> current, double x_thr) {
  ValidityPoint vp;
  if (current.empty()) return vp;
  double sum = 0.0, sq = 0.0;
  for (double i : current) {
    sum += i;
    sq += i * i;
  }
  const double n = static_cast<double>(current.size());
  const double mean = sum / n;
  vp.predicted = mean * mean / x_thr;
  vp.actual = sq / n / x_thr;
  return vp;
}

std::vector<ValidityPoint> validity_check(std::span<const std::size_t> synapses,
                                          std::span<const double> f_high_hz,
                                          std::span<const double> tau_f_ms, const LifParams& lif,
                                          double x_thr, std::size_t trials, std::uint64_t seed) {
  std::vector<ValidityPoint> table;
  std::vector<double> current;
  for (double tau_f : tau_f_ms) {
    LifParams p = lif;
    p.tau_f_ms = tau_f;
    p.validate();
    const double df = std::exp(-p.dt_ms / p.tau_f_ms);
    const double dr = std::exp(-p.dt_ms / p.tau_r_ms);
    for (double f : f_high_hz) {
      for (std::size_t n_syn : synapses) {
        ValidityPoint acc;
        acc.f_tau = f * 1e-3 * tau_f;
        acc.synapses = n_syn;
        BinaryPattern active;
        active.bits.assign(n_syn, 1);
        for (std::size_t trial = 0; trial < trials; ++trial) {
          const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(f * 1000.0),
                                              trial * 1315423911ULL + n_syn * 2654435761ULL +
                                                  static_cast<std::uint64_t>(tau_f * 1000.0));
          const SpikePattern sp = to_rate_spikes(active, f, 0.0, p.duration_ms, s);
          auto ev = detail::bin_events(sp, p);
          double fa = 0.0, ri = 0.0;
          current.assign(p.steps(), 0.0);
          std::size_t i = 0;
          for (std::size_t n = 0; n < current.size(); ++n) {
            for (; i < ev.size() && ev[i].step == n; ++i) {
              fa += ev[i].fall;
              ri += ev[i].rise;
            }
            fa *= df;
            ri *= dr;
            current[n] = p.i0 * (fa - ri);
          }
          const ValidityPoint one = validity_from_current(current, x_thr);
          acc.predicted += one.predicted;
          acc.actual += one.actual;
        }
        acc.predicted /= static_cast<double>(trials);
        acc.actual /= static_cast<double>(trials);
        table.push_back(acc);
      }
    }
  }
  return table;
}

void write_voltage_trace_csv(std::ostream& out, const SimResult& r) {
  out << "t_ms,v_plus_mV,v_minus_mV\n";
  for (const auto& tp : r.trace) {
    out << csv::fmt(tp.t_ms) << ',' << csv::fmt(tp.v_plus) << ',' << csv::fmt(tp.v_minus) << '\n';
  }
}

}  // namespace dendrite
