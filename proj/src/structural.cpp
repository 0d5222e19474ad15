#include "dendrite/structural.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "dendrite/csv.hpp"
#include "dendrite/rng.hpp"
#include "search.hpp"

namespace dendrite {

namespace {

constexpr std::uint64_t kTrainStream = 0x5452;  // "TR"

double margin_output(double alpha, double delta, double half_slope) {
  if (alpha >= delta) return 1.0;
  if (alpha <= -delta) return 0.0;
  return alpha * half_slope + 0.5;
}

double signum(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void LearnConfig::validate(std::size_t s, std::size_t d) const {
  if (n_T < 1 || n_T > s) throw std::invalid_argument("learn: require 1 <= n_T <= s");
  if (n_R < 1 || n_R > d) throw std::invalid_argument("learn: require 1 <= n_R <= d");
  if (n_ch < 1) throw std::invalid_argument("learn: require n_ch >= 1");
  if (!(delta_decay > 0.0 && delta_decay < 1.0)) {
    throw std::invalid_argument("learn: require 0 < delta_decay < 1");
  }
  if (use_margin && !(delta0 > 0.0)) throw std::invalid_argument("learn: require delta0 > 0");
  nl.validate();
}

double mae(std::span<const int> predictions, std::span<const int> targets) {
  if (predictions.empty()) throw std::invalid_argument("mae: empty input");
  if (predictions.size() != targets.size()) throw std::invalid_argument("mae: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    s += std::fabs(static_cast<double>(targets[i] - predictions[i]));
  }
  return s / static_cast<double>(predictions.size());
}

TrainingState::TrainingState(const PatternMatrix& x, Connectome c, const LearnConfig& cfg)
    : x_(x),
      c_(std::move(c)),
      nl_(cfg.nl.params(cfg.kind, cfg.use_leak)),
      margin_(cfg.use_margin),
      delta_(cfg.use_margin ? cfg.delta0 : 0.0),
      P_(x.patterns()),
      m_(c_.m()),
      k_(c_.k()) {
  c_.validate();
  if (x_.dim() != c_.d) throw std::invalid_argument("training: pattern width != connectome d");
  if (P_ == 0) throw std::invalid_argument("training: no patterns");
  rebuild();
}

void TrainingState::set_delta(double delta) {
  if (!margin_) return;
  if (!(delta > 0.0)) throw std::invalid_argument("training: delta must be > 0");
  delta_ = delta;
  refresh_errors();
}

double TrainingState::hard_mae() const noexcept {
  return static_cast<double>(hard_) / static_cast<double>(P_);
}

std::vector<int> TrainingState::predictions() const {
  std::vector<int> y(P_);
  for (std::size_t p = 0; p < P_; ++p) y[p] = g(alpha(p));
  return y;
}

void TrainingState::rebuild() {
  const Neuron* neurons[2] = {&c_.plus, &c_.minus};
  for (int n = 0; n < 2; ++n) {
    z_[n].assign(m_ * P_, 0.0);
    b_[n].assign(m_ * P_, 0.0);
    a_[n].assign(P_, 0.0);
    for (std::size_t j = 0; j < m_; ++j) {
      double* z = z_[n].data() + j * P_;
      for (auto aff : neurons[n]->branch(j)) {
        const auto col = x_.column(aff);
        for (std::size_t p = 0; p < P_; ++p) z[p] += col[p];
      }
      double* b = b_[n].data() + j * P_;
      kernels::apply_nonlinearity(z, b, P_, nl_);
      for (std::size_t p = 0; p < P_; ++p) a_[n][p] += b[p];
    }
  }
  sign_.assign(P_, 0.0);
  refresh_errors();
}

void TrainingState::refresh_errors() {
  // Same per-pattern arithmetic and 4-lane summation order as kernels::swap_error,
  // so objective() equals evaluate() of the proposal that produced this state.
  const auto labels = x_.labels();
  const double half_slope = margin_ ? 0.5 / delta_ : 0.0;
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  hard_ = 0;
  for (std::size_t p = 0; p < P_; ++p) {
    const double al = a_[0][p] - a_[1][p];
    const double o = labels[p] != 0 ? 1.0 : 0.0;
    const double y_hard = al > 0.0 ? 1.0 : 0.0;
    hard_ += y_hard != o;
    const double y = margin_ ? margin_output(al, delta_, half_slope) : y_hard;
    lane[p & 3u] += labels[p] != 0 ? 1.0 - y : y;
    sign_[p] = signum(o - y);
  }
  soft_ = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  fit_valid_ = false;
  weight_valid_ = false;
}

void TrainingState::refresh_weights() {
  for (int n = 0; n < 2; ++n) {
    weight_[n].resize(m_ * P_);
    for (std::size_t j = 0; j < m_; ++j) {
      const double* b = b_[n].data() + j * P_;
      double* w = weight_[n].data() + j * P_;
      for (std::size_t p = 0; p < P_; ++p) w[p] = b[p] * sign_[p];
    }
  }
  weight_valid_ = true;
}

const FitnessTable& TrainingState::fitness() {
  if (fit_valid_) return fit_;
  if (!weight_valid_) refresh_weights();
  const Neuron* neurons[2] = {&c_.plus, &c_.minus};
  std::vector<double>* out[2] = {&fit_.plus, &fit_.minus};
  const double inv_p = 1.0 / static_cast<double>(P_);
  for (int n = 0; n < 2; ++n) {
    const double sgn = n == 0 ? 1.0 : -1.0;
    out[n]->resize(m_ * k_);
    for (std::size_t j = 0; j < m_; ++j) {
      const double* w = weight_[n].data() + j * P_;
      for (std::size_t i = 0; i < k_; ++i) {
        const auto col = x_.column(neurons[n]->at(j, i));
        (*out[n])[j * k_ + i] = sgn * kernels::masked_sum(col.data(), w, P_) * inv_p;
      }
    }
  }
  fit_valid_ = true;
  return fit_;
}

double TrainingState::candidate_fitness(int neuron, std::size_t branch, std::uint32_t afferent) {
  if (!weight_valid_) refresh_weights();
  const double sgn = neuron == 0 ? 1.0 : -1.0;
  const double* w = weight_[neuron].data() + branch * P_;
  return sgn * kernels::masked_sum(x_.column(afferent).data(), w, P_) /
         static_cast<double>(P_);
}

double TrainingState::evaluate(const Proposal& pr) const {
  const std::size_t jp = pr.plus.slot / k_;
  const std::size_t jm = pr.minus.slot / k_;
  kernels::SwapSide plus{z_[0].data() + jp * P_, b_[0].data() + jp * P_,
                         x_.column(pr.plus.from).data(), x_.column(pr.plus.to).data(),
                         a_[0].data()};
  kernels::SwapSide minus{z_[1].data() + jm * P_, b_[1].data() + jm * P_,
                          x_.column(pr.minus.from).data(), x_.column(pr.minus.to).data(),
                          a_[1].data()};
  return kernels::swap_error(plus, minus, x_.labels().data(), P_, nl_, margin_ ? delta_ : 0.0);
}

void TrainingState::apply(const Proposal& pr) {
  const Proposal::Side* sides[2] = {&pr.plus, &pr.minus};
  Neuron* neurons[2] = {&c_.plus, &c_.minus};
  for (int n = 0; n < 2; ++n) {
    const auto& sd = *sides[n];
    const std::size_t j = sd.slot / k_;
    if (neurons[n]->afferent[sd.slot] != sd.from) {
      throw std::logic_error("proposal does not match the current connectome");
    }
    neurons[n]->afferent[sd.slot] = sd.to;
    const auto rem = x_.column(sd.from);
    const auto add = x_.column(sd.to);
    double* z = z_[n].data() + j * P_;
    double* b = b_[n].data() + j * P_;
    double* a = a_[n].data();
    for (std::size_t p = 0; p < P_; ++p) {
      z[p] = (z[p] - static_cast<double>(rem[p])) + static_cast<double>(add[p]);
      const double nb = kernels::apply_nl(z[p], nl_);
      a[p] = (a[p] - b[p]) + nb;
      b[p] = nb;
    }
  }
  refresh_errors();
}

FitnessTable fitness_epoch(std::span<const BinaryPattern> patterns, const Connectome& c,
                           const LearnConfig& cfg, double delta) {
  const PatternMatrix x(patterns);
  LearnConfig lc = cfg;
  if (lc.use_margin) lc.delta0 = delta;
  TrainingState st(x, c, lc);
  return st.fitness();
}

std::size_t select_worst_slot(std::span<const double> fitness, std::size_t n_T, Rng& rng) {
  const std::size_t s = fitness.size();
  if (s == 0) throw std::invalid_argument("select_worst_slot: empty table");
  std::size_t best = s;
  auto consider = [&](std::size_t i) {
    if (best == s || fitness[i] < fitness[best] || (fitness[i] == fitness[best] && i < best)) {
      best = i;
    }
  };
  if (n_T >= s) {
    for (std::size_t i = 0; i < s; ++i) consider(i);
    return best;
  }
  std::vector<std::size_t> idx(s);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < n_T; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(s - i));
    std::swap(idx[i], idx[j]);
    consider(idx[i]);
  }
  return best;
}

std::uint32_t select_replacement(TrainingState& state, int neuron, std::size_t branch,
                                 std::size_t n_R, Rng& rng) {
  return detail::best_candidate(state, neuron, branch, n_R, rng);
}

Connectome replacement_step(std::span<const BinaryPattern> patterns, const Connectome& c,
                            const LearnConfig& cfg, double delta, Rng& rng) {
  cfg.validate(c.plus.synapses(), c.d);
  const PatternMatrix x(patterns);
  LearnConfig lc = cfg;
  if (lc.use_margin) lc.delta0 = delta;
  TrainingState st(x, c, lc);
  const FitnessTable& fit = st.fitness();
  const std::size_t sp = select_worst_slot(fit.plus, cfg.n_T, rng);
  const std::size_t sm = select_worst_slot(fit.minus, cfg.n_T, rng);
  Connectome out = c;
  out.plus.afferent[sp] = detail::rewire(st, 0, sp, cfg.n_R, rng).to;
  out.minus.afferent[sm] = detail::rewire(st, 1, sm, cfg.n_R, rng).to;
  return out;
}

TrainTrace train(std::span<const BinaryPattern> patterns, const Connectome& init,
                 const LearnConfig& cfg) {
  if (patterns.empty()) throw std::invalid_argument("train: no patterns");
  init.validate();
  cfg.validate(init.plus.synapses(), init.d);
  const PatternMatrix x(patterns);
  TrainingState st(x, init, cfg);
  return detail::search(st, cfg, cfg.use_margin, x.patterns(), kTrainStream);
}

void write_trace_csv(std::ostream& out, const TrainTrace& t) {
  out << "proposal,event,mae,soft_error,delta,local_minima\n";
  for (const auto& r : t.rows) {
    const char* ev = r.kind == TraceRow::Kind::Initial
                         ? "initial"
                         : (r.kind == TraceRow::Kind::Accepted ? "accepted" : "forced");
    out << r.proposal << ',' << ev << ',' << csv::fmt(r.mae) << ',' << csv::fmt(r.soft_error)
        << ',' << csv::fmt(r.delta) << ',' << r.local_minima << '\n';
  }
}

std::vector<double> misclassified_alphas(std::span<const BinaryPattern> patterns,
                                         const Connectome& c, const LearnConfig& cfg,
                                         const SpikeTestConfig& spike) {
  const SpikeTestResult r = spike_test(patterns, c, cfg.nl, cfg.kind, cfg.use_leak, spike);
  std::vector<double> out;
  for (std::size_t p = 0; p < patterns.size(); ++p) {
    if (r.predictions[p] != patterns[p].label) {
      out.push_back(decision_value(patterns[p], c, cfg.nl, cfg.kind, cfg.use_leak));
    }
  }
  return out;
}

double calibrate_delta0(std::span<const BinaryPattern> patterns, const Connectome& c,
                        const LearnConfig& cfg, const SpikeTestConfig& spike, double fallback) {
  const auto alphas = misclassified_alphas(patterns, c, cfg, spike);
  if (alphas.empty()) return fallback;
  double best = 0.0;
  for (double a : alphas) best = std::max(best, std::fabs(a));
  return best > 0.0 ? best : fallback;
}

}  // namespace dendrite
