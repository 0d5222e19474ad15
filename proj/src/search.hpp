#pragma once

// Accept/reject rewiring loop shared by the reduced-model and spike-timing
// trainers. A State provides objective(), hard_errors(), hard_mae(),
// soft_error(), delta(), set_delta(), connectome(), fitness(),
// candidate_fitness(), evaluate() and apply().

#include <cstddef>
#include <cstdint>

#include "dendrite/rng.hpp"
#include "dendrite/structural.hpp"

namespace dendrite::detail {

template <class State>
std::uint32_t best_candidate(State& st, int neuron, std::size_t branch, std::size_t n_R,
                             Rng& rng) {
  const std::size_t d = st.connectome().d;
  std::uint32_t best = 0;
  double best_c = 0.0;
  bool have = false;
  auto consider = [&](std::uint32_t a) {
    const double c = st.candidate_fitness(neuron, branch, a);
    if (!have || c > best_c || (c == best_c && a < best)) {
      best = a;
      best_c = c;
      have = true;
    }
  };
  if (n_R >= d) {
    for (std::size_t a = 0; a < d; ++a) consider(static_cast<std::uint32_t>(a));
  } else {
    for (std::size_t r = 0; r < n_R; ++r) consider(static_cast<std::uint32_t>(rng.below(d)));
  }
  return best;
}

template <class State>
Proposal::Side rewire(State& st, int neuron, std::size_t slot, std::size_t n_R, Rng& rng) {
  const Neuron& n = neuron == 0 ? st.connectome().plus : st.connectome().minus;
  Proposal::Side sd;
  sd.slot = slot;
  sd.from = n.afferent[slot];
  sd.to = best_candidate(st, neuron, slot / n.k, n_R, rng);
  return sd;
}

inline Proposal::Side unchanged(const Neuron& n) { return {0, n.afferent[0], n.afferent[0]}; }

// Rewires one neuron and leaves the other as is.
template <class State>
Proposal propose_single(State& st, int neuron, std::size_t n_T, std::size_t n_R, Rng& rng) {
  const FitnessTable& fit = st.fitness();
  const std::size_t slot = select_worst_slot(neuron == 0 ? fit.plus : fit.minus, n_T, rng);
  Proposal p;
  p.plus = unchanged(st.connectome().plus);
  p.minus = unchanged(st.connectome().minus);
  (neuron == 0 ? p.plus : p.minus) = rewire(st, neuron, slot, n_R, rng);
  return p;
}

template <class State>
TrainTrace search(State& st, const LearnConfig& cfg, bool margin_schedule, std::size_t patterns,
                  std::uint64_t stream) {
  Rng rng(derive_seed(cfg.seed, stream));
  TrainTrace tr;
  tr.best = st.connectome();
  std::size_t best_hard = st.hard_errors();
  double best_soft = st.soft_error();
  const double inv_p = 1.0 / static_cast<double>(patterns);
  if (margin_schedule) tr.delta_history.push_back(st.delta());

  auto log = [&](TraceRow::Kind kind, std::size_t proposal) {
    tr.rows.push_back({proposal, kind, st.hard_mae(), st.soft_error() * inv_p, st.delta(),
                       tr.minima.size()});
  };
  bool improved = false;
  auto consider_best = [&] {
    if (st.hard_errors() < best_hard ||
        (st.hard_errors() == best_hard && st.soft_error() < best_soft)) {
      best_hard = st.hard_errors();
      best_soft = st.soft_error();
      tr.best = st.connectome();
      improved = true;
    }
  };

  log(TraceRow::Kind::Initial, 0);
  bool done = st.objective() == 0.0 || cfg.n_min == 0;
  std::size_t stalled = 0, stale_minima = 0;
  while (!done) {
    if (cfg.max_proposals != 0 && tr.proposals >= cfg.max_proposals) break;
    // Neurons take turns; each proposal draws its own T and R.
    const int neuron = static_cast<int>(tr.proposals % 2);
    const Proposal p = propose_single(st, neuron, cfg.n_T, cfg.n_R, rng);
    ++tr.proposals;
    const double before = st.objective();
    const double after = st.evaluate(p);
    stalled = after < before ? 0 : stalled + 1;
    if (after <= before) {
      st.apply(p);
      log(TraceRow::Kind::Accepted, tr.proposals);
      consider_best();
    }
    if (stalled >= cfg.n_ch) {
      tr.minima.push_back({tr.proposals, st.hard_mae(), static_cast<double>(best_hard) * inv_p,
                           st.delta()});
      if (after > before) {
        st.apply(p);
        log(TraceRow::Kind::Forced, tr.proposals);
        consider_best();
      }
      stalled = 0;
      if (margin_schedule) {
        stale_minima = improved ? 0 : stale_minima + 1;
        if (stale_minima >= cfg.delta_patience) {
          st.set_delta(st.delta() * cfg.delta_decay);
          tr.delta_history.push_back(st.delta());
          stale_minima = 0;
        }
        improved = false;
      }
      if (tr.minima.size() >= cfg.n_min) done = true;
    }
    if (st.objective() == 0.0) done = true;
  }
  tr.converged = st.objective() == 0.0;
  tr.best_mae = static_cast<double>(best_hard) * inv_p;
  tr.best_soft_error = best_soft * inv_p;
  tr.final_mae = st.hard_mae();
  tr.final_delta = st.delta();
  return tr;
}

}  // namespace dendrite::detail
