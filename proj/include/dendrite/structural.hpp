#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dendrite/dendritic.hpp"
#include "dendrite/patterns.hpp"
#include "dendrite/spike_engine.hpp"

namespace dendrite {

class Rng;

struct LearnConfig {
  std::size_t n_T = 25;
  std::size_t n_R = 25;
  std::size_t n_ch = 100;
  std::size_t n_min = 100;
  /// Margin training: g_margin in the fitness and the acceptance error.
  bool use_margin = false;
  /// b_leak instead of b.
  bool use_leak = false;
  double delta0 = 25.0;
  double delta_decay = 0.8;
  /// Consecutive local minima without a new best that trigger a margin decay.
  std::size_t delta_patience = 5;
  /// Hard cap on proposals; 0 means no cap.
  std::size_t max_proposals = 5'000'000;
  ModelKind kind = ModelKind::Nonlinear;
  NonlinearityConfig nl;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument when the config cannot be used with s synapses, d lines.
  void validate(std::size_t s, std::size_t d) const;
};

/// c_ij per slot, branch-major, aligned with Neuron::afferent.
struct FitnessTable {
  std::vector<double> plus;
  std::vector<double> minus;
};

/// Mean |o - y|. Throws std::invalid_argument on empty or mismatched inputs.
double mae(std::span<const int> predictions, std::span<const int> targets);

/// One slot rewiring per neuron; a side with from == to is a no-op.
struct Proposal {
  struct Side {
    std::size_t slot = 0;
    std::uint32_t from = 0;
    std::uint32_t to = 0;
  };
  Side plus;
  Side minus;
};

/// Cached forward pass of a connectome over a training set: branch
/// activations z, branch outputs b and somatic activations a per pattern.
/// All per-pattern vectors are contiguous so rewiring evaluations stream.
class TrainingState {
 public:
  TrainingState(const PatternMatrix& x, Connectome c, const LearnConfig& cfg);

  const Connectome& connectome() const noexcept { return c_; }
  const PatternMatrix& patterns() const noexcept { return x_; }
  double delta() const noexcept { return delta_; }
  void set_delta(double delta);

  /// Misclassified patterns under g.
  std::size_t hard_errors() const noexcept { return hard_; }
  double hard_mae() const noexcept;
  /// Sum of |o - g_margin(alpha)| (equals hard_errors without margin).
  double soft_error() const noexcept { return soft_; }
  /// Error driving acceptance: soft with margin, hard otherwise.
  double objective() const noexcept { return margin_ ? soft_ : static_cast<double>(hard_); }
  std::vector<int> predictions() const;
  double alpha(std::size_t pattern) const noexcept { return a_[0][pattern] - a_[1][pattern]; }

  /// Epoch fitness; recomputed after every change.
  const FitnessTable& fitness();
  /// Fitness a silent synapse from `afferent` would have on `branch`.
  double candidate_fitness(int neuron, std::size_t branch, std::uint32_t afferent);

  /// Objective after applying the proposal, without applying it.
  double evaluate(const Proposal& p) const;
  void apply(const Proposal& p);

 private:
  void rebuild();
  void refresh_branch(int neuron, std::size_t branch);
  void refresh_errors();
  void refresh_weights();

  const PatternMatrix& x_;
  Connectome c_;
  kernels::NlParams nl_;
  bool margin_;
  double delta_;
  std::size_t P_, m_, k_;
  // [neuron][branch * P + p]
  std::vector<double> z_[2], b_[2];
  // [neuron][p]
  std::vector<double> a_[2];
  std::vector<double> sign_;       // sgn(o - y) per pattern
  std::vector<double> weight_[2];  // b_j(p) sgn(o - y)(p) per branch
  FitnessTable fit_;
  bool fit_valid_ = false;
  bool weight_valid_ = false;
  std::size_t hard_ = 0;
  double soft_ = 0.0;
};

/// Epoch fitness of `c` on `patterns`.
FitnessTable fitness_epoch(std::span<const BinaryPattern> patterns, const Connectome& c,
                           const LearnConfig& cfg, double delta);

/// Minimum-fitness slot of a random candidate set T of n_T distinct slots;
/// ties go to the lowest slot index.
std::size_t select_worst_slot(std::span<const double> fitness, std::size_t n_T, Rng& rng);

/// Best of a random replacement set R of n_R lines (with replacement; all d
/// lines when n_R = d); ties go to the lowest afferent index.
std::uint32_t select_replacement(TrainingState& state, int neuron, std::size_t branch,
                                 std::size_t n_R, Rng& rng);

/// Connectome after one T/R replacement in each neuron.
Connectome replacement_step(std::span<const BinaryPattern> patterns, const Connectome& c,
                            const LearnConfig& cfg, double delta, Rng& rng);

struct TraceRow {
  enum class Kind { Initial, Accepted, Forced };
  std::size_t proposal = 0;
  Kind kind = Kind::Initial;
  double mae = 0.0;
  double soft_error = 0.0;
  double delta = 0.0;
  std::size_t local_minima = 0;
};

struct LocalMinimum {
  std::size_t proposal = 0;
  double mae = 0.0;
  double best_mae = 0.0;
  double delta = 0.0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  std::vector<LocalMinimum> minima;
  std::vector<double> delta_history;
  Connectome best;
  double best_mae = 1.0;
  double best_soft_error = 0.0;
  double final_mae = 1.0;
  double final_delta = 0.0;
  std::size_t proposals = 0;
  bool converged = false;
};

/// Accept/reject rewiring. Proposals alternate between the (+) and (-)
/// neuron, each with a fresh T and R. A proposal is accepted when the
/// objective does not increase; n_ch consecutive proposals without a strict
/// decrease make a local minimum, at which the last proposal is forced.
/// Stops at zero objective or after n_min local minima.
TrainTrace train(std::span<const BinaryPattern> patterns, const Connectome& init,
                 const LearnConfig& cfg);

// CSV: header "proposal,event,mae,soft_error,delta,local_minima".
void write_trace_csv(std::ostream& out, const TrainTrace& t);

/// Highest alpha among spike-test misclassifications (with g-trained
/// connectome); fallback when nothing is misclassified.
double calibrate_delta0(std::span<const BinaryPattern> patterns, const Connectome& c,
                        const LearnConfig& cfg, const SpikeTestConfig& spike, double fallback);

/// alpha values of the spike-test misclassifications.
std::vector<double> misclassified_alphas(std::span<const BinaryPattern> patterns,
                                         const Connectome& c, const LearnConfig& cfg,
                                         const SpikeTestConfig& spike);

}  // namespace dendrite
