#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dendrite/dendritic.hpp"
#include "dendrite/kernels.hpp"
#include "dendrite/patterns.hpp"
#include "dendrite/spike_engine.hpp"
#include "dendrite/structural.hpp"

namespace dendrite {

/// Two-state neuron with hyperpolarization and the learning-event levels.
/// Voltages in mV, times in ms.
struct BstdspParams {
  /// PSC kernel and time grid; the membrane fields are not used.
  LifParams psc;
  double tau_v_ms = 4.0;
  double tau_u_ms = 80.0;
  double tau_pre_ms = 10.0;
  double tau_post_ms = 50.0;
  double t_syn_ms = 100.0;
  double teacher_ms = 1.0;
  double v_thr_mv = 0.1;
  double v_st_mv = 0.1;
  /// V_reset = u_reset, applied after every postsynaptic spike.
  double v_reset_mv = 0.0;
  double gamma = 1.0;
  /// Membrane drive in mV per nA of summed branch current.
  double gain = 1.0;

  /// Throws std::invalid_argument unless 0 < V_st <= V_thr, V_reset <= 0,
  /// tau_u > tau_v > 0, trace constants > 0 and the teacher precedes T_syn.
  void validate() const;
};

struct BstdspEvent {
  enum class Kind { Pre, Post, Teacher, Crossing };
  double t_ms = 0.0;
  /// 0 for (+), 1 for (-), -1 for presynaptic spikes.
  int neuron = -1;
  Kind kind = Kind::Pre;
  std::uint32_t afferent = 0;
};

struct BstdspResult {
  std::uint32_t n_plus = 0;
  std::uint32_t n_minus = 0;
  /// Time ordered.
  std::vector<BstdspEvent> events;
  /// Peak branch output current per neuron and branch.
  std::vector<double> branch_peak[2];
  double v_peak[2] = {0.0, 0.0};
  /// V_m at the last grid point not after T_syn.
  double v_at_syn[2] = {0.0, 0.0};
  std::uint32_t crossings[2] = {0, 0};
  std::vector<TracePoint> trace;
};

/// Branch function of the spike-timing model: unit current is the kernel peak.
kernels::NlParams bstdsp_nonlinearity(const NonlinearityConfig& cfg, ModelKind kind,
                                      const BstdspParams& params);

/// Simulates both neurons with differential, rectified input. teacher < 0
/// runs without teacher; teacher = o forces a spike at teacher_ms in the
/// (+) neuron for o = 1 or the (-) neuron for o = 0. Teacher spikes are not
/// counted in n_plus / n_minus.
BstdspResult simulate_bstdsp(const SpikePattern& spikes, const Connectome& c,
                             const BstdspParams& params, const kernels::NlParams& branch,
                             int teacher = -1, bool record_trace = false);

/// Per-slot Delta c of one pattern. Potentiation: branch factor times the
/// postsynaptic trace at each presynaptic spike of the slot's afferent.
/// Depression: gamma times branch factor times the presynaptic trace at each
/// V_st upward crossing. The branch factor is the branch's peak output.
FitnessTable accumulate_dc(const BstdspResult& r, const SpikePattern& spikes, const Connectome& c,
                           const BstdspParams& params);

/// exp(-(T_syn - teacher)/tau_post) / exp(-mean_rise/tau_pre), mean_rise
/// measured from T_syn.
double gamma_from_rise(double mean_rise_ms, const BstdspParams& params);

struct GammaCalibration {
  double gamma = 1.0;
  double mean_rise_ms = 0.0;
  std::size_t crossings = 0;
};

/// Mean V_st crossing time after T_syn over teacher-driven runs of the
/// patterns as Delta = 0 single spikes. Throws std::runtime_error when no
/// crossing occurs (V_st too high for the drive).
GammaCalibration calibrate_gamma(std::span<const BinaryPattern> patterns, const Connectome& c,
                                 const BstdspParams& params, const kernels::NlParams& branch);

struct MarginCalibration {
  /// Peak V+ - V- from one activated synapse.
  double eta = 0.0;
  double delta_spike = 0.0;
  double v_st = 0.0;
  double v_reset = 0.0;
  /// Measured V_m at T_syn after a teacher spike, with v_reset applied.
  double v_reset_prime = 0.0;
};

/// delta_spike = eta delta, V_st = V_thr - delta_spike, and u_reset chosen so
/// that V'_reset = V_st - V_thr - delta_spike. Throws std::invalid_argument
/// for delta < 0 or delta_spike >= V_thr.
MarginCalibration calibrate_margins(double delta, const BstdspParams& params,
                                    const kernels::NlParams& branch);

/// Gain at which the given fraction of patterns (Delta = 0, no teacher)
/// makes at least one neuron fire.
double calibrate_bstdsp_gain(std::span<const BinaryPattern> patterns, const Connectome& c,
                             const BstdspParams& params, const kernels::NlParams& branch,
                             double spiking_fraction);

struct BstdspSetup {
  BstdspParams params;
  kernels::NlParams branch;
  MarginCalibration margin;
  GammaCalibration gamma;
};

/// Gain, then margins (eta is measured at that gain), then gamma.
/// delta = 0 trains without margin.
BstdspSetup prepare_bstdsp(std::span<const BinaryPattern> patterns, const Connectome& init,
                           const BstdspParams& base, const kernels::NlParams& branch,
                           double delta, double spiking_fraction = 0.65);

/// Rewiring driven by spike-timing Delta c over Delta = 0 single-spike
/// versions of the patterns. Hard errors use g(n+ - n-) without teacher. A
/// pattern is learned when, with teacher, the taught neuron crosses V_st and
/// the other does not; soft_error counts unlearned patterns. Proposals are
/// accepted on (hard errors, unlearned) in lexicographic order, with the
/// proposal protocol of train().
TrainTrace train_bstdsp(std::span<const BinaryPattern> patterns, const Connectome& init,
                        const BstdspParams& params, const kernels::NlParams& branch,
                        const LearnConfig& cfg);

/// Fitness tables from one epoch of teacher-driven runs.
FitnessTable bstdsp_fitness(std::span<const BinaryPattern> patterns, const Connectome& c,
                            const BstdspParams& params, const kernels::NlParams& branch);

struct BstdspTestResult {
  double error = 0.0;
  std::vector<int> predictions;
};

/// Single spikes jittered uniformly over jitter_ms around T_syn, no teacher.
BstdspTestResult test_bstdsp(std::span<const BinaryPattern> patterns, const Connectome& c,
                             const BstdspParams& params, const kernels::NlParams& branch,
                             double jitter_ms, std::uint64_t seed);

/// Fraction of slot pairs (within each neuron) ordered the same way by two
/// fitness tables; pairs tied in both count as agreeing.
double rank_agreement(const FitnessTable& a, const FitnessTable& b);

// CSV: header "t_ms,neuron,event,afferent".
void write_bstdsp_events_csv(std::ostream& out, const BstdspResult& r);

}  // namespace dendrite
