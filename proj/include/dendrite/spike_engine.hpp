#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dendrite/dendritic.hpp"
#include "dendrite/kernels.hpp"
#include "dendrite/patterns.hpp"

namespace dendrite {

/// Membrane and PSC parameters. Units: MOhm, nF, mV, ms; currents in nA.
struct LifParams {
  double r_mohm = 10.0;
  double c_nf = 5.0;
  double v_thr_mv = 10.0;
  double duration_ms = 200.0;
  double dt_ms = 0.1;
  double tau_r_ms = 2.0;
  double tau_f_ms = 8.0;
  double i0 = 2.12;

  double tau_m_ms() const noexcept { return r_mohm * c_nf; }
  std::size_t steps() const;
  /// Throws std::invalid_argument unless tau_f > tau_r > 0, dt <= tau_r / 4,
  /// v_thr > 0 and dt divides the duration.
  void validate() const;
};

/// PSC kernel I0 (exp(-t/tau_f) - exp(-t/tau_r)), zero for t < 0.
double kernel(double t_ms, const LifParams& p);
/// Closed-form argmax ln(tau_f/tau_r) tau_f tau_r / (tau_f - tau_r).
double kernel_peak_time(const LifParams& p);
/// Time integral of one kernel, I0 (tau_f - tau_r), in nA ms.
double kernel_area(const LifParams& p);

/// How binary patterns are turned into spikes for testing.
struct SpikeCoding {
  enum class Kind { Rate, Single };
  Kind kind = Kind::Rate;
  double f_high_hz = 250.0;
  double f_low_hz = 1.0;
  double t_syn_ms = 100.0;
  double jitter_ms = 0.0;

  SpikePattern encode(const BinaryPattern& p, const LifParams& lif, std::uint64_t seed) const;
  /// Current carried by one active synapse in the reference scale of the
  /// reduced model: mean PSC for rate coding, kernel peak for single spikes.
  double unit_current(const LifParams& lif) const;
};

/// Branch function in current units. With unit current u the spike-domain
/// function satisfies f(u z) = u b(z): leak u z_leak, threshold x_thr u^(e-1),
/// saturation u b_sat.
kernels::NlParams spike_nonlinearity(const NonlinearityConfig& cfg, ModelKind kind, bool leak,
                                     double unit_current);

/// Instantaneous branch output at time t by direct kernel summation over the
/// branch slots (reference implementation; the simulator uses PSC states).
double branch_current(std::span<const std::uint32_t> branch, const SpikePattern& spikes,
                      double t_ms, const LifParams& lif, const kernels::NlParams& nl);

/// Full spike-model configuration for a neuron pair.
struct SpikeModel {
  LifParams lif;
  kernels::NlParams branch;
  /// Somatic current gain applied to the summed branch currents.
  double gain = 1.0;
  /// Feed max(I+ - I-, 0) and max(I- - I+, 0) instead of I+ and I-.
  bool differential = false;
};

struct TracePoint {
  double t_ms;
  double v_plus;
  double v_minus;
};

struct SimResult {
  std::uint32_t n_plus = 0;
  std::uint32_t n_minus = 0;
  /// Time-averaged branch output currents (nA), per branch.
  std::vector<double> mean_branch_plus;
  std::vector<double> mean_branch_minus;
  /// Filled only when requested.
  std::vector<TracePoint> trace;
};

inline int wta(std::uint32_t n_plus, std::uint32_t n_minus) noexcept {
  return n_plus > n_minus ? 1 : 0;
}

SimResult simulate_pair(const SpikePattern& spikes, const Connectome& c, const SpikeModel& model,
                        bool record_trace = false);

/// Simulates many patterns in lockstep; result i equals simulate_pair(spikes[i]).
std::vector<SimResult> simulate_batch(std::span<const SpikePattern> spikes, const Connectome& c,
                                      const SpikeModel& model);

int classify_spikes(const SpikePattern& spikes, const Connectome& c, const SpikeModel& model);

/// Somatic gain at which a constant drive equal to the mean winning drive of
/// the training set fires at target_rate_hz. Drive is estimated from the
/// reduced model: u max(a+, a-) or, with differential wiring, u |a+ - a-|.
double calibrate_gain(std::span<const BinaryPattern> patterns, const Connectome& c,
                      const NonlinearityConfig& cfg, ModelKind kind, bool leak,
                      double unit_current, bool differential, const LifParams& lif,
                      double target_rate_hz);

/// Somatic gain at which, for the synchronous (jitter-free) single-spike form
/// of every pattern with alpha != 0, the neuron favoured by alpha peaks at
/// headroom x V_thr.
double calibrate_pulse_gain(std::span<const BinaryPattern> patterns, const Connectome& c,
                            const NonlinearityConfig& cfg, ModelKind kind, bool leak,
                            const SpikeModel& model, double t_syn_ms, double headroom);

/// Noisy spike test of a trained connectome.
struct SpikeTestConfig {
  LifParams lif;
  SpikeCoding coding;
  bool differential = false;
  double target_rate_hz = 100.0;
  /// Fixed somatic gain; <= 0 means calibrate_gain (rate coding) or
  /// calibrate_pulse_gain (single spikes) on the test patterns' binary form.
  double gain = 0.0;
  double pulse_headroom = 1.05;
  std::uint64_t seed = 1;
  /// Patterns simulated in one lockstep batch.
  std::size_t batch = 64;
};

struct SpikeTestResult {
  double error = 0.0;
  double gain = 0.0;
  std::vector<int> predictions;
  std::vector<std::uint32_t> n_plus;
  std::vector<std::uint32_t> n_minus;
};

SpikeTestResult spike_test(std::span<const BinaryPattern> patterns, const Connectome& c,
                           const NonlinearityConfig& cfg, ModelKind kind, bool leak,
                           const SpikeTestConfig& test);

/// One row of the reduced-model validity table.
struct ValidityPoint {
  double f_tau = 0.0;       // f_high (kHz) x tau_f (ms)
  std::size_t synapses = 0;
  double predicted = 0.0;   // b(time-averaged input current)
  double actual = 0.0;      // time average of b(input current)
  double relative_deviation() const noexcept {
    return actual != 0.0 ? (actual - predicted) / actual : 0.0;
  }
};

/// Predicted and actual mean output of a quadratic branch for a sampled input current.
ValidityPoint validity_from_current(std::span<const double> current, double x_thr);

/// Branch of `synapses` active lines driven by Poisson trains at each f_high,
/// for each tau_f; `trials` independent windows are pooled per point.
std::vector<ValidityPoint> validity_check(std::span<const std::size_t> synapses,
                                          std::span<const double> f_high_hz,
                                          std::span<const double> tau_f_ms, const LifParams& lif,
                                          double x_thr, std::size_t trials, std::uint64_t seed);

// CSV: header "t_ms,v_plus_mV,v_minus_mV".
void write_voltage_trace_csv(std::ostream& out, const SimResult& r);

}  // namespace dendrite
