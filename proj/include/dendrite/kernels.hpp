#pragma once

// Data-parallel inner loops shared by the trainers and the spike engine.
//
// Every kernel has a scalar reference implementation and, when built with
// DENDRITE_ENABLE_AVX2, an AVX2 variant chosen at runtime. Reductions use a
// fixed 4-lane blocked order in both variants, and elementwise arithmetic is
// issued in the same sequence without contraction, so the two variants return
// bit-identical results.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace dendrite::kernels {

enum class Isa { Scalar, Avx2 };

/// Best variant supported by this build and CPU.
Isa detected_isa() noexcept;
/// Variant currently used by the dispatching entry points.
Isa active_isa() noexcept;
/// Override the dispatch (tests use this to compare variants). Requests for an
/// unsupported variant fall back to Scalar. Returns the variant in effect.
Isa set_active_isa(Isa isa) noexcept;
std::string_view isa_name(Isa isa) noexcept;

/// Branch nonlinearity f(z) = min(max(z - leak, 0)^exponent * inv_thr, sat),
/// or f(z) = z when linear.
struct NlParams {
  int exponent = 2;
  double inv_thr = 0.5;
  double sat = 1.0 / 0.0;
  double leak = 0.0;
  bool linear = false;
};

/// Scalar form of the nonlinearity, identical in rounding to the kernels.
inline double apply_nl(double z, const NlParams& p) noexcept {
  if (p.linear) return z;
  const double t = z - p.leak;
  if (!(t > 0.0)) return 0.0;
  double r = t;
  for (int e = 1; e < p.exponent; ++e) r = r * t;
  r = r * p.inv_thr;
  return r < p.sat ? r : p.sat;
}

/// sum_i mask[i] * w[i] with mask bytes in {0, 1}.
double masked_sum(const std::uint8_t* mask, const double* w, std::size_t n) noexcept;

/// out[i] = f(z[i]).
void apply_nonlinearity(const double* z, double* out, std::size_t n, const NlParams& p) noexcept;

/// One neuron's side of a proposed single-slot rewiring, evaluated over all
/// patterns: the branch activation becomes z + add - remove.
struct SwapSide {
  const double* z = nullptr;       // current branch activation per pattern
  const double* b = nullptr;       // current branch output per pattern
  const std::uint8_t* remove = nullptr;  // input bit of the afferent leaving the slot
  const std::uint8_t* add = nullptr;     // input bit of the afferent taking the slot
  const double* a = nullptr;       // current somatic activation per pattern
};

/// Summed classification error after applying both sides of a proposal.
/// With margin <= 0 the output is the Heaviside comparator and each pattern
/// contributes 0 or 1; otherwise the piecewise-linear margin function is used
/// and each pattern contributes |o - y| in [0, 1].
double swap_error(const SwapSide& plus, const SwapSide& minus, const std::uint8_t* target,
                  std::size_t n, const NlParams& p, double margin) noexcept;

/// One time step of a double-exponential PSC state for a batch of branches:
/// fall *= decay_fall, rise *= decay_rise, current = scale * (fall - rise),
/// acc += f(current). When branch_out is non-null it receives f(current).
void psc_branch_step(double* fall, double* rise, double* acc, double* branch_out,
                     std::size_t n, double decay_fall, double decay_rise, double scale,
                     const NlParams& p) noexcept;

/// Exponential-Euler leaky integrate-and-fire step for a batch of neurons:
/// v = v * decay + drive * gain, then v >= v_thr resets to 0 and increments count.
void lif_step(double* v, const double* drive, std::uint32_t* count, std::size_t n, double decay,
              double gain, double v_thr) noexcept;

/// Rectified differential drive: out_plus = max(plus - minus, 0), out_minus = max(minus - plus, 0).
void rectified_difference(const double* plus, const double* minus, double* out_plus,
                          double* out_minus, std::size_t n) noexcept;

namespace scalar {
double masked_sum(const std::uint8_t* mask, const double* w, std::size_t n) noexcept;
void apply_nonlinearity(const double* z, double* out, std::size_t n, const NlParams& p) noexcept;
double swap_error(const SwapSide& plus, const SwapSide& minus, const std::uint8_t* target,
                  std::size_t n, const NlParams& p, double margin) noexcept;
void psc_branch_step(double* fall, double* rise, double* acc, double* branch_out, std::size_t n,
                     double decay_fall, double decay_rise, double scale,
                     const NlParams& p) noexcept;
void lif_step(double* v, const double* drive, std::uint32_t* count, std::size_t n, double decay,
              double gain, double v_thr) noexcept;
void rectified_difference(const double* plus, const double* minus, double* out_plus,
                          double* out_minus, std::size_t n) noexcept;
}  // namespace scalar

#if defined(DENDRITE_HAVE_AVX2)
namespace avx2 {
double masked_sum(const std::uint8_t* mask, const double* w, std::size_t n) noexcept;
void apply_nonlinearity(const double* z, double* out, std::size_t n, const NlParams& p) noexcept;
double swap_error(const SwapSide& plus, const SwapSide& minus, const std::uint8_t* target,
                  std::size_t n, const NlParams& p, double margin) noexcept;
void psc_branch_step(double* fall, double* rise, double* acc, double* branch_out, std::size_t n,
                     double decay_fall, double decay_rise, double scale,
                     const NlParams& p) noexcept;
void lif_step(double* v, const double* drive, std::uint32_t* count, std::size_t n, double decay,
              double gain, double v_thr) noexcept;
void rectified_difference(const double* plus, const double* minus, double* out_plus,
                          double* out_minus, std::size_t n) noexcept;
}  // namespace avx2
#endif

}  // namespace dendrite::kernels
