#include <atomic>

#include "dendrite/kernels.hpp"

namespace dendrite::kernels {

namespace {

Isa probe() noexcept {
#if defined(DENDRITE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2")) return Isa::Avx2;
#endif
  return Isa::Scalar;
}

std::atomic<Isa>& active() noexcept {
  static std::atomic<Isa> isa{probe()};
  return isa;
}

#if defined(DENDRITE_HAVE_AVX2)
#define DENDRITE_DISPATCH(fn, ...)                                      \
  (active().load(std::memory_order_relaxed) == Isa::Avx2 ? avx2::fn(__VA_ARGS__) \
                                                         : scalar::fn(__VA_ARGS__))
#else
#define DENDRITE_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

}  // namespace

Isa detected_isa() noexcept {
  static const Isa isa = probe();
  return isa;
}

Isa active_isa() noexcept { return active().load(std::memory_order_relaxed); }

Isa set_active_isa(Isa isa) noexcept {
  if (isa == Isa::Avx2 && detected_isa() != Isa::Avx2) isa = Isa::Scalar;
  active().store(isa, std::memory_order_relaxed);
  return isa;
}

std::string_view isa_name(Isa isa) noexcept { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

double masked_sum(const std::uint8_t* mask, const double* w, std::size_t n) noexcept {
  return DENDRITE_DISPATCH(masked_sum, mask, w, n);
}

void apply_nonlinearity(const double* z, double* out, std::size_t n, const NlParams& p) noexcept {
  DENDRITE_DISPATCH(apply_nonlinearity, z, out, n, p);
}

double swap_error(const SwapSide& plus, const SwapSide& minus, const std::uint8_t* target,
                  std::size_t n, const NlParams& p, double margin) noexcept {
  return DENDRITE_DISPATCH(swap_error, plus, minus, target, n, p, margin);
}

void psc_branch_step(double* fall, double* rise, double* acc, double* branch_out, std::size_t n,
                     double decay_fall, double decay_rise, double scale,
                     const NlParams& p) noexcept {
  DENDRITE_DISPATCH(psc_branch_step, fall, rise, acc, branch_out, n, decay_fall, decay_rise, scale,
                    p);
}

void lif_step(double* v, const double* drive, std::uint32_t* count, std::size_t n, double decay,
              double gain, double v_thr) noexcept {
  DENDRITE_DISPATCH(lif_step, v, drive, count, n, decay, gain, v_thr);
}

void rectified_difference(const double* plus, const double* minus, double* out_plus,
                          double* out_minus, std::size_t n) noexcept {
  DENDRITE_DISPATCH(rectified_difference, plus, minus, out_plus, out_minus, n);
}

}  // namespace dendrite::kernels
