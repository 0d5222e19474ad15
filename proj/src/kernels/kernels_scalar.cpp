#include "dendrite/kernels.hpp"

namespace dendrite::kernels::scalar {

namespace {

// Four partial sums, element i goes to lane i % 4; combined as (l0 + l1) + (l2 + l3).
struct LaneSum {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  void add(std::size_t i, double x) noexcept { lane[i & 3u] += x; }
  double total() const noexcept { return (lane[0] + lane[1]) + (lane[2] + lane[3]); }
};

inline double margin_output(double alpha, double margin, double half_slope) noexcept {
  if (alpha >= margin) return 1.0;
  if (alpha <= -margin) return 0.0;
  return alpha * half_slope + 0.5;
}

}  // namespace

double masked_sum(const std::uint8_t* mask, const double* w, std::size_t n) noexcept {
  LaneSum s;
  for (std::size_t i = 0; i < n; ++i) s.add(i, mask[i] != 0 ? w[i] : 0.0);
  return s.total();
}

void apply_nonlinearity(const double* z, double* out, std::size_t n, const NlParams& p) noexcept {
  for (std::size_t i = 0; i < n; ++i) out[i] = apply_nl(z[i], p);
}

double swap_error(const SwapSide& plus, const SwapSide& minus, const std::uint8_t* target,
                  std::size_t n, const NlParams& p, double margin) noexcept {
  LaneSum s;
  const bool soft = margin > 0.0;
  const double half_slope = soft ? 0.5 / margin : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double zp = (plus.z[i] - static_cast<double>(plus.remove[i])) +
                      static_cast<double>(plus.add[i]);
    const double zm = (minus.z[i] - static_cast<double>(minus.remove[i])) +
                      static_cast<double>(minus.add[i]);
    const double ap = (plus.a[i] - plus.b[i]) + apply_nl(zp, p);
    const double am = (minus.a[i] - minus.b[i]) + apply_nl(zm, p);
    const double alpha = ap - am;
    double y;
    if (soft) {
      y = margin_output(alpha, margin, half_slope);
    } else {
      y = alpha > 0.0 ? 1.0 : 0.0;
    }
    s.add(i, target[i] != 0 ? 1.0 - y : y);
  }
  return s.total();
}

void psc_branch_step(double* fall, double* rise, double* acc, double* branch_out, std::size_t n,
                     double decay_fall, double decay_rise, double scale,
                     const NlParams& p) noexcept {
  for (std::size_t i = 0; i < n; ++i) {
    fall[i] = fall[i] * decay_fall;
    rise[i] = rise[i] * decay_rise;
    const double out = apply_nl(scale * (fall[i] - rise[i]), p);
    acc[i] = acc[i] + out;
    if (branch_out != nullptr) branch_out[i] = out;
  }
}

void lif_step(double* v, const double* drive, std::uint32_t* count, std::size_t n, double decay,
              double gain, double v_thr) noexcept {
  for (std::size_t i = 0; i < n; ++i) {
    const double next = v[i] * decay + drive[i] * gain;
    if (next >= v_thr) {
      v[i] = 0.0;
      ++count[i];
    } else {
      v[i] = next;
    }
  }
}

void rectified_difference(const double* plus, const double* minus, double* out_plus,
                          double* out_minus, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) {
    const double dp = plus[i] - minus[i];
    const double dm = minus[i] - plus[i];
    out_plus[i] = dp > 0.0 ? dp : 0.0;
    out_minus[i] = dm > 0.0 ? dm : 0.0;
  }
}

}  // namespace dendrite::kernels::scalar
