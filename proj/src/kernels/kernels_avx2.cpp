#include "dendrite/kernels.hpp"

#include <immintrin.h>

#include <cstring>

namespace dendrite::kernels::avx2 {

namespace {

inline double lane_total(__m256d acc) noexcept {
  alignas(32) double l[4];
  _mm256_store_pd(l, acc);
  return (l[0] + l[1]) + (l[2] + l[3]);
}

// Four mask bytes -> all-ones / all-zeros 64-bit lanes.
inline __m256d mask4(const std::uint8_t* m) noexcept {
  std::int32_t raw;
  std::memcpy(&raw, m, sizeof raw);
  const __m256i wide = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(raw));
  const __m256i is_zero = _mm256_cmpeq_epi64(wide, _mm256_setzero_si256());
  return _mm256_castsi256_pd(_mm256_xor_si256(is_zero, _mm256_set1_epi64x(-1)));
}

// Mask for the first r < 4 lanes.
inline __m256i tail_mask(std::size_t r) noexcept {
  const __m256i idx = _mm256_set_epi64x(3, 2, 1, 0);
  return _mm256_cmpgt_epi64(_mm256_set1_epi64x(static_cast<long long>(r)), idx);
}

inline void copy_tail_bytes(std::uint8_t* dst, const std::uint8_t* src, std::size_t r) noexcept {
  dst[0] = dst[1] = dst[2] = dst[3] = 0;
  for (std::size_t j = 0; j < r; ++j) dst[j] = src[j];
}

struct Nl {
  __m256d inv_thr, sat, leak;
  int exponent;
  bool linear;
  explicit Nl(const NlParams& p)
      : inv_thr(_mm256_set1_pd(p.inv_thr)),
        sat(_mm256_set1_pd(p.sat)),
        leak(_mm256_set1_pd(p.leak)),
        exponent(p.exponent),
        linear(p.linear) {}

  __m256d operator()(__m256d z) const noexcept {
    if (linear) return z;
    const __m256d t = _mm256_sub_pd(z, leak);
    const __m256d positive = _mm256_cmp_pd(t, _mm256_setzero_pd(), _CMP_GT_OQ);
    __m256d r = t;
    for (int e = 1; e < exponent; ++e) r = _mm256_mul_pd(r, t);
    r = _mm256_mul_pd(r, inv_thr);
    r = _mm256_min_pd(r, sat);
    return _mm256_and_pd(r, positive);
  }
};

inline __m256d bits_as_double(const std::uint8_t* m) noexcept {
  return _mm256_and_pd(mask4(m), _mm256_set1_pd(1.0));
}

}  // namespace

double masked_sum(const std::uint8_t* mask, const double* w, std::size_t n) noexcept {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_and_pd(mask4(mask + i), _mm256_loadu_pd(w + i)));
  }
  if (i < n) {
    const std::size_t r = n - i;
    std::uint8_t m[4];
    copy_tail_bytes(m, mask + i, r);
    const __m256d wv = _mm256_maskload_pd(w + i, tail_mask(r));
    acc = _mm256_add_pd(acc, _mm256_and_pd(mask4(m), wv));
  }
  return lane_total(acc);
}

void apply_nonlinearity(const double* z, double* out, std::size_t n, const NlParams& p) noexcept {
  const Nl f(p);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, f(_mm256_loadu_pd(z + i)));
  for (; i < n; ++i) out[i] = apply_nl(z[i], p);
}

double swap_error(const SwapSide& plus, const SwapSide& minus, const std::uint8_t* target,
                  std::size_t n, const NlParams& p, double margin) noexcept {
  const Nl f(p);
  const bool soft = margin > 0.0;
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d upper = _mm256_set1_pd(margin);
  const __m256d lower = _mm256_set1_pd(-margin);
  const __m256d half_slope = _mm256_set1_pd(soft ? 0.5 / margin : 0.0);
  __m256d acc = zero;

  auto block = [&](const double* zp_, const double* bp_, const std::uint8_t* rp_,
                   const std::uint8_t* ap_bits, const double* ap_, const double* zm_,
                   const double* bm_, const std::uint8_t* rm_, const std::uint8_t* am_bits,
                   const double* am_, const std::uint8_t* t_, __m256i lanes, bool full) {
    auto load = [&](const double* src) {
      return full ? _mm256_loadu_pd(src) : _mm256_maskload_pd(src, lanes);
    };
    const __m256d zp = _mm256_add_pd(_mm256_sub_pd(load(zp_), bits_as_double(rp_)),
                                     bits_as_double(ap_bits));
    const __m256d zm = _mm256_add_pd(_mm256_sub_pd(load(zm_), bits_as_double(rm_)),
                                     bits_as_double(am_bits));
    const __m256d a_plus = _mm256_add_pd(_mm256_sub_pd(load(ap_), load(bp_)), f(zp));
    const __m256d a_minus = _mm256_add_pd(_mm256_sub_pd(load(am_), load(bm_)), f(zm));
    const __m256d alpha = _mm256_sub_pd(a_plus, a_minus);
    __m256d y;
    if (soft) {
      const __m256d lin = _mm256_add_pd(_mm256_mul_pd(alpha, half_slope), half);
      const __m256d hi = _mm256_cmp_pd(alpha, upper, _CMP_GE_OQ);
      const __m256d lo = _mm256_cmp_pd(alpha, lower, _CMP_LE_OQ);
      y = _mm256_blendv_pd(lin, one, hi);
      y = _mm256_blendv_pd(y, zero, _mm256_andnot_pd(hi, lo));
    } else {
      y = _mm256_and_pd(_mm256_cmp_pd(alpha, zero, _CMP_GT_OQ), one);
    }
    const __m256d err = _mm256_blendv_pd(y, _mm256_sub_pd(one, y), mask4(t_));
    const __m256d keep = full ? _mm256_castsi256_pd(_mm256_set1_epi64x(-1))
                              : _mm256_castsi256_pd(lanes);
    acc = _mm256_add_pd(acc, _mm256_and_pd(err, keep));
  };

  std::size_t i = 0;
  const __m256i all = _mm256_set1_epi64x(-1);
  for (; i + 4 <= n; i += 4) {
    block(plus.z + i, plus.b + i, plus.remove + i, plus.add + i, plus.a + i, minus.z + i,
          minus.b + i, minus.remove + i, minus.add + i, minus.a + i, target + i, all, true);
  }
  if (i < n) {
    const std::size_t r = n - i;
    std::uint8_t rp[4], adp[4], rm[4], adm[4], t[4];
    copy_tail_bytes(rp, plus.remove + i, r);
    copy_tail_bytes(adp, plus.add + i, r);
    copy_tail_bytes(rm, minus.remove + i, r);
    copy_tail_bytes(adm, minus.add + i, r);
    copy_tail_bytes(t, target + i, r);
    block(plus.z + i, plus.b + i, rp, adp, plus.a + i, minus.z + i, minus.b + i, rm, adm,
          minus.a + i, t, tail_mask(r), false);
  }
  return lane_total(acc);
}

void psc_branch_step(double* fall, double* rise, double* acc, double* branch_out, std::size_t n,
                     double decay_fall, double decay_rise, double scale,
                     const NlParams& p) noexcept {
  const Nl f(p);
  const __m256d df = _mm256_set1_pd(decay_fall);
  const __m256d dr = _mm256_set1_pd(decay_rise);
  const __m256d sc = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d fa = _mm256_mul_pd(_mm256_loadu_pd(fall + i), df);
    const __m256d ri = _mm256_mul_pd(_mm256_loadu_pd(rise + i), dr);
    _mm256_storeu_pd(fall + i, fa);
    _mm256_storeu_pd(rise + i, ri);
    const __m256d out = f(_mm256_mul_pd(sc, _mm256_sub_pd(fa, ri)));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), out));
    if (branch_out != nullptr) _mm256_storeu_pd(branch_out + i, out);
  }
  if (i < n) {
    scalar::psc_branch_step(fall + i, rise + i, acc + i,
                            branch_out != nullptr ? branch_out + i : nullptr, n - i, decay_fall,
                            decay_rise, scale, p);
  }
}

void lif_step(double* v, const double* drive, std::uint32_t* count, std::size_t n, double decay,
              double gain, double v_thr) noexcept {
  const __m256d dc = _mm256_set1_pd(decay);
  const __m256d gn = _mm256_set1_pd(gain);
  const __m256d th = _mm256_set1_pd(v_thr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d next = _mm256_add_pd(_mm256_mul_pd(_mm256_loadu_pd(v + i), dc),
                                       _mm256_mul_pd(_mm256_loadu_pd(drive + i), gn));
    const __m256d fired = _mm256_cmp_pd(next, th, _CMP_GE_OQ);
    _mm256_storeu_pd(v + i, _mm256_andnot_pd(fired, next));
    const int bits = _mm256_movemask_pd(fired);
    if (bits != 0) {
      for (int j = 0; j < 4; ++j) {
        if ((bits >> j) & 1) ++count[i + static_cast<std::size_t>(j)];
      }
    }
  }
  if (i < n) scalar::lif_step(v + i, drive + i, count + i, n - i, decay, gain, v_thr);
}

void rectified_difference(const double* plus, const double* minus, double* out_plus,
                          double* out_minus, std::size_t n) noexcept {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_loadu_pd(plus + i);
    const __m256d m = _mm256_loadu_pd(minus + i);
    _mm256_storeu_pd(out_plus + i, _mm256_max_pd(_mm256_sub_pd(p, m), zero));
    _mm256_storeu_pd(out_minus + i, _mm256_max_pd(_mm256_sub_pd(m, p), zero));
  }
  if (i < n) scalar::rectified_difference(plus + i, minus + i, out_plus + i, out_minus + i, n - i);
}

}  // namespace dendrite::kernels::avx2
