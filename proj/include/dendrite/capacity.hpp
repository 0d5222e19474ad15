#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace dendrite {

using BigInt = boost::multiprecision::cpp_int;

struct CapacityValue {
  /// Natural log of the count.
  double ln = 0.0;
  /// The count itself when its estimated size is within the bit budget.
  std::optional<BigInt> exact;
};

/// Default bit budget for exact counts.
inline constexpr std::size_t kExactBits = 1u << 16;

/// Number of size-r multisets from n items, C(n + r - 1, r).
BigInt multiset_count(const BigInt& n, std::size_t r);

/// ln C(n + r - 1, r) with n given as ln n. Stable for n much larger than r.
double ln_multiset_count(double ln_n, std::size_t r);

/// Natural log of a positive big integer, correct to double precision.
double ln_big(const BigInt& x);

/// Distinct L-neurons: s synapses drawn from d lines with replacement.
/// Throws std::invalid_argument unless d, s >= 1.
CapacityValue linear_capacity(std::size_t d, std::size_t s, std::size_t max_bits = kExactBits);

/// Distinct NL-neurons: m branches drawn with replacement from the
/// f = C(k + d - 1, k) distinct branches. Throws std::invalid_argument
/// unless d, m, k >= 1.
CapacityValue nonlinear_capacity(std::size_t d, std::size_t m, std::size_t k,
                                 std::size_t max_bits = kExactBits);

struct CapacityPoint {
  std::size_t m = 0;
  std::size_t k = 0;
  double ln_capacity = 0.0;
};

/// Every m that divides s, or the given ones (each must divide s).
std::vector<CapacityPoint> capacity_sweep(std::size_t d, std::size_t s,
                                          std::span<const std::size_t> ms = {});

/// Fixed m, varying k.
std::vector<CapacityPoint> capacity_vs_k(std::size_t d, std::size_t m,
                                         std::span<const std::size_t> ks);

/// Point with the largest ln-capacity; the first one on ties.
CapacityPoint best_point(std::span<const CapacityPoint> points);

// CSV: header "m,k,ln_capacity".
void write_capacity_csv(std::ostream& out, std::span<const CapacityPoint> points);

}  // namespace dendrite
