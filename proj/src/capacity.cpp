#include "dendrite/capacity.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "dendrite/csv.hpp"

namespace dendrite {

namespace {

double ln_binomial_multiset(std::size_t n, std::size_t r) {
  const double nn = static_cast<double>(n), rr = static_cast<double>(r);
  return std::lgamma(nn + rr) - std::lgamma(rr + 1.0) - std::lgamma(nn);
}

void require_positive(std::size_t v, const char* what) {
  if (v == 0) throw std::invalid_argument(std::string("capacity: ") + what + " must be >= 1");
}

}  // namespace

BigInt multiset_count(const BigInt& n, std::size_t r) {
  BigInt out = 1;
  for (std::size_t i = 1; i <= r; ++i) {
    // Product of i consecutive integers is divisible by i!.
    out *= n + (i - 1);
    out /= i;
  }
  return out;
}

double ln_multiset_count(double ln_n, std::size_t r) {
  const double inv_n = std::exp(-ln_n);
  double sum = 0.0;
  for (std::size_t i = 1; i <= r; ++i) {
    const double j = static_cast<double>(i - 1);
    sum += ln_n + std::log1p(j * inv_n) - std::log(static_cast<double>(i));
  }
  return sum;
}

double ln_big(const BigInt& x) {
  if (x <= 0) throw std::invalid_argument("ln_big: argument must be positive");
  const std::size_t top = boost::multiprecision::msb(x);
  if (top < 960) return std::log(x.convert_to<double>());
  const std::size_t shift = top - 62;
  std::uint64_t head = 0;
  for (std::size_t b = top + 1; b-- > shift;) {
    head = (head << 1) | (boost::multiprecision::bit_test(x, b) ? 1u : 0u);
  }
  return std::log(static_cast<double>(head)) + static_cast<double>(shift) * std::numbers::ln2;
}

CapacityValue linear_capacity(std::size_t d, std::size_t s, std::size_t max_bits) {
  require_positive(d, "d");
  require_positive(s, "s");
  CapacityValue v;
  v.ln = ln_binomial_multiset(d, s);
  if (v.ln / std::numbers::ln2 <= static_cast<double>(max_bits)) {
    v.exact = multiset_count(BigInt(d), s);
  }
  return v;
}

CapacityValue nonlinear_capacity(std::size_t d, std::size_t m, std::size_t k,
                                 std::size_t max_bits) {
  require_positive(d, "d");
  require_positive(m, "m");
  require_positive(k, "k");
  CapacityValue v;
  const double ln_f = ln_binomial_multiset(d, k);
  v.ln = ln_multiset_count(ln_f, m);
  if (v.ln / std::numbers::ln2 <= static_cast<double>(max_bits)) {
    v.exact = multiset_count(multiset_count(BigInt(d), k), m);
  }
  return v;
}

std::vector<CapacityPoint> capacity_sweep(std::size_t d, std::size_t s,
                                          std::span<const std::size_t> ms) {
  require_positive(s, "s");
  std::vector<std::size_t> grid(ms.begin(), ms.end());
  if (grid.empty()) {
    for (std::size_t m = 1; m <= s; ++m)
      if (s % m == 0) grid.push_back(m);
  }
  std::vector<CapacityPoint> out;
  for (std::size_t m : grid) {
    require_positive(m, "m");
    if (s % m != 0) throw std::invalid_argument("capacity_sweep: m must divide s");
    out.push_back({m, s / m, nonlinear_capacity(d, m, s / m, 0).ln});
  }
  return out;
}

std::vector<CapacityPoint> capacity_vs_k(std::size_t d, std::size_t m,
                                         std::span<const std::size_t> ks) {
  std::vector<CapacityPoint> out;
  for (std::size_t k : ks) out.push_back({m, k, nonlinear_capacity(d, m, k, 0).ln});
  return out;
}

CapacityPoint best_point(std::span<const CapacityPoint> points) {
  if (points.empty()) throw std::invalid_argument("best_point: no points");
  CapacityPoint best = points.front();
  for (const auto& p : points)
    if (p.ln_capacity > best.ln_capacity) best = p;
  return best;
}

void write_capacity_csv(std::ostream& out, std::span<const CapacityPoint> points) {
  out << "m,k,ln_capacity\n";
  for (const auto& p : points) out << p.m << ',' << p.k << ',' << csv::fmt(p.ln_capacity) << '\n';
}

}  // namespace dendrite
