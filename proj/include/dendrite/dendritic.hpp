#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "dendrite/kernels.hpp"
#include "dendrite/patterns.hpp"

namespace dendrite {

class Rng;

enum class ModelKind { Linear, Nonlinear };

/// Polynomial branch function with threshold, saturation and leak.
struct NonlinearityConfig {
  int exponent = 2;
  double x_thr = 2.0;
  double b_sat = std::numeric_limits<double>::infinity();
  double z_leak = 0.0;

  static double default_saturation(double x_thr) { return 10.0 * x_thr; }

  /// Throws std::invalid_argument on exponent < 1, x_thr <= 0, b_sat <= 0 or z_leak < 0.
  void validate() const;
  /// Kernel parameters for b (leak = false) or b_leak (leak = true).
  kernels::NlParams params(ModelKind kind, bool leak) const;
};

/// min(z^exponent / x_thr, b_sat).
double b(double z, const NonlinearityConfig& cfg);
/// 0 for z <= z_leak, else min((z - z_leak)^exponent / x_thr, b_sat).
double b_leak(double z, const NonlinearityConfig& cfg);

/// Heaviside comparator with g(0) = 0.
inline int g(double alpha) noexcept { return alpha > 0.0 ? 1 : 0; }
/// Piecewise-linear margin output in [0, 1]. Throws std::invalid_argument for delta <= 0.
double g_margin(double alpha, double delta);

/// m x k table of afferent indices, row-major by branch.
struct Neuron {
  std::size_t m = 0;
  std::size_t k = 0;
  std::vector<std::uint32_t> afferent;

  Neuron() = default;
  Neuron(std::size_t m_, std::size_t k_) : m(m_), k(k_), afferent(m_ * k_, 0) {}

  std::size_t synapses() const noexcept { return m * k; }
  std::uint32_t& at(std::size_t branch, std::size_t slot) { return afferent[branch * k + slot]; }
  std::uint32_t at(std::size_t branch, std::size_t slot) const {
    return afferent[branch * k + slot];
  }
  std::span<const std::uint32_t> branch(std::size_t j) const {
    return {afferent.data() + j * k, k};
  }
  bool operator==(const Neuron&) const = default;
};

/// The wiring of the (+) and (-) neurons over d input lines.
struct Connectome {
  Neuron plus;
  Neuron minus;
  std::size_t d = 0;

  /// Every slot draws an afferent uniformly (with replacement) from the d lines.
  static Connectome random(std::size_t m, std::size_t k, std::size_t d, Rng& rng);

  std::size_t m() const noexcept { return plus.m; }
  std::size_t k() const noexcept { return plus.k; }
  /// Throws std::invalid_argument if shapes differ or an index is out of range.
  void validate() const;
  bool operator==(const Connectome&) const = default;
};

/// z_j: number of active inputs over the branch slots (repeated contacts count twice).
double branch_activation(std::span<const std::uint32_t> branch, const BinaryPattern& x);

/// Somatic activation: Linear sums z_j; Nonlinear sums b(z_j) or b_leak(z_j).
double neuron_activation(const Neuron& n, const BinaryPattern& x, const NonlinearityConfig& cfg,
                         ModelKind kind, bool leak = false);

/// a+ - a-.
double decision_value(const BinaryPattern& x, const Connectome& c, const NonlinearityConfig& cfg,
                      ModelKind kind, bool leak = false);

/// g(a+ - a-).
int classify(const BinaryPattern& x, const Connectome& c, const NonlinearityConfig& cfg,
             ModelKind kind, bool leak = false);

// CSV: comment line "# m=<m>,k=<k>,d=<d>", header "neuron,branch,slot,afferent",
// one row per synapse with neuron in {+,-}.
void write_connectome_csv(std::ostream& out, const Connectome& c);
Connectome read_connectome_csv(std::istream& in);

}  // namespace dendrite
