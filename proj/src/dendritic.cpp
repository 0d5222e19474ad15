#include "dendrite/dendritic.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "dendrite/csv.hpp"
#include "dendrite/rng.hpp"

namespace dendrite {

void NonlinearityConfig::validate() const {
  if (exponent < 1) throw std::invalid_argument("nonlinearity: exponent must be >= 1");
  if (!(x_thr > 0.0)) throw std::invalid_argument("nonlinearity: x_thr must be > 0");
  if (!(b_sat > 0.0)) throw std::invalid_argument("nonlinearity: b_sat must be > 0");
  if (!(z_leak >= 0.0)) throw std::invalid_argument("nonlinearity: z_leak must be >= 0");
}

kernels::NlParams NonlinearityConfig::params(ModelKind kind, bool leak) const {
  kernels::NlParams p;
  p.linear = kind == ModelKind::Linear;
  p.exponent = exponent;
  p.inv_thr = 1.0 / x_thr;
  p.sat = b_sat;
  p.leak = leak ? z_leak : 0.0;
  return p;
}

double b(double z, const NonlinearityConfig& cfg) {
  return kernels::apply_nl(z, cfg.params(ModelKind::Nonlinear, false));
}

double b_leak(double z, const NonlinearityConfig& cfg) {
  return kernels::apply_nl(z, cfg.params(ModelKind::Nonlinear, true));
}

double g_margin(double alpha, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("g_margin: delta must be > 0");
  if (alpha >= delta) return 1.0;
  if (alpha <= -delta) return 0.0;
  return alpha * (0.5 / delta) + 0.5;
}

Connectome Connectome::random(std::size_t m, std::size_t k, std::size_t d, Rng& rng) {
  if (m == 0 || k == 0 || d == 0) throw std::invalid_argument("connectome: m, k, d must be >= 1");
  Connectome c;
  c.d = d;
  c.plus = Neuron(m, k);
  c.minus = Neuron(m, k);
  for (auto& a : c.plus.afferent) a = static_cast<std::uint32_t>(rng.below(d));
  for (auto& a : c.minus.afferent) a = static_cast<std::uint32_t>(rng.below(d));
  return c;
}

void Connectome::validate() const {
  if (plus.m != minus.m || plus.k != minus.k) {
    throw std::invalid_argument("connectome: neurons differ in shape");
  }
  for (const Neuron* n : {&plus, &minus}) {
    if (n->afferent.size() != n->m * n->k) throw std::invalid_argument("connectome: bad table size");
    for (auto a : n->afferent) {
      if (a >= d) throw std::invalid_argument("connectome: afferent index out of range");
    }
  }
}

double branch_activation(std::span<const std::uint32_t> branch, const BinaryPattern& x) {
  double z = 0.0;
  for (auto a : branch) z += x.bits[a];
  return z;
}

double neuron_activation(const Neuron& n, const BinaryPattern& x, const NonlinearityConfig& cfg,
                         ModelKind kind, bool leak) {
  const kernels::NlParams p = cfg.params(kind, leak);
  double a = 0.0;
  for (std::size_t j = 0; j < n.m; ++j) a += kernels::apply_nl(branch_activation(n.branch(j), x), p);
  return a;
}

double decision_value(const BinaryPattern& x, const Connectome& c, const NonlinearityConfig& cfg,
                      ModelKind kind, bool leak) {
  return neuron_activation(c.plus, x, cfg, kind, leak) -
         neuron_activation(c.minus, x, cfg, kind, leak);
}

int classify(const BinaryPattern& x, const Connectome& c, const NonlinearityConfig& cfg,
             ModelKind kind, bool leak) {
  return g(decision_value(x, c, cfg, kind, leak));
}

void write_connectome_csv(std::ostream& out, const Connectome& c) {
  out << "# m=" << c.m() << ",k=" << c.k() << ",d=" << c.d << '\n';
  out << "neuron,branch,slot,afferent\n";
  for (const auto& [sign, n] : {std::pair<char, const Neuron*>{'+', &c.plus}, {'-', &c.minus}}) {
    for (std::size_t j = 0; j < n->m; ++j) {
      for (std::size_t i = 0; i < n->k; ++i) {
        out << sign << ',' << j << ',' << i << ',' << n->at(j, i) << '\n';
      }
    }
  }
}

Connectome read_connectome_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw std::runtime_error("connectome csv: missing '# m=..,k=..,d=..' line");
  }
  std::size_t m = 0, k = 0, d = 0;
  for (const auto& kv : csv::split(line.substr(2))) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::runtime_error("connectome csv: bad shape field");
    const auto key = kv.substr(0, eq);
    const auto value = static_cast<std::size_t>(csv::to_int(kv.substr(eq + 1), 1));
    if (key == "m") m = value;
    else if (key == "k") k = value;
    else if (key == "d") d = value;
  }
  if (m == 0 || k == 0 || d == 0) throw std::runtime_error("connectome csv: incomplete shape");
  if (!std::getline(in, line)) throw std::runtime_error("connectome csv: missing header");
  Connectome c;
  c.d = d;
  c.plus = Neuron(m, k);
  c.minus = Neuron(m, k);
  std::size_t row = 2, seen = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != 4) throw std::runtime_error("connectome csv: row " + std::to_string(row));
    Neuron& n = cells[0] == "+" ? c.plus : c.minus;
    if (cells[0] != "+" && cells[0] != "-") {
      throw std::runtime_error("connectome csv: neuron must be + or -, row " + std::to_string(row));
    }
    const auto j = static_cast<std::size_t>(csv::to_int(cells[1], row));
    const auto i = static_cast<std::size_t>(csv::to_int(cells[2], row));
    if (j >= m || i >= k) throw std::runtime_error("connectome csv: index out of shape");
    n.at(j, i) = static_cast<std::uint32_t>(csv::to_int(cells[3], row));
    ++seen;
  }
  if (seen != 2 * m * k) throw std::runtime_error("connectome csv: wrong synapse count");
  c.validate();
  return c;
}

}  // namespace dendrite
