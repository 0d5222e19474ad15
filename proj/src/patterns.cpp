#include "dendrite/patterns.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dendrite/csv.hpp"
#include "dendrite/rng.hpp"

namespace dendrite {

namespace {

constexpr std::uint64_t kFeatureStream = 0x5046;  // "PF"
constexpr std::uint64_t kLabelStream = 0x504C;    // "PL"

void require_ascending(std::span<const double> boundaries) {
  for (std::size_t i = 1; i < boundaries.size(); ++i) {
    if (!(boundaries[i - 1] < boundaries[i])) {
      throw std::invalid_argument("receptive-field boundaries must be strictly ascending");
    }
  }
}

std::size_t locate(double value, std::span<const double> boundaries) {
  // First boundary b with value <= b.
  return static_cast<std::size_t>(
      std::lower_bound(boundaries.begin(), boundaries.end(), value) - boundaries.begin());
}

}  // namespace

std::size_t BinaryPattern::active_count() const noexcept {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::size_t SpikePattern::total_spikes() const noexcept {
  std::size_t n = 0;
  for (const auto& s : spikes) n += s.size();
  return n;
}

void TaskSpec::validate() const {
  if (d_o == 0) throw std::invalid_argument("task: d_o must be >= 1");
  if (n_rf == 0) throw std::invalid_argument("task: n_rf must be >= 1");
  if (patterns < 2) throw std::invalid_argument("task: P must be >= 2");
}

std::size_t rf_index(double value, std::span<const double> boundaries) {
  require_ascending(boundaries);
  return locate(value, boundaries);
}

std::vector<std::uint8_t> rf_encode(double value, std::span<const double> boundaries) {
  std::vector<std::uint8_t> out(boundaries.size() + 1, 0);
  out[rf_index(value, boundaries)] = 1;
  return out;
}

std::vector<double> gaussian_rf_boundaries(std::size_t n_rf) {
  if (n_rf == 0) throw std::invalid_argument("n_rf must be >= 1");
  const boost::math::normal_distribution<double> unit;
  std::vector<double> b(n_rf - 1);
  for (std::size_t i = 1; i < n_rf; ++i) {
    b[i - 1] = boost::math::quantile(unit, static_cast<double>(i) / static_cast<double>(n_rf));
  }
  return b;
}

std::vector<BinaryPattern> generate_random_task(const TaskSpec& spec) {
  spec.validate();
  const std::vector<double> bounds = gaussian_rf_boundaries(spec.n_rf);
  std::vector<BinaryPattern> out(spec.patterns);
  for (std::size_t p = 0; p < spec.patterns; ++p) {
    BinaryPattern& pat = out[p];
    pat.bits.assign(spec.d(), 0);
    Rng rng(derive_seed(spec.seed, kFeatureStream, p));
    for (std::size_t g = 0; g < spec.d_o; ++g) {
      pat.bits[g * spec.n_rf + locate(rng.normal(), bounds)] = 1;
    }
  }
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(derive_seed(spec.seed, kLabelStream, attempt));
    std::size_t ones = 0;
    for (auto& pat : out) {
      pat.label = rng.bernoulli(0.5) ? 1 : 0;
      ones += pat.label;
    }
    if (ones != 0 && ones != out.size()) break;
  }
  return out;
}

SpikePattern to_rate_spikes(const BinaryPattern& p, double f_high_hz, double f_low_hz,
                            double duration_ms, std::uint64_t seed) {
  if (!(f_low_hz >= 0.0) || !(f_high_hz > f_low_hz)) {
    throw std::invalid_argument("rate code requires f_high > f_low >= 0");
  }
  SpikePattern sp;
  sp.duration = duration_ms;
  sp.spikes.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double rate_per_ms = (p.bits[i] != 0 ? f_high_hz : f_low_hz) * 1e-3;
    if (rate_per_ms <= 0.0) continue;
    Rng rng(derive_seed(seed, i));
    auto& train = sp.spikes[i];
    double t = rng.exponential(rate_per_ms);
    while (t <= duration_ms) {
      if (train.empty() || t > train.back()) train.push_back(t);
      t += rng.exponential(rate_per_ms);
    }
  }
  return sp;
}

SpikePattern to_single_spikes(const BinaryPattern& p, double t_syn_ms, double jitter_ms,
                              double duration_ms, std::uint64_t seed) {
  if (jitter_ms < 0.0 || t_syn_ms - 0.5 * jitter_ms < 0.0 ||
      t_syn_ms + 0.5 * jitter_ms > duration_ms) {
    throw std::invalid_argument("single-spike window lies outside the stimulus window");
  }
  SpikePattern sp;
  sp.duration = duration_ms;
  sp.spikes.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.bits[i] == 0) continue;
    if (jitter_ms == 0.0) {
      sp.spikes[i].push_back(t_syn_ms);
    } else {
      Rng rng(derive_seed(seed, i));
      sp.spikes[i].push_back(t_syn_ms + jitter_ms * (rng.uniform() - 0.5));
    }
  }
  return sp;
}

PatternMatrix::PatternMatrix(std::span<const BinaryPattern> patterns)
    : patterns_(patterns.size()), dim_(patterns.empty() ? 0 : patterns.front().size()) {
  columns_.assign(patterns_ * dim_, 0);
  labels_.resize(patterns_);
  for (std::size_t p = 0; p < patterns_; ++p) {
    if (patterns[p].size() != dim_) throw std::invalid_argument("patterns differ in dimension");
    labels_[p] = patterns[p].label;
    for (std::size_t a = 0; a < dim_; ++a) columns_[a * patterns_ + p] = patterns[p].bits[a];
  }
}

std::size_t PatternMatrix::positives() const noexcept {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), std::uint8_t{1}));
}

void write_patterns_csv(std::ostream& out, std::span<const BinaryPattern> patterns) {
  const std::size_t d = patterns.empty() ? 0 : patterns.front().size();
  out << "label";
  for (std::size_t i = 0; i < d; ++i) out << ",x" << i;
  out << '\n';
  for (const auto& p : patterns) {
    out << static_cast<int>(p.label);
    for (auto b : p.bits) out << ',' << static_cast<int>(b);
    out << '\n';
  }
}

std::vector<BinaryPattern> read_patterns_csv(std::istream& in) {
  std::vector<BinaryPattern> out;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("patterns csv: missing header");
  const std::size_t d = csv::split(line).size() - 1;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != d + 1) {
      throw std::runtime_error("patterns csv: row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(d + 1));
    }
    BinaryPattern p;
    p.label = static_cast<std::uint8_t>(csv::to_bit(cells[0], row));
    p.bits.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      p.bits[i] = static_cast<std::uint8_t>(csv::to_bit(cells[i + 1], row));
    }
    out.push_back(std::move(p));
  }
  return out;
}

void write_spikes_csv(std::ostream& out, std::span<const SpikePattern> patterns) {
  out << "pattern,afferent,time_ms\n";
  for (std::size_t p = 0; p < patterns.size(); ++p) {
    const auto& sp = patterns[p];
    for (std::size_t a = 0; a < sp.spikes.size(); ++a) {
      for (double t : sp.spikes[a]) out << p << ',' << a << ',' << csv::fmt(t) << '\n';
    }
  }
}

}  // namespace dendrite
