#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace dendrite {

/// A d-dimensional 0/1 input vector with its class bit.
struct BinaryPattern {
  std::vector<std::uint8_t> bits;
  std::uint8_t label = 0;

  std::size_t size() const noexcept { return bits.size(); }
  std::size_t active_count() const noexcept;
};

/// Spike times (ms) per afferent over the stimulus window [0, duration].
struct SpikePattern {
  std::vector<std::vector<double>> spikes;
  double duration = 0.0;

  std::size_t afferents() const noexcept { return spikes.size(); }
  std::size_t total_spikes() const noexcept;
};

/// Random classification task: d_o Gaussian dimensions, each split into n_rf
/// equiprobable receptive fields.
struct TaskSpec {
  std::size_t d_o = 40;
  std::size_t n_rf = 10;
  std::size_t patterns = 1000;
  std::uint64_t seed = 1;

  std::size_t d() const noexcept { return d_o * n_rf; }
  /// Throws std::invalid_argument on an unusable spec.
  void validate() const;
};

/// Patterns with labels drawn by fair coin flips (neither class left empty).
std::vector<BinaryPattern> generate_random_task(const TaskSpec& spec);

/// Index of the receptive field holding `value`. Intervals are
/// (-inf, b0], (b0, b1], ..., (b_last, +inf): a value on a boundary belongs
/// to the lower interval. Throws std::invalid_argument unless strictly ascending.
std::size_t rf_index(double value, std::span<const double> boundaries);

/// One-hot vector of length boundaries.size() + 1.
std::vector<std::uint8_t> rf_encode(double value, std::span<const double> boundaries);

/// Equiprobable boundaries of the standard normal: Phi^-1(i / n_rf), i = 1..n_rf-1.
std::vector<double> gaussian_rf_boundaries(std::size_t n_rf);

/// Independent homogeneous Poisson train per afferent at f_high (bit set) or
/// f_low (bit clear), rates in Hz, window in ms. Afferent i draws from the
/// stream derived from (seed, i).
SpikePattern to_rate_spikes(const BinaryPattern& p, double f_high_hz, double f_low_hz,
                            double duration_ms, std::uint64_t seed);

/// One spike uniform in [t_syn - jitter/2, t_syn + jitter/2] per set bit, none
/// otherwise. Throws std::invalid_argument if the window leaves [0, duration].
SpikePattern to_single_spikes(const BinaryPattern& p, double t_syn_ms, double jitter_ms,
                              double duration_ms, std::uint64_t seed);

/// Column-major view of a pattern set used by the trainers: column(a) holds
/// bit a of every pattern, so per-afferent sums over patterns are contiguous.
class PatternMatrix {
 public:
  PatternMatrix() = default;
  explicit PatternMatrix(std::span<const BinaryPattern> patterns);

  std::size_t patterns() const noexcept { return patterns_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const std::uint8_t> column(std::size_t afferent) const noexcept {
    return {columns_.data() + afferent * patterns_, patterns_};
  }
  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  std::uint8_t bit(std::size_t pattern, std::size_t afferent) const noexcept {
    return columns_[afferent * patterns_ + pattern];
  }
  std::size_t positives() const noexcept;

 private:
  std::size_t patterns_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::uint8_t> columns_;
  std::vector<std::uint8_t> labels_;
};

// CSV: header "label,x0,...,x{d-1}", then one row per pattern.
void write_patterns_csv(std::ostream& out, std::span<const BinaryPattern> patterns);
std::vector<BinaryPattern> read_patterns_csv(std::istream& in);

// CSV: header "pattern,afferent,time_ms", one row per spike.
void write_spikes_csv(std::ostream& out, std::span<const SpikePattern> patterns);

}  // namespace dendrite
