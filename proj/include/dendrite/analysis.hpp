#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dendrite/dendritic.hpp"
#include "dendrite/patterns.hpp"

namespace dendrite {

/// Upper-triangle-plus-diagonal entries of R, ordered by descending value.
struct CorrelationRanking {
  struct Pair {
    std::uint32_t row = 0;
    std::uint32_t col = 0;
  };
  std::size_t d = 0;
  /// row <= col; rank r is pairs[r].
  std::vector<Pair> pairs;
  std::vector<double> values;

  /// Rank of the entry (p, q) in either order.
  std::size_t rank(std::uint32_t p, std::uint32_t q) const;

 private:
  friend CorrelationRanking input_correlation_ranking(std::span<const BinaryPattern>);
  std::vector<std::uint32_t> rank_of_;  // upper-triangle index -> rank
};

/// R = mean x x^T over class (+) minus the same over class (-). Ties keep
/// (row, col) order. Throws std::invalid_argument when a class is empty or
/// pattern widths differ.
CorrelationRanking input_correlation_ranking(std::span<const BinaryPattern> patterns);

/// Index of (p, q), p <= q, in the row-major upper triangle of a d x d matrix.
inline std::size_t triangle_index(std::size_t p, std::size_t q, std::size_t d) noexcept {
  return p * d - p * (p - 1) / 2 + (q - p);
}

struct WeightProjection {
  /// [branch][rank]: entry of W_j W_j^T at the rank's (row, col).
  std::vector<std::vector<double>> branches;
  /// Per-rank sum over branches.
  std::vector<double> histogram;
};

/// W_j counts the synapses of branch j per afferent. Throws
/// std::invalid_argument when the ranking was built for another d.
WeightProjection weight_correlation_projection(const Neuron& n, std::size_t d,
                                               const CorrelationRanking& order);

/// Mass-weighted mean rank (0-based) of a histogram; lower means the mass
/// sits on the correlations of class (+).
double concentration(std::span<const double> histogram);

/// Sums the histogram into `bins` equal rank ranges (the last may be shorter).
std::vector<double> coarse_histogram(std::span<const double> histogram, std::size_t bins);

// CSV: header "rank,row,col,r_value".
void write_ranking_csv(std::ostream& out, const CorrelationRanking& order);
// CSV: header "branch,rank,weight_product"; branch -1 rows hold the histogram.
void write_projection_csv(std::ostream& out, const WeightProjection& w);

}  // namespace dendrite
