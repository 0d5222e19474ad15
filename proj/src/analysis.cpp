#include "dendrite/analysis.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "dendrite/csv.hpp"

namespace dendrite {

std::size_t CorrelationRanking::rank(std::uint32_t p, std::uint32_t q) const {
  if (p > q) std::swap(p, q);
  if (q >= d) throw std::out_of_range("CorrelationRanking::rank: index out of range");
  return rank_of_[triangle_index(p, q, d)];
}

CorrelationRanking input_correlation_ranking(std::span<const BinaryPattern> patterns) {
  if (patterns.empty()) throw std::invalid_argument("input_correlation_ranking: no patterns");
  const std::size_t d = patterns.front().size();
  const std::size_t n = d * (d + 1) / 2;
  std::vector<double> sum[2] = {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  std::size_t count[2] = {0, 0};
  std::vector<std::uint32_t> on;
  for (const auto& x : patterns) {
    if (x.size() != d) throw std::invalid_argument("input_correlation_ranking: widths differ");
    const int cls = x.label ? 0 : 1;
    ++count[cls];
    on.clear();
    for (std::size_t a = 0; a < d; ++a)
      if (x.bits[a]) on.push_back(static_cast<std::uint32_t>(a));
    for (std::size_t i = 0; i < on.size(); ++i)
      for (std::size_t j = i; j < on.size(); ++j) sum[cls][triangle_index(on[i], on[j], d)] += 1.0;
  }
  if (count[0] == 0 || count[1] == 0) {
    throw std::invalid_argument("input_correlation_ranking: a class is empty");
  }

  CorrelationRanking r;
  r.d = d;
  std::vector<double> value(n);
  for (std::size_t t = 0; t < n; ++t) {
    value[t] = sum[0][t] / static_cast<double>(count[0]) - sum[1][t] / static_cast<double>(count[1]);
  }
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  // Triangle index order is (row, col) lexicographic.
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return value[a] > value[b]; });
  std::vector<CorrelationRanking::Pair> pair_of(n);
  for (std::uint32_t p = 0; p < d; ++p)
    for (std::uint32_t q = p; q < d; ++q) pair_of[triangle_index(p, q, d)] = {p, q};
  r.pairs.reserve(n);
  r.values.reserve(n);
  r.rank_of_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    r.pairs.push_back(pair_of[idx[k]]);
    r.values.push_back(value[idx[k]]);
    r.rank_of_[idx[k]] = static_cast<std::uint32_t>(k);
  }
  return r;
}

WeightProjection weight_correlation_projection(const Neuron& n, std::size_t d,
                                               const CorrelationRanking& order) {
  if (order.d != d) throw std::invalid_argument("weight_correlation_projection: d mismatch");
  WeightProjection w;
  const std::size_t ranks = order.pairs.size();
  w.histogram.assign(ranks, 0.0);
  std::vector<double> weight(d);
  for (std::size_t j = 0; j < n.m; ++j) {
    std::fill(weight.begin(), weight.end(), 0.0);
    for (std::size_t i = 0; i < n.k; ++i) {
      const std::uint32_t a = n.at(j, i);
      if (a >= d) throw std::invalid_argument("weight_correlation_projection: afferent >= d");
      weight[a] += 1.0;
    }
    std::vector<double> row(ranks);
    for (std::size_t r = 0; r < ranks; ++r) {
      const auto [p, q] = order.pairs[r];
      row[r] = weight[p] * weight[q];
      w.histogram[r] += row[r];
    }
    w.branches.push_back(std::move(row));
  }
  return w;
}

double concentration(std::span<const double> histogram) {
  double mass = 0.0, moment = 0.0;
  for (std::size_t r = 0; r < histogram.size(); ++r) {
    mass += histogram[r];
    moment += static_cast<double>(r) * histogram[r];
  }
  if (!(mass > 0.0)) throw std::invalid_argument("concentration: empty histogram");
  return moment / mass;
}

std::vector<double> coarse_histogram(std::span<const double> histogram, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("coarse_histogram: bins must be >= 1");
  const std::size_t width = (histogram.size() + bins - 1) / bins;
  std::vector<double> out(bins, 0.0);
  for (std::size_t r = 0; r < histogram.size(); ++r) out[r / std::max<std::size_t>(width, 1)] += histogram[r];
  return out;
}

void write_ranking_csv(std::ostream& out, const CorrelationRanking& order) {
  out << "rank,row,col,r_value\n";
  for (std::size_t r = 0; r < order.pairs.size(); ++r) {
    out << r << ',' << order.pairs[r].row << ',' << order.pairs[r].col << ','
        << csv::fmt(order.values[r]) << '\n';
  }
}

void write_projection_csv(std::ostream& out, const WeightProjection& w) {
  out << "branch,rank,weight_product\n";
  for (std::size_t j = 0; j < w.branches.size(); ++j) {
    for (std::size_t r = 0; r < w.branches[j].size(); ++r) {
      if (w.branches[j][r] != 0.0) out << j << ',' << r << ',' << csv::fmt(w.branches[j][r]) << '\n';
    }
  }
  for (std::size_t r = 0; r < w.histogram.size(); ++r) {
    out << -1 << ',' << r << ',' << csv::fmt(w.histogram[r]) << '\n';
  }
}

}  // namespace dendrite
