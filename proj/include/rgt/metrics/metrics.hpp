#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "rgt/error.hpp"

namespace rgt::metrics {

using Label = std::int64_t;

// n_ij = |prediction cluster i ∩ truth cluster j|, clusters indexed by
// ascending label value.
struct ContingencyTable {
  std::vector<Label> pred_labels;
  std::vector<Label> true_labels;
  std::vector<std::vector<std::int64_t>> counts;  // [pred][true]
  std::vector<std::int64_t> row_sums;
  std::vector<std::int64_t> col_sums;
  std::int64_t n = 0;

  std::size_t rows() const { return row_sums.size(); }
  std::size_t cols() const { return col_sums.size(); }

  // True when the two labelings induce the same partition.
  bool identical_partitions() const {
    if (rows() != cols()) return false;
    for (std::size_t i = 0; i < rows(); ++i) {
      int nonzero = 0;
      for (std::int64_t v : counts[i]) nonzero += v != 0;
      if (nonzero != 1) return false;
    }
    return true;  // each row hits one column and rows == cols, so it is a bijection
  }
};

namespace metrics_detail {

template <class L>
std::vector<std::size_t> dense(const std::vector<L>& labels, std::vector<Label>& values) {
  std::map<Label, std::size_t> index;
  for (const L& l : labels) index.emplace(static_cast<Label>(l), 0);
  std::size_t k = 0;
  for (auto& [value, id] : index) {
    id = k++;
    values.push_back(value);
  }
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = index[static_cast<Label>(labels[i])];
  return out;
}

inline double choose2(std::int64_t v) { return 0.5 * static_cast<double>(v) * static_cast<double>(v - 1); }

inline double entropy(const std::vector<std::int64_t>& sums, std::int64_t n) {
  double h = 0.0;
  for (std::int64_t s : sums)
    if (s > 0) {
      const double p = static_cast<double>(s) / static_cast<double>(n);
      h -= p * std::log(p);
    }
  return h;
}

}  // namespace metrics_detail

template <class L>
ContingencyTable contingency(const std::vector<L>& pred, const std::vector<L>& truth) {
  if (pred.size() != truth.size())
    throw ConfigError("label vectors differ in length: " + std::to_string(pred.size()) + " vs " +
                      std::to_string(truth.size()));
  ContingencyTable t;
  const auto p = metrics_detail::dense(pred, t.pred_labels);
  const auto q = metrics_detail::dense(truth, t.true_labels);
  t.counts.assign(t.pred_labels.size(), std::vector<std::int64_t>(t.true_labels.size(), 0));
  t.row_sums.assign(t.pred_labels.size(), 0);
  t.col_sums.assign(t.true_labels.size(), 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    ++t.counts[p[i]][q[i]];
    ++t.row_sums[p[i]];
    ++t.col_sums[q[i]];
  }
  t.n = static_cast<std::int64_t>(pred.size());
  return t;
}

inline double adjusted_rand_index(const ContingencyTable& t) {
  using metrics_detail::choose2;
  if (t.n < 2) throw ConfigError("adjusted rand index needs at least 2 points");
  if (t.identical_partitions()) return 1.0;
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& row : t.counts)
    for (std::int64_t v : row) sum_ij += choose2(v);
  for (std::int64_t a : t.row_sums) sum_a += choose2(a);
  for (std::int64_t b : t.col_sums) sum_b += choose2(b);
  const double expected = sum_a * sum_b / choose2(t.n);
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  if (denom == 0.0) return 0.0;
  return (sum_ij - expected) / denom;
}

template <class L>
double adjusted_rand_index(const std::vector<L>& pred, const std::vector<L>& truth) {
  return adjusted_rand_index(contingency(pred, truth));
}

inline double mutual_information(const ContingencyTable& t) {
  double mi = 0.0;
  const double n = static_cast<double>(t.n);
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) {
      const auto v = t.counts[i][j];
      if (v == 0) continue;
      const double nij = static_cast<double>(v);
      mi += nij / n * std::log(n * nij / (static_cast<double>(t.row_sums[i]) * static_cast<double>(t.col_sums[j])));
    }
  return std::max(0.0, mi);
}

// E[MI] under the hypergeometric model (fixed marginals, random pairing).
inline double expected_mutual_information(const ContingencyTable& t) {
  const std::int64_t N = t.n;
  const double n = static_cast<double>(N);
  const double lg_n = std::lgamma(n + 1);
  double emi = 0.0;
  for (std::int64_t a : t.row_sums) {
    for (std::int64_t b : t.col_sums) {
      const double da = static_cast<double>(a), db = static_cast<double>(b);
      const double base = std::lgamma(da + 1) + std::lgamma(db + 1) + std::lgamma(n - da + 1) +
                          std::lgamma(n - db + 1) - lg_n;
      for (std::int64_t k = std::max<std::int64_t>(1, a + b - N); k <= std::min(a, b); ++k) {
        const double dk = static_cast<double>(k);
        const double log_p = base - std::lgamma(dk + 1) - std::lgamma(da - dk + 1) - std::lgamma(db - dk + 1) -
                             std::lgamma(n - da - db + dk + 1);
        emi += dk / n * std::log(n * dk / (da * db)) * std::exp(log_p);
      }
    }
  }
  return emi;
}

struct InformationScores {
  double nmi = 0.0;
  double ami = 0.0;
  double mi = 0.0;
};

// Arithmetic-mean normalization for both scores.
inline InformationScores mutual_info_scores(const ContingencyTable& t) {
  InformationScores s;
  if (t.n == 0) throw ConfigError("mutual information of empty labelings");
  if (t.identical_partitions()) {
    s.nmi = s.ami = 1.0;
    s.mi = metrics_detail::entropy(t.row_sums, t.n);
    return s;
  }
  s.mi = mutual_information(t);
  const double h_pred = metrics_detail::entropy(t.row_sums, t.n);
  const double h_true = metrics_detail::entropy(t.col_sums, t.n);
  const double mean_h = 0.5 * (h_pred + h_true);
  if (h_pred == 0.0 || h_true == 0.0) return {0.0, 0.0, s.mi};
  s.nmi = s.mi / mean_h;
  const double emi = expected_mutual_information(t);
  const double denom = mean_h - emi;
  s.ami = denom == 0.0 ? 0.0 : (s.mi - emi) / denom;
  return s;
}

template <class L>
InformationScores mutual_info_scores(const std::vector<L>& pred, const std::vector<L>& truth) {
  return mutual_info_scores(contingency(pred, truth));
}

struct InstanceScores {
  double precision = 0.0;
  double recall = 0.0;
  double miou = 0.0;
  std::size_t matched = 0;
  // (pred label, true label, IoU) in matching order.
  std::vector<std::tuple<Label, Label, double>> matches;
};

// Greedy one-to-one matching by descending IoU (ties: smaller prediction
// label, then smaller true label), accepting pairs with IoU >= threshold.
inline InstanceScores instance_prf_miou(const ContingencyTable& t, double iou_threshold = 0.5) {
  struct Pair {
    double iou;
    std::size_t p, q;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) {
      const auto inter = t.counts[i][j];
      if (inter == 0) continue;
      const double iou = static_cast<double>(inter) / static_cast<double>(t.row_sums[i] + t.col_sums[j] - inter);
      if (iou >= iou_threshold) pairs.push_back({iou, i, j});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.p != b.p) return a.p < b.p;
    return a.q < b.q;
  });
  std::vector<bool> pred_used(t.rows()), true_used(t.cols());
  InstanceScores s;
  double iou_sum = 0.0;
  for (const Pair& pr : pairs) {
    if (pred_used[pr.p] || true_used[pr.q]) continue;
    pred_used[pr.p] = true_used[pr.q] = true;
    ++s.matched;
    iou_sum += pr.iou;
    s.matches.emplace_back(t.pred_labels[pr.p], t.true_labels[pr.q], pr.iou);
  }
  if (t.rows() > 0) s.precision = static_cast<double>(s.matched) / static_cast<double>(t.rows());
  if (t.cols() > 0) {
    s.recall = static_cast<double>(s.matched) / static_cast<double>(t.cols());
    s.miou = iou_sum / static_cast<double>(t.cols());
  }
  return s;
}

template <class L>
InstanceScores instance_prf_miou(const std::vector<L>& pred, const std::vector<L>& truth, double iou_threshold = 0.5) {
  return instance_prf_miou(contingency(pred, truth), iou_threshold);
}

struct Report {
  double ari = 0.0;
  double ami = 0.0;
  double nmi = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double miou = 0.0;
};

template <class L>
Report evaluate(const std::vector<L>& pred, const std::vector<L>& truth, double iou_threshold = 0.5) {
  const ContingencyTable t = contingency(pred, truth);
  const InformationScores info = mutual_info_scores(t);
  const InstanceScores inst = instance_prf_miou(t, iou_threshold);
  return {adjusted_rand_index(t), info.ami, info.nmi, inst.precision, inst.recall, inst.miou};
}

}  // namespace rgt::metrics
