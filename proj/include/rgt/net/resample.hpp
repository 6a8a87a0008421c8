#pragma once

#include <algorithm>
#include <unordered_map>
#include <vector>

#include "rgt/nn/tensor.hpp"
#include "rgt/pcl/cloud.hpp"
#include "rgt/random.hpp"

namespace rgt::net {

using pcl::PointId;

// Row -> source id mapping of a fixed-size set. With at least S ids, S
// distinct ids are drawn; otherwise every id appears once and the remainder
// is drawn with replacement. Rows are shuffled either way.
inline std::vector<PointId> resample_set(const std::vector<PointId>& ids, std::size_t set_size, Rng& rng) {
  if (ids.empty()) throw ConfigError("cannot resample an empty id set");
  if (set_size == 0) throw ConfigError("set size must be positive");
  std::vector<PointId> rows;
  if (ids.size() >= set_size) {
    rows = ids;
    // Partial Fisher-Yates: the first S slots become a uniform sample.
    for (std::size_t i = 0; i < set_size; ++i) std::swap(rows[i], rows[i + uniform_index(rng, rows.size() - i)]);
    rows.resize(set_size);
    return rows;
  }
  rows = ids;
  while (rows.size() < set_size) rows.push_back(ids[uniform_index(rng, ids.size())]);
  std::shuffle(rows.begin(), rows.end(), rng);
  return rows;
}

// Feature rows of `rows`, with the xyz columns expressed relative to `origin`.
template <class T>
nn::Matrix<T> gather_features(const pcl::FeatureCloud& cloud, const std::vector<PointId>& rows, const pcl::Vec3& origin) {
  nn::Matrix<T> out(static_cast<Eigen::Index>(rows.size()), pcl::kFeatureDim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto f = cloud.feature_row(rows[r]);
    for (int c = 0; c < pcl::kFeatureDim; ++c) out(static_cast<Eigen::Index>(r), c) = static_cast<T>(f[c]);
    for (int a = 0; a < 3; ++a) out(static_cast<Eigen::Index>(r), pcl::kXyzCol + a) -= static_cast<T>(origin[a]);
  }
  return out;
}

// Mean of the row values belonging to each id of `ids`; ids that were not
// sampled get `missing`.
template <class T>
std::vector<double> aggregate_rows(const std::vector<PointId>& ids, const std::vector<PointId>& rows,
                                   const nn::RowVec<T>& values, double missing = 0.0) {
  if (static_cast<Eigen::Index>(rows.size()) != values.size()) throw ConfigError("row/value count mismatch");
  std::unordered_map<PointId, std::pair<double, int>> acc;
  acc.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    // Running mean, exact when every duplicate carries the same value.
    auto& [mean, n] = acc[rows[r]];
    ++n;
    mean += (static_cast<double>(values[static_cast<Eigen::Index>(r)]) - mean) / n;
  }
  std::vector<double> out(ids.size(), missing);
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (auto it = acc.find(ids[i]); it != acc.end()) out[i] = it->second.first;
  return out;
}

}  // namespace rgt::net
