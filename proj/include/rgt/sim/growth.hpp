#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "rgt/nn/tensor.hpp"
#include "rgt/pcl/cloud.hpp"
#include "rgt/pcl/spatial_index.hpp"
#include "rgt/random.hpp"

namespace rgt::sim {

using pcl::PointId;

// Fixed-radius adjacency in CSR form. A point is not its own neighbor.
struct RadiusGraph {
  double radius = 0.0;
  std::vector<std::uint32_t> offsets{0};
  std::vector<PointId> ids;

  std::size_t size() const { return offsets.size() - 1; }
  std::span<const PointId> neighbors(PointId i) const {
    return {ids.data() + offsets[i], ids.data() + offsets[i + 1]};
  }
};

inline RadiusGraph build_radius_graph(const pcl::KdTree& index, double radius) {
  if (!(radius > 0)) throw ConfigError("growth radius must be positive");
  RadiusGraph g;
  g.radius = radius;
  const auto& pts = index.points();
  g.offsets.reserve(pts.size() + 1);
  for (PointId i = 0; i < pts.size(); ++i) {
    for (PointId j : index.radius(pts[i], radius))
      if (j != i) g.ids.push_back(j);
    g.offsets.push_back(static_cast<std::uint32_t>(g.ids.size()));
  }
  return g;
}

struct TrainingExample {
  PointId seed = 0;
  std::uint32_t step = 0;
  double theta = 0.0;
  std::vector<PointId> inliers;             // ascending
  std::vector<PointId> neighbors;           // ascending, disjoint from inliers
  std::vector<std::uint8_t> add_truth;      // per neighbor
  std::vector<std::uint8_t> remove_truth;   // per inlier
};

// Points within the graph radius of any member, excluding members and any
// point for which `skip(id)` holds. Ascending.
template <class Skip>
std::vector<PointId> ring(const RadiusGraph& graph, const std::vector<PointId>& members, Skip&& skip) {
  std::vector<std::uint8_t> mark(graph.size(), 0);
  for (PointId m : members) mark[m] = 1;
  std::vector<PointId> out;
  for (PointId m : members)
    for (PointId j : graph.neighbors(m))
      if (!mark[j] && !skip(j)) {
        mark[j] = 2;
        out.push_back(j);
      }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<PointId> ring(const RadiusGraph& graph, const std::vector<PointId>& members) {
  return ring(graph, members, [](PointId) { return false; });
}

// Region after `step` rounds of admitting every same-label point within the
// graph radius of the current region. Ascending.
inline std::vector<PointId> true_region(const RadiusGraph& graph, const std::vector<pcl::Label>& labels, PointId seed,
                                        std::uint32_t step) {
  std::vector<std::uint8_t> in(graph.size(), 0);
  std::vector<PointId> region{seed}, frontier{seed}, next;
  in[seed] = 1;
  for (std::uint32_t s = 0; s < step && !frontier.empty(); ++s) {
    next.clear();
    for (PointId f : frontier)
      for (PointId j : graph.neighbors(f))
        if (!in[j] && labels[j] == labels[seed]) {
          in[j] = 1;
          next.push_back(j);
        }
    region.insert(region.end(), next.begin(), next.end());
    std::swap(frontier, next);
  }
  std::sort(region.begin(), region.end());
  return region;
}

// Corrupted growth state. Draw order: one Bernoulli(theta) per true inlier
// other than the seed in ascending id (drop), then one per wrong-label point
// adjacent to the true region in ascending id (inject).
inline TrainingExample simulate_growth_example(const pcl::FeatureCloud& cloud, const RadiusGraph& graph, PointId seed,
                                               std::uint32_t step, double theta, Rng& rng) {
  if (!cloud.raw.has_labels()) throw ConfigError("growth simulation needs a labeled cloud");
  if (seed >= cloud.size()) throw ConfigError("seed id " + std::to_string(seed) + " out of range");
  if (graph.size() != cloud.size()) throw ConfigError("radius graph does not match cloud");
  if (!(theta >= 0.0 && theta <= 0.5)) throw ConfigError("theta must lie in [0, 0.5]");
  const auto& labels = *cloud.raw.labels;
  const pcl::Label target = labels[seed];

  const std::vector<PointId> region = true_region(graph, labels, seed, step);
  const std::vector<PointId> boundary =
      ring(graph, region, [&](PointId j) { return labels[j] == target; });

  TrainingExample ex;
  ex.seed = seed;
  ex.step = step;
  ex.theta = theta;
  for (PointId p : region)
    if (p == seed || !bernoulli(rng, theta)) ex.inliers.push_back(p);
  for (PointId p : boundary)
    if (bernoulli(rng, theta)) ex.inliers.push_back(p);
  std::sort(ex.inliers.begin(), ex.inliers.end());

  ex.neighbors = ring(graph, ex.inliers);
  for (PointId p : ex.inliers) ex.remove_truth.push_back(labels[p] != target ? 1 : 0);
  for (PointId p : ex.neighbors) ex.add_truth.push_back(labels[p] == target ? 1 : 0);
  return ex;
}

inline TrainingExample simulate_growth_example(const pcl::FeatureCloud& cloud, PointId seed, std::uint32_t step,
                                               double theta, double r_grow, Rng& rng) {
  const pcl::KdTree index(cloud.positions());
  return simulate_growth_example(cloud, build_radius_graph(index, r_grow), seed, step, theta, rng);
}

// Linear decay from theta_max at epoch 0.
inline double anneal_theta(std::size_t epoch, std::size_t total_epochs, double theta_max) {
  if (total_epochs == 0 || epoch >= total_epochs)
    throw ConfigError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total_epochs) + ")");
  const double t = theta_max * (1.0 - static_cast<double>(epoch) / static_cast<double>(total_epochs));
  return std::max(0.0, t);
}

struct Augmentation {
  bool flip_x = false;
  bool flip_y = false;
  double angle = 0.0;  // about +z, applied after the flips
};

inline Augmentation draw_augmentation(Rng& rng) {
  Augmentation a;
  a.flip_x = bernoulli(rng, 0.5);
  a.flip_y = bernoulli(rng, 0.5);
  a.angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  return a;
}

// Applies to feature rows in place. xyz and normals transform about the
// origin, normalized xyz about (0.5, 0.5); rgb and curvature are untouched.
template <class T>
void apply_augmentation(const Augmentation& a, nn::Matrix<T>& rows) {
  nn::check_cols(rows.cols(), pcl::kFeatureDim, "augment");
  const double c = std::cos(a.angle), s = std::sin(a.angle);
  auto transform = [&](Eigen::Index col, double center) {
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      double x = static_cast<double>(rows(r, col)) - center, y = static_cast<double>(rows(r, col + 1)) - center;
      if (a.flip_x) x = -x;
      if (a.flip_y) y = -y;
      rows(r, col) = static_cast<T>(c * x - s * y + center);
      rows(r, col + 1) = static_cast<T>(s * x + c * y + center);
    }
  };
  transform(pcl::kXyzCol, 0.0);
  transform(pcl::kNormalCol, 0.0);
  transform(pcl::kNormXyzCol, 0.5);
}

}  // namespace rgt::sim
