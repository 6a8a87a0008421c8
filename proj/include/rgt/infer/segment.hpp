#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "rgt/pcl/cloud.hpp"
#include "rgt/pcl/spatial_index.hpp"
#include "rgt/random.hpp"
#include "rgt/sim/growth.hpp"

namespace rgt::infer {

using pcl::Label;
using pcl::PointId;
using sim::RadiusGraph;

// Per-point probabilities: add for each neighbor, remove for each inlier.
struct MaskPrediction {
  std::vector<double> add;
  std::vector<double> remove;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual MaskPrediction predict(const pcl::FeatureCloud& cloud, PointId seed, const std::vector<PointId>& inliers,
                                 const std::vector<PointId>& neighbors, Rng& rng) const = 0;
};

// Masks taken from the cloud's ground-truth labels.
class OraclePredictor final : public Predictor {
 public:
  MaskPrediction predict(const pcl::FeatureCloud& cloud, PointId seed, const std::vector<PointId>& inliers,
                         const std::vector<PointId>& neighbors, Rng&) const override {
    if (!cloud.raw.has_labels()) throw ConfigError("oracle predictor needs a labeled cloud");
    MaskPrediction m;
    for (PointId n : neighbors) m.add.push_back(cloud.label(n) == cloud.label(seed) ? 1.0 : 0.0);
    for (PointId i : inliers) m.remove.push_back(cloud.label(i) != cloud.label(seed) ? 1.0 : 0.0);
    return m;
  }
};

class ConstantPredictor final : public Predictor {
 public:
  ConstantPredictor(double add, double remove) : add_(add), remove_(remove) {}
  MaskPrediction predict(const pcl::FeatureCloud&, PointId, const std::vector<PointId>& inliers,
                         const std::vector<PointId>& neighbors, Rng&) const override {
    return {std::vector<double>(neighbors.size(), add_), std::vector<double>(inliers.size(), remove_)};
  }

 private:
  double add_, remove_;
};

class RandomPredictor final : public Predictor {
 public:
  MaskPrediction predict(const pcl::FeatureCloud&, PointId, const std::vector<PointId>& inliers,
                         const std::vector<PointId>& neighbors, Rng& rng) const override {
    MaskPrediction m;
    for (std::size_t i = 0; i < neighbors.size(); ++i) m.add.push_back(uniform(rng));
    for (std::size_t i = 0; i < inliers.size(); ++i) m.remove.push_back(uniform(rng));
    return m;
  }
};

// Adversarial: adds the smallest-id neighbor and ejects every other inlier,
// so the region swaps one point in and out forever.
class OscillatingPredictor final : public Predictor {
 public:
  MaskPrediction predict(const pcl::FeatureCloud&, PointId seed, const std::vector<PointId>& inliers,
                         const std::vector<PointId>& neighbors, Rng&) const override {
    MaskPrediction m{std::vector<double>(neighbors.size(), 0.0), std::vector<double>(inliers.size(), 0.0)};
    if (!m.add.empty()) m.add.front() = 1.0;
    for (std::size_t i = 0; i < inliers.size(); ++i)
      if (inliers[i] != seed) m.remove[i] = 1.0;
    return m;
  }
};

enum class StopReason { kNoNeighbors, kEmptyAdd, kNoExpansion, kMaxIterations };

inline const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::kNoNeighbors: return "no_neighbors";
    case StopReason::kEmptyAdd: return "empty_add";
    case StopReason::kNoExpansion: return "no_expansion";
    case StopReason::kMaxIterations: return "max_iterations";
  }
  return "unknown";
}

struct GrowOptions {
  std::size_t max_iters = 200;
  double threshold = 0.5;  // strictly greater admits; ties exclude
  // Removed points stay out of this region instead of returning to the pool.
  bool permanent_exclusion = false;
};

struct GrowResult {
  std::vector<PointId> inliers;  // ascending
  StopReason reason = StopReason::kNoNeighbors;
  std::size_t iterations = 0;    // predictor calls
  std::vector<std::size_t> sizes;  // region size before the first and after every iteration
};

// Region growth from `seed` over unlabeled points (labeled[i] != 0 marks
// points owned by earlier regions).
inline GrowResult grow_region(const Predictor& model, const pcl::FeatureCloud& cloud, const RadiusGraph& graph,
                              PointId seed, const std::vector<std::uint8_t>& labeled, const GrowOptions& options,
                              Rng& rng) {
  if (seed >= cloud.size()) throw ConfigError("seed id out of range");
  if (labeled[seed]) throw ConfigError("seed " + std::to_string(seed) + " is already labeled");
  if (options.max_iters == 0) throw ConfigError("max_iters must be positive");
  std::vector<std::uint8_t> in_region(cloud.size(), 0), excluded(cloud.size(), 0);
  GrowResult out;
  std::vector<PointId> inliers{seed};
  in_region[seed] = 1;
  out.sizes.push_back(1);

  while (true) {
    const std::vector<PointId> neighbors =
        sim::ring(graph, inliers, [&](PointId j) { return labeled[j] || excluded[j]; });
    if (neighbors.empty()) {
      out.reason = StopReason::kNoNeighbors;
      break;
    }
    const MaskPrediction m = model.predict(cloud, seed, inliers, neighbors, rng);
    ++out.iterations;
    if (m.add.size() != neighbors.size() || m.remove.size() != inliers.size())
      throw ConfigError("predictor returned masks of the wrong size");

    std::vector<PointId> kept;
    for (std::size_t i = 0; i < inliers.size(); ++i) {
      if (inliers[i] != seed && m.remove[i] > options.threshold) {
        in_region[inliers[i]] = 0;
        if (options.permanent_exclusion) excluded[inliers[i]] = 1;
      } else {
        kept.push_back(inliers[i]);
      }
    }
    std::size_t added = 0;
    for (std::size_t i = 0; i < neighbors.size(); ++i)
      if (m.add[i] > options.threshold) {
        kept.push_back(neighbors[i]);
        in_region[neighbors[i]] = 1;
        ++added;
      }
    std::sort(kept.begin(), kept.end());
    inliers = std::move(kept);
    out.sizes.push_back(inliers.size());

    if (added == 0) {
      out.reason = StopReason::kEmptyAdd;
      break;
    }
    const std::size_t h = out.sizes.size();
    if (h >= 3 && out.sizes[h - 1] <= out.sizes[h - 2] && out.sizes[h - 2] <= out.sizes[h - 3]) {
      out.reason = StopReason::kNoExpansion;
      break;
    }
    if (out.iterations >= options.max_iters) {
      out.reason = StopReason::kMaxIterations;
      break;
    }
  }
  out.inliers = std::move(inliers);
  return out;
}

// Unlabeled point with the smallest curvature; ties go to the smaller id.
inline PointId select_seed(const pcl::FeatureCloud& cloud, const std::vector<std::uint8_t>& labeled) {
  PointId best = 0;
  bool found = false;
  for (PointId i = 0; i < cloud.size(); ++i) {
    if (labeled[i]) continue;
    if (!found || cloud.curvatures[i] < cloud.curvatures[best]) best = i;
    found = true;
  }
  if (!found) throw ConfigError("every point is already labeled");
  return best;
}

// Dissolves segments smaller than `min_size` into the label of the nearest
// point of a surviving segment (ties: smaller point id). When nothing
// survives, the largest segment (ties: smaller label) does. Labels are then
// renumbered 0.. in ascending order of their original value.
inline std::vector<Label> merge_small_segments(const std::vector<Label>& labels, const std::vector<pcl::Vec3>& positions,
                                               std::size_t min_size = 8) {
  if (labels.size() != positions.size()) throw ConfigError("labels and positions differ in length");
  std::map<Label, std::size_t> sizes;
  for (Label l : labels) ++sizes[l];
  std::map<Label, bool> survives;
  bool any = false;
  for (auto [l, n] : sizes) any |= (survives[l] = n >= min_size);
  if (!any && !sizes.empty()) {
    Label best = sizes.begin()->first;
    for (auto [l, n] : sizes)
      if (n > sizes[best]) best = l;
    survives[best] = true;
  }

  std::vector<Label> out = labels;
  std::vector<PointId> kept_ids;
  std::vector<pcl::Vec3> kept_pts;
  for (PointId i = 0; i < labels.size(); ++i)
    if (survives[labels[i]]) {
      kept_ids.push_back(i);
      kept_pts.push_back(positions[i]);
    }
  if (kept_ids.size() < labels.size()) {
    const pcl::KdTree tree(kept_pts);
    for (PointId i = 0; i < labels.size(); ++i)
      if (!survives[labels[i]]) out[i] = labels[kept_ids[tree.knn(positions[i], 1).front()]];
  }
  std::map<Label, Label> compact;
  for (Label l : out) compact.emplace(l, 0);
  Label next = 0;
  for (auto& [l, id] : compact) id = next++;
  for (Label& l : out) l = compact[l];
  return out;
}

struct SegmentOptions {
  double r_grow = 0.15;
  GrowOptions grow;
  std::size_t min_segment = 8;
  std::uint64_t seed = 0;
};

struct RegionInfo {
  Label label = 0;
  PointId seed = 0;
  std::size_t size = 0;
  std::size_t iterations = 0;
  StopReason reason = StopReason::kNoNeighbors;
  double seconds = 0.0;
};

struct SegmentationResult {
  std::vector<Label> labels;  // after merging, contiguous from 0
  std::vector<RegionInfo> regions;
  double seconds = 0.0;

  std::map<std::string, std::size_t> reason_histogram() const {
    std::map<std::string, std::size_t> h;
    for (const auto& r : regions) ++h[stop_reason_name(r.reason)];
    return h;
  }
};

inline SegmentationResult segment(const Predictor& model, const pcl::FeatureCloud& cloud, const RadiusGraph& graph,
                                  const SegmentOptions& options) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const std::size_t n = cloud.size();
  if (graph.size() != n) throw ConfigError("radius graph does not match cloud");
  std::vector<PointId> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](PointId a, PointId b) { return cloud.curvatures[a] < cloud.curvatures[b]; });

  SegmentationResult result;
  std::vector<Label> raw(n, -1);
  std::vector<std::uint8_t> labeled(n, 0);
  std::size_t cursor = 0;
  for (Label next = 0;; ++next) {
    while (cursor < n && labeled[order[cursor]]) ++cursor;
    if (cursor == n) break;
    const PointId seed = order[cursor];
    const auto region_start = Clock::now();
    Rng rng = make_rng(options.seed, {0x52454749, static_cast<std::uint64_t>(next)});
    const GrowResult g = grow_region(model, cloud, graph, seed, labeled, options.grow, rng);
    for (PointId p : g.inliers) {
      raw[p] = next;
      labeled[p] = 1;
    }
    result.regions.push_back({next, seed, g.inliers.size(), g.iterations, g.reason,
                              std::chrono::duration<double>(Clock::now() - region_start).count()});
  }
  result.labels = merge_small_segments(raw, cloud.positions(), options.min_segment);
  result.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

inline SegmentationResult segment(const Predictor& model, const pcl::FeatureCloud& cloud, const SegmentOptions& options) {
  const pcl::KdTree index(cloud.positions());
  return segment(model, cloud, sim::build_radius_graph(index, options.r_grow), options);
}

struct ClassicOptions {
  double angle_deg = 10.0;
  double curvature_threshold = 0.05;
  double r_grow = 0.15;
  std::size_t min_segment = 8;
};

// Smoothness-constraint region growing: seeds in ascending curvature; a
// neighbor joins when its normal is within the angle threshold of the
// current point's (unoriented), and is queued as a further seed when its own
// curvature is below the curvature threshold.
inline SegmentationResult classic_region_grow(const pcl::FeatureCloud& cloud, const RadiusGraph& graph,
                                              const ClassicOptions& options) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const std::size_t n = cloud.size();
  if (graph.size() != n) throw ConfigError("radius graph does not match cloud");
  if (!(options.angle_deg >= 0 && options.angle_deg <= 90)) throw ConfigError("angle threshold must be in [0, 90]");
  const double cos_thresh = std::cos(options.angle_deg * 3.14159265358979323846 / 180.0);
  std::vector<PointId> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](PointId a, PointId b) { return cloud.curvatures[a] < cloud.curvatures[b]; });

  SegmentationResult result;
  std::vector<Label> raw(n, -1);
  Label next = 0;
  std::vector<PointId> queue;
  for (PointId s : order) {
    if (raw[s] >= 0) continue;
    const auto region_start = Clock::now();
    raw[s] = next;
    std::size_t size = 1;
    queue.assign(1, s);
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const PointId cur = queue[q];
      for (PointId j : graph.neighbors(cur)) {
        if (raw[j] >= 0) continue;
        if (std::abs(cloud.normals[cur].dot(cloud.normals[j])) < cos_thresh) continue;
        raw[j] = next;
        ++size;
        if (cloud.curvatures[j] < options.curvature_threshold) queue.push_back(j);
      }
    }
    result.regions.push_back({next, s, size, queue.size(), StopReason::kNoNeighbors,
                              std::chrono::duration<double>(Clock::now() - region_start).count()});
    ++next;
  }
  result.labels = merge_small_segments(raw, cloud.positions(), options.min_segment);
  result.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

inline SegmentationResult classic_region_grow(const pcl::FeatureCloud& cloud, const ClassicOptions& options) {
  const pcl::KdTree index(cloud.positions());
  return classic_region_grow(cloud, sim::build_radius_graph(index, options.r_grow), options);
}

}  // namespace rgt::infer
