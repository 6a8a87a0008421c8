#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rgt/error.hpp"

namespace rgt::pcl {

using Vec3 = Eigen::Vector3d;
using PointId = std::uint32_t;
using Label = std::int32_t;

// Per-point feature layout: xyz(3) rgb(3) normal(3) curvature(1) normalized xyz(3).
inline constexpr int kFeatureDim = 13;
inline constexpr int kXyzCol = 0;
inline constexpr int kRgbCol = 3;
inline constexpr int kNormalCol = 6;
inline constexpr int kCurvatureCol = 9;
inline constexpr int kNormXyzCol = 10;

struct RawCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;  // rgb in [0,1]
  std::optional<std::vector<Label>> labels;

  std::size_t size() const { return positions.size(); }
  bool has_labels() const { return labels.has_value(); }

  // Throws ConfigError when the structural invariants are violated.
  void validate() const {
    if (positions.empty()) throw ConfigError("cloud has no points");
    if (colors.size() != positions.size())
      throw ConfigError("colors length " + std::to_string(colors.size()) + " != points " +
                        std::to_string(positions.size()));
    if (labels && labels->size() != positions.size())
      throw ConfigError("labels length " + std::to_string(labels->size()) + " != points " +
                        std::to_string(positions.size()));
    for (std::size_t i = 0; i < positions.size(); ++i) {
      if (!positions[i].allFinite()) throw ConfigError("non-finite position at point " + std::to_string(i));
      for (int c = 0; c < 3; ++c) {
        double v = colors[i][c];
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("color out of [0,1] at point " + std::to_string(i));
      }
    }
    if (labels) {
      for (std::size_t i = 0; i < labels->size(); ++i)
        if ((*labels)[i] < 0) throw ConfigError("negative label at point " + std::to_string(i));
    }
  }
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extent() const { return max - min; }

  static Aabb of(const std::vector<Vec3>& points) {
    Aabb box{points.front(), points.front()};
    for (const Vec3& p : points) {
      box.min = box.min.cwiseMin(p);
      box.max = box.max.cwiseMax(p);
    }
    return box;
  }
};

struct FeatureCloud {
  RawCloud raw;
  std::vector<Vec3> normals;
  std::vector<double> curvatures;
  std::vector<Vec3> normalized_xyz;

  std::size_t size() const { return raw.size(); }
  const Vec3& position(std::size_t i) const { return raw.positions[i]; }
  const std::vector<Vec3>& positions() const { return raw.positions; }

  std::array<double, kFeatureDim> feature_row(std::size_t i) const {
    const Vec3& p = raw.positions[i];
    const Vec3& c = raw.colors[i];
    const Vec3& n = normals[i];
    const Vec3& q = normalized_xyz[i];
    return {p.x(), p.y(), p.z(), c.x(), c.y(), c.z(), n.x(), n.y(), n.z(), curvatures[i], q.x(), q.y(), q.z()};
  }

  Label label(std::size_t i) const { return (*raw.labels)[i]; }
};

}  // namespace rgt::pcl
