#pragma once

#include <Eigen/Eigenvalues>

#include <optional>

#include "rgt/pcl/cloud.hpp"
#include "rgt/pcl/spatial_index.hpp"

namespace rgt::pcl {

inline constexpr std::size_t kDefaultNormalNeighbors = 10;

struct SurfacePatch {
  Vec3 normal;
  double curvature = 0.0;
};

// Flip a PCA normal into the canonical half-space: z >= 0, then x >= 0, then y >= 0.
inline Vec3 canonicalize_normal(Vec3 n) {
  constexpr double kTie = 1e-12;
  bool flip = false;
  if (std::abs(n.z()) > kTie) flip = n.z() < 0.0;
  else if (std::abs(n.x()) > kTie) flip = n.x() < 0.0;
  else flip = n.y() < 0.0;
  return flip ? Vec3(-n) : n;
}

// Normal and surface variation of a neighborhood from its covariance eigenvalues.
inline SurfacePatch fit_patch(const std::vector<Vec3>& points, const std::vector<PointId>& ids) {
  Vec3 mean = Vec3::Zero();
  for (PointId id : ids) mean += points[id];
  mean /= static_cast<double>(ids.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (PointId id : ids) {
    const Vec3 d = points[id] - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(ids.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  Vec3 lambda = solver.eigenvalues().cwiseMax(0.0);  // ascending
  SurfacePatch patch;
  patch.normal = canonicalize_normal(solver.eigenvectors().col(0).normalized());
  const double sum = lambda.sum();
  patch.curvature = sum > 0.0 ? lambda[0] / sum : 0.0;
  return patch;
}

// Normalized coordinates (p - min) / extent per axis; zero-extent axes map to 0.5.
inline std::vector<Vec3> normalize_xyz(const std::vector<Vec3>& positions, const Aabb& box) {
  const Vec3 extent = box.extent();
  std::vector<Vec3> out(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      out[i][a] = extent[a] > 0.0 ? (positions[i][a] - box.min[a]) / extent[a] : 0.5;
    }
  }
  return out;
}

namespace detail {

inline FeatureCloud compute_features_unchecked(RawCloud cloud, std::size_t k_normal, const std::optional<Aabb>& bounds) {
  FeatureCloud out;
  const std::size_t n = cloud.size();
  out.normals.resize(n);
  out.curvatures.resize(n);
  {
    KdTree tree(cloud.positions);
    for (std::size_t i = 0; i < n; ++i) {
      const SurfacePatch patch = fit_patch(cloud.positions, tree.knn(cloud.positions[i], k_normal));
      out.normals[i] = patch.normal;
      out.curvatures[i] = patch.curvature;
    }
  }
  out.normalized_xyz = normalize_xyz(cloud.positions, bounds ? *bounds : Aabb::of(cloud.positions));
  out.raw = std::move(cloud);
  return out;
}

}  // namespace detail

inline FeatureCloud compute_features(RawCloud cloud, std::size_t k_normal = kDefaultNormalNeighbors,
                                     const std::optional<Aabb>& bounds = std::nullopt) {
  cloud.validate();
  if (k_normal < 3) throw ConfigError("compute_features: k_normal must be >= 3");
  if (cloud.size() < k_normal)
    throw ConfigError("compute_features: cloud has " + std::to_string(cloud.size()) + " points, fewer than k_normal=" +
                      std::to_string(k_normal));
  return detail::compute_features_unchecked(std::move(cloud), k_normal, bounds);
}

// Same as compute_features but shrinks the neighborhood to the cloud size, so
// clouds with fewer than k_normal points (down to a single point) still get
// features. Used on arbitrary user input.
inline FeatureCloud compute_features_clamped(RawCloud cloud, std::size_t k_normal = kDefaultNormalNeighbors,
                                             const std::optional<Aabb>& bounds = std::nullopt) {
  cloud.validate();
  const std::size_t k = std::max<std::size_t>(1, std::min(k_normal, cloud.size()));
  return detail::compute_features_unchecked(std::move(cloud), k, bounds);
}

}  // namespace rgt::pcl
