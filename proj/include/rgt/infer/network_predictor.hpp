#pragma once

#include <limits>

#include "rgt/infer/segment.hpp"
#include "rgt/net/region_network.hpp"
#include "rgt/net/resample.hpp"

namespace rgt::infer {

// Resamples both sets to the network's set size, runs the network on
// seed-centered features, and averages duplicate rows per id. Ids that were
// not sampled receive `missing`.
template <class T>
class NetworkPredictor final : public Predictor {
 public:
  explicit NetworkPredictor(const net::RegionNetwork<T>& network, double missing = 0.0)
      : network_(network), missing_(missing) {}

  MaskPrediction predict(const pcl::FeatureCloud& cloud, PointId seed, const std::vector<PointId>& inliers,
                         const std::vector<PointId>& neighbors, Rng& rng) const override {
    const auto s = static_cast<std::size_t>(network_.config().set_size);
    const std::vector<PointId> in_rows = net::resample_set(inliers, s, rng);
    const std::vector<PointId> nb_rows = net::resample_set(neighbors, s, rng);
    const pcl::Vec3& origin = cloud.position(seed);
    const auto out = network_.forward(net::gather_features<T>(cloud, in_rows, origin),
                                      net::gather_features<T>(cloud, nb_rows, origin));
    return {net::aggregate_rows(neighbors, nb_rows, out.add, missing_),
            net::aggregate_rows(inliers, in_rows, out.remove, missing_)};
  }

  static constexpr double kUnsampled = std::numeric_limits<double>::quiet_NaN();

 private:
  const net::RegionNetwork<T>& network_;
  double missing_;
};

}  // namespace rgt::infer
