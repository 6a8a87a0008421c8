#include <gtest/gtest.h>

#include <map>
#include <numbers>
#include <set>

#include "oracles.hpp"
#include "rgt/net/resample.hpp"
#include "rgt/sim/dataset.hpp"

using namespace rgt;
using namespace rgt::sim;
using Mat = nn::Matrix<double>;
using nn::Index;

namespace {

SceneSpec small_spec(std::uint64_t seed) {
  SceneSpec s;
  s.room_x = s.room_y = 2.0;
  s.min_objects = 2;
  s.max_objects = 3;
  s.max_size = 0.45;
  s.density = 250;
  s.seed = seed;
  return s;
}

SceneData small_scene(std::uint64_t seed, double r = 0.15) {
  return prepare_scene(generate_scene(small_spec(seed)), 10, r);
}

std::map<pcl::Label, int> label_counts(const pcl::RawCloud& c) {
  std::map<pcl::Label, int> m;
  for (auto l : *c.labels) ++m[l];
  return m;
}

// Same-label component of `seed` under radius-r adjacency, by repeated scans.
std::set<PointId> flood_oracle(const pcl::FeatureCloud& c, PointId seed, double r) {
  const auto& L = *c.raw.labels;
  std::set<PointId> region{seed};
  std::vector<PointId> stack{seed};
  while (!stack.empty()) {
    const PointId p = stack.back();
    stack.pop_back();
    for (PointId j = 0; j < c.size(); ++j)
      if (L[j] == L[seed] && !region.count(j) && oracle::dist2(c.position(p), c.position(j)) <= r * r) {
        region.insert(j);
        stack.push_back(j);
      }
  }
  return region;
}

// Independent re-simulation: hop distances by scans, same draw order.
TrainingExample resimulate_oracle(const pcl::FeatureCloud& c, PointId seed, std::uint32_t step, double theta, double r,
                                  Rng& rng) {
  const auto& L = *c.raw.labels;
  const std::size_t n = c.size();
  auto near = [&](PointId a, PointId b) { return a != b && oracle::dist2(c.position(a), c.position(b)) <= r * r; };
  std::vector<int> hop(n, -1);
  hop[seed] = 0;
  for (std::uint32_t s = 0; s < step; ++s)
    for (PointId j = 0; j < n; ++j)
      if (hop[j] < 0 && L[j] == L[seed])
        for (PointId i = 0; i < n; ++i)
          if (hop[i] == static_cast<int>(s) && near(i, j)) {
            hop[j] = static_cast<int>(s) + 1;
            break;
          }
  std::vector<bool> in_true(n), inlier(n);
  for (PointId i = 0; i < n; ++i) in_true[i] = hop[i] >= 0;
  for (PointId i = 0; i < n; ++i)
    if (in_true[i]) inlier[i] = i == seed || !(uniform(rng) < theta);
  for (PointId j = 0; j < n; ++j) {
    if (L[j] == L[seed] || in_true[j]) continue;
    bool adjacent = false;
    for (PointId i = 0; i < n && !adjacent; ++i) adjacent = in_true[i] && near(i, j);
    if (adjacent && uniform(rng) < theta) inlier[j] = true;
  }
  TrainingExample ex;
  for (PointId i = 0; i < n; ++i)
    if (inlier[i]) ex.inliers.push_back(i);
  for (PointId j = 0; j < n; ++j) {
    if (inlier[j]) continue;
    for (PointId i : ex.inliers)
      if (near(i, j)) {
        ex.neighbors.push_back(j);
        break;
      }
  }
  return ex;
}

Mat random_rows(Rng& rng, Index n) {
  Mat m(n, pcl::kFeatureDim);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < pcl::kFeatureDim; ++c) m(r, c) = uniform(rng, -1, 1);
    Eigen::Vector3d nrm(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    nrm.normalize();
    for (int a = 0; a < 3; ++a) m(r, pcl::kNormalCol + a) = nrm[a];
  }
  return m;
}

}  // namespace

TEST(Scene, FloorOnlyIsOneInstance) {
  SceneSpec s = small_spec(1);
  s.min_objects = s.max_objects = 0;
  const auto c = generate_scene(s);
  EXPECT_EQ(label_counts(c).size(), 1u);
  EXPECT_EQ(label_counts(c).begin()->first, 0);
  EXPECT_NO_THROW(c.validate());
}

TEST(Scene, ThreeBoxesAndFloor) {
  SceneSpec s = small_spec(2);
  s.min_objects = s.max_objects = 3;
  s.sphere_weight = s.cylinder_weight = 0;
  const auto c = generate_scene(s);
  const auto counts = label_counts(c);
  EXPECT_EQ(counts.size(), 4u);
  for (auto [label, n] : counts) EXPECT_GE(n, 8) << label;
}

TEST(Scene, SeededScenesReproduce) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SceneSpec s = small_spec(seed);
    s.density = 60;
    const auto a = generate_scene(s), b = generate_scene(s);
    ASSERT_EQ(a.positions, b.positions) << seed;
    ASSERT_EQ(*a.labels, *b.labels) << seed;
    ASSERT_EQ(a.colors, b.colors) << seed;
    for (auto [label, n] : label_counts(a)) ASSERT_GE(n, 8) << seed << " label " << label;
  }
}

TEST(Scene, ObjectsKeepClearance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SceneSpec s = small_spec(seed);
    Rng rng = make_rng(seed);
    const auto objs = place_objects(s, rng);
    for (std::size_t i = 0; i < objs.size(); ++i) {
      EXPECT_GE(objs[i].center.x() - objs[i].footprint, s.min_gap);
      EXPECT_LE(objs[i].center.x() + objs[i].footprint, s.room_x - s.min_gap);
      for (std::size_t j = 0; j < i; ++j)
        EXPECT_GT((objs[i].center - objs[j].center).norm(), objs[i].footprint + objs[j].footprint + s.min_gap);
    }
  }
}

TEST(Scene, InfeasibleSpecThrows) {
  SceneSpec s;
  s.room_x = s.room_y = 1.0;
  s.min_objects = s.max_objects = 8;
  s.min_size = s.max_size = 0.5;
  EXPECT_THROW(generate_scene(s), ConfigError);
  s = SceneSpec{};
  s.room_x = -1;
  EXPECT_THROW(generate_scene(s), ConfigError);
}

TEST(Scene, WallsAddFourInstances) {
  SceneSpec s = small_spec(3);
  s.walls = true;
  s.min_objects = s.max_objects = 1;
  EXPECT_EQ(label_counts(generate_scene(s)).size(), 6u);
}

TEST(RadiusGraph, MatchesScan) {
  Rng rng = make_rng(5);
  const auto pts = oracle::random_points(rng, 400);
  const pcl::KdTree tree(pts);
  const RadiusGraph g = build_radius_graph(tree, 0.12);
  for (PointId i = 0; i < pts.size(); ++i) {
    auto want = oracle::radius_scan(pts, pts[i], 0.12);
    want.erase(std::find(want.begin(), want.end(), i));
    const auto got = g.neighbors(i);
    ASSERT_EQ(std::vector<PointId>(got.begin(), got.end()), want);
  }
}

TEST(Growth, FirstStepIsSeedOnly) {
  const SceneData s = small_scene(7);
  const auto& L = *s.cloud.raw.labels;
  Rng rng = make_rng(1);
  for (PointId seed : {0u, 100u, static_cast<PointId>(s.cloud.size() - 1)}) {
    const auto ex = simulate_growth_example(s.cloud, s.graph, seed, 0, 0.0, rng);
    EXPECT_EQ(ex.inliers, std::vector<PointId>{seed});
    auto want = oracle::radius_scan(s.cloud.positions(), s.cloud.position(seed), 0.15);
    want.erase(std::find(want.begin(), want.end(), seed));
    EXPECT_EQ(ex.neighbors, want);
    for (std::size_t i = 0; i < ex.neighbors.size(); ++i)
      EXPECT_EQ(ex.add_truth[i], L[ex.neighbors[i]] == L[seed] ? 1 : 0);
  }
}

TEST(Growth, ConvergedRegionIsFloodComponent) {
  const SceneData s = small_scene(8);
  const auto& L = *s.cloud.raw.labels;
  Rng pick = make_rng(2);
  for (int t = 0; t < 6; ++t) {
    const auto seed = static_cast<PointId>(uniform_index(pick, s.cloud.size()));
    Rng rng = make_rng(3);
    const auto ex = simulate_growth_example(s.cloud, s.graph, seed, 100000, 0.0, rng);
    const auto comp = flood_oracle(s.cloud, seed, 0.15);
    EXPECT_EQ(std::set<PointId>(ex.inliers.begin(), ex.inliers.end()), comp);
    for (auto r : ex.remove_truth) EXPECT_EQ(r, 0);
    for (std::size_t i = 0; i < ex.neighbors.size(); ++i) {
      EXPECT_EQ(ex.add_truth[i], 0);
      EXPECT_NE(L[ex.neighbors[i]], L[seed]);
    }
  }
}

TEST(Growth, NoisyExampleMatchesResimulation) {
  SceneSpec spec = small_spec(9);
  spec.room_x = spec.room_y = 1.4;
  spec.min_objects = spec.max_objects = 2;
  spec.max_size = 0.35;
  spec.density = 150;
  const SceneData s = prepare_scene(generate_scene(spec), 10, 0.15);
  const auto& L = *s.cloud.raw.labels;
  Rng pick = make_rng(4);
  int injected = 0, dropped = 0;
  for (int t = 0; t < 8; ++t) {
    const auto seed = static_cast<PointId>(uniform_index(pick, s.cloud.size()));
    const auto step = static_cast<std::uint32_t>(uniform_index(pick, 6));
    Rng a = make_rng(10, {static_cast<std::uint64_t>(t)}), b = a;
    const auto got = simulate_growth_example(s.cloud, s.graph, seed, step, 0.2, a);
    const auto want = resimulate_oracle(s.cloud, seed, step, 0.2, 0.15, b);
    ASSERT_EQ(got.inliers, want.inliers) << t;
    ASSERT_EQ(got.neighbors, want.neighbors) << t;
    for (std::size_t i = 0; i < got.inliers.size(); ++i) {
      EXPECT_EQ(got.remove_truth[i], L[got.inliers[i]] != L[seed] ? 1 : 0);
      injected += got.remove_truth[i];
    }
    for (std::size_t i = 0; i < got.neighbors.size(); ++i) dropped += got.add_truth[i] && step > 0;
    EXPECT_TRUE(std::binary_search(got.inliers.begin(), got.inliers.end(), seed));
    std::vector<PointId> both;
    std::set_intersection(got.inliers.begin(), got.inliers.end(), got.neighbors.begin(), got.neighbors.end(),
                          std::back_inserter(both));
    EXPECT_TRUE(both.empty());
  }
  EXPECT_GT(injected, 0);
  EXPECT_GT(dropped, 0);
}

TEST(Growth, RejectsBadArguments) {
  const SceneData s = small_scene(10);
  Rng rng = make_rng(1);
  EXPECT_THROW(simulate_growth_example(s.cloud, s.graph, static_cast<PointId>(s.cloud.size()), 1, 0.1, rng),
               ConfigError);
  EXPECT_THROW(simulate_growth_example(s.cloud, s.graph, 0, 1, 0.7, rng), ConfigError);
  pcl::FeatureCloud unlabeled = s.cloud;
  unlabeled.raw.labels.reset();
  EXPECT_THROW(simulate_growth_example(unlabeled, s.graph, 0, 1, 0.1, rng), ConfigError);
}

TEST(Anneal, LinearSchedule) {
  EXPECT_DOUBLE_EQ(anneal_theta(0, 30, 0.2), 0.2);
  EXPECT_NEAR(anneal_theta(29, 30, 0.2), 0.2 / 30, 1e-15);
  EXPECT_NEAR(anneal_theta(15, 30, 0.2), 0.1, 1.0 / 30);
  for (std::size_t e = 1; e < 30; ++e) EXPECT_LT(anneal_theta(e, 30, 0.2), anneal_theta(e - 1, 30, 0.2));
  EXPECT_THROW(anneal_theta(30, 30, 0.2), ConfigError);
}

TEST(Augment, IdentityDraw) {
  Rng rng = make_rng(1);
  Mat m = random_rows(rng, 20);
  const Mat before = m;
  apply_augmentation(Augmentation{}, m);
  EXPECT_LT((m - before).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Augment, HalfTurnEqualsDoubleMirror) {
  Rng rng = make_rng(2);
  Mat a = random_rows(rng, 20), b = a;
  apply_augmentation(Augmentation{false, false, std::numbers::pi}, a);
  apply_augmentation(Augmentation{true, true, 0.0}, b);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
  Mat c = random_rows(rng, 5), d = c;
  apply_augmentation(Augmentation{false, false, std::numbers::pi}, c);
  apply_augmentation(Augmentation{false, false, std::numbers::pi}, c);
  EXPECT_LT((c - d).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Augment, IsometryOnRandomDraws) {
  Rng rng = make_rng(3);
  for (int t = 0; t < 50; ++t) {
    Mat m = random_rows(rng, 15);
    const Mat before = m;
    apply_augmentation(draw_augmentation(rng), m);
    for (Index i = 0; i < m.rows(); ++i) {
      EXPECT_NEAR(m.row(i).segment(pcl::kNormalCol, 3).norm(), 1.0, 1e-12);
      EXPECT_EQ(m.row(i).segment(pcl::kRgbCol, 3), before.row(i).segment(pcl::kRgbCol, 3));
      EXPECT_EQ(m(i, pcl::kCurvatureCol), before(i, pcl::kCurvatureCol));
      EXPECT_EQ(m(i, pcl::kXyzCol + 2), before(i, pcl::kXyzCol + 2));
      for (Index j = 0; j < i; ++j) {
        const double d0 = (before.row(i).segment(0, 3) - before.row(j).segment(0, 3)).norm();
        const double d1 = (m.row(i).segment(0, 3) - m.row(j).segment(0, 3)).norm();
        EXPECT_NEAR(d0, d1, 1e-9);
        const double n0 = (before.row(i).segment(pcl::kNormXyzCol, 3) - before.row(j).segment(pcl::kNormXyzCol, 3)).norm();
        const double n1 = (m.row(i).segment(pcl::kNormXyzCol, 3) - m.row(j).segment(pcl::kNormXyzCol, 3)).norm();
        EXPECT_NEAR(n0, n1, 1e-9);
      }
    }
  }
}

TEST(Resample, ExactSizeIsPermutation) {
  Rng rng = make_rng(1);
  std::vector<PointId> ids(16);
  std::iota(ids.begin(), ids.end(), 100);
  auto rows = net::resample_set(ids, 16, rng);
  std::sort(rows.begin(), rows.end());
  EXPECT_EQ(rows, ids);
}

TEST(Resample, SingleIdRepeats) {
  Rng rng = make_rng(2);
  EXPECT_EQ(net::resample_set({7}, 4, rng), (std::vector<PointId>{7, 7, 7, 7}));
}

TEST(Resample, SmallSetCoversEveryId) {
  Rng rng = make_rng(3);
  const std::vector<PointId> ids{3, 9, 11, 40, 41};
  const auto rows = net::resample_set(ids, 32, rng);
  ASSERT_EQ(rows.size(), 32u);
  for (PointId id : ids) EXPECT_NE(std::find(rows.begin(), rows.end(), id), rows.end());
  for (PointId r : rows) EXPECT_TRUE(std::binary_search(ids.begin(), ids.end(), r));
}

TEST(Resample, LargeSetDeterministicSubset) {
  std::vector<PointId> ids(1000);
  std::iota(ids.begin(), ids.end(), 0);
  Rng a = make_rng(4), b = make_rng(4);
  const auto ra = net::resample_set(ids, 512, a), rb = net::resample_set(ids, 512, b);
  EXPECT_EQ(ra, rb);
  EXPECT_EQ(std::set<PointId>(ra.begin(), ra.end()).size(), 512u);
  const auto agg = net::aggregate_rows(ids, ra, nn::RowVec<double>(nn::RowVec<double>::Constant(512, 0.37)), -1.0);
  int sampled = 0;
  for (double v : agg) {
    if (v != -1.0) {
      EXPECT_EQ(v, 0.37);
      ++sampled;
    }
  }
  EXPECT_EQ(sampled, 512);
  Rng c = make_rng(4);
  EXPECT_THROW(net::resample_set({}, 4, c), ConfigError);
}

TEST(Resample, AggregationAveragesDuplicates) {
  const std::vector<PointId> ids{5, 6, 8};
  const std::vector<PointId> rows{5, 6, 5, 5};
  nn::RowVec<double> v(4);
  v << 0.2, 0.9, 0.5, 0.8;
  const auto agg = net::aggregate_rows(ids, rows, v);
  EXPECT_NEAR(agg[0], 0.5, 1e-15);
  EXPECT_EQ(agg[1], 0.9);
  EXPECT_EQ(agg[2], 0.0);
}

TEST(Resample, GatherCentersXyz) {
  const SceneData s = small_scene(11);
  const std::vector<PointId> rows{3, 1};
  const Mat m = net::gather_features<double>(s.cloud, rows, s.cloud.position(3));
  EXPECT_EQ(m.row(0).segment(0, 3).norm(), 0.0);
  const auto f = s.cloud.feature_row(1);
  for (int c = 3; c < pcl::kFeatureDim; ++c) EXPECT_EQ(m(1, c), f[c]);
  EXPECT_NEAR(m(1, 0), f[0] - s.cloud.position(3).x(), 1e-15);
}

TEST(Dataset, RoundTripAndParallelDeterminism) {
  DatasetConfig c;
  c.scene = small_spec(0);
  c.scene.density = 120;
  c.scenes = 3;
  c.examples_per_scene = 7;
  const auto scenes1 = generate_scenes(c, 1);
  const auto scenes3 = generate_scenes(c, 3);
  const std::string a = encode_dataset(generate_dataset(c, scenes1, 1));
  const std::string b = encode_dataset(generate_dataset(c, scenes3, 3));
  EXPECT_EQ(a, b);
  const Dataset ds = decode_dataset(a);
  EXPECT_EQ(ds.records.size(), 21u);
  EXPECT_EQ(encode_dataset(ds), a);
  const DatasetConfig back = config_from_manifest(ds.manifest);
  EXPECT_EQ(back.scene_seed(2), c.scene_seed(2));
  EXPECT_EQ(generate_scene(back.scene_spec(1)).positions, scenes1[1].cloud.raw.positions);
  for (const auto& r : ds.records) {
    EXPECT_EQ(r.example.inliers.size(), r.example.remove_truth.size());
    EXPECT_EQ(r.example.neighbors.size(), r.example.add_truth.size());
  }
}

TEST(Dataset, CorruptInputRejected) {
  DatasetConfig c;
  c.scene = small_spec(0);
  c.scene.density = 80;
  c.scenes = 1;
  c.examples_per_scene = 2;
  const std::string bytes = encode_dataset(generate_dataset(c, generate_scenes(c)));
  EXPECT_THROW(decode_dataset(bytes.substr(0, bytes.size() - 3)), ParseError);
  EXPECT_THROW(decode_dataset("nonsense"), ParseError);
  EXPECT_THROW(decode_dataset(bytes + "x"), ParseError);
}
