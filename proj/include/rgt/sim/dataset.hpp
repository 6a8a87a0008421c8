#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "rgt/io/binary.hpp"
#include "rgt/parallel.hpp"
#include "rgt/pcl/features.hpp"
#include "rgt/sim/growth.hpp"
#include "rgt/sim/scene.hpp"

namespace rgt::sim {

// A featureized scene with its spatial structures.
struct SceneData {
  pcl::FeatureCloud cloud;
  std::unique_ptr<pcl::KdTree> index;
  RadiusGraph graph;
};

inline SceneData prepare_scene(pcl::RawCloud raw, std::size_t k_normal, double r_grow) {
  SceneData s;
  s.cloud = pcl::compute_features_clamped(std::move(raw), k_normal);
  s.index = std::make_unique<pcl::KdTree>(s.cloud.positions());
  s.graph = build_radius_graph(*s.index, r_grow);
  return s;
}

struct DatasetConfig {
  SceneSpec scene;  // template; each scene overrides the seed
  std::size_t scenes = 50;
  std::size_t examples_per_scene = 100;
  double r_grow = 0.15;
  double theta = 0.2;
  std::uint32_t max_step = 10;
  std::size_t k_normal = pcl::kDefaultNormalNeighbors;
  std::uint64_t seed = 1;

  void validate() const {
    scene.validate();
    if (scenes == 0) throw ConfigError("scene count must be positive");
    if (examples_per_scene == 0) throw ConfigError("examples per scene must be positive");
    if (!(r_grow > 0)) throw ConfigError("r_grow must be positive");
    if (!(theta >= 0 && theta <= 0.5)) throw ConfigError("theta must lie in [0, 0.5]");
    if (k_normal < 3) throw ConfigError("k_normal must be >= 3");
  }

  std::uint64_t scene_seed(std::size_t s) const {
    Rng rng = make_rng(seed, {0x5343454e45, s});
    return rng();
  }

  SceneSpec scene_spec(std::size_t s) const {
    SceneSpec spec = scene;
    spec.seed = scene_seed(s);
    return spec;
  }
};

struct ExampleRecord {
  std::uint32_t scene = 0;
  TrainingExample example;
};

struct Dataset {
  nlohmann::json manifest;
  std::vector<ExampleRecord> records;
};

// Everything needed to regenerate the scenes and examples.
inline nlohmann::json make_manifest(const DatasetConfig& c) {
  nlohmann::json seeds = nlohmann::json::array();
  for (std::size_t s = 0; s < c.scenes; ++s) seeds.push_back(c.scene_seed(s));
  return {{"format", "rgt-dataset"},
          {"version", kVersion},
          {"scene_spec", c.scene},
          {"scene_seeds", seeds},
          {"examples_per_scene", c.examples_per_scene},
          {"r_grow", c.r_grow},
          {"theta", c.theta},
          {"max_step", c.max_step},
          {"k_normal", c.k_normal},
          {"seed", c.seed}};
}

inline std::vector<SceneData> generate_scenes(const DatasetConfig& c, std::size_t jobs = 1) {
  c.validate();
  std::vector<SceneData> scenes(c.scenes);
  parallel_for(c.scenes, jobs, [&](std::size_t s) {
    scenes[s] = prepare_scene(generate_scene(c.scene_spec(s)), c.k_normal, c.r_grow);
  });
  return scenes;
}

// Seed point and step of example `e` of scene `s`, plus its noise stream.
inline Rng example_rng(std::uint64_t seed, std::size_t scene, std::size_t example, std::uint64_t epoch_tag) {
  return make_rng(seed, {0x4558414d, scene, example, epoch_tag});
}

inline Dataset generate_dataset(const DatasetConfig& c, const std::vector<SceneData>& scenes, std::size_t jobs = 1) {
  c.validate();
  if (scenes.size() != c.scenes) throw ConfigError("scene count mismatch");
  Dataset ds;
  ds.manifest = make_manifest(c);
  ds.records.resize(c.scenes * c.examples_per_scene);
  parallel_for(c.scenes, jobs, [&](std::size_t s) {
    const SceneData& scene = scenes[s];
    for (std::size_t e = 0; e < c.examples_per_scene; ++e) {
      Rng rng = example_rng(c.seed, s, e, 0);
      const auto seed = static_cast<PointId>(uniform_index(rng, scene.cloud.size()));
      const auto step = static_cast<std::uint32_t>(uniform_index(rng, c.max_step + 1));
      ExampleRecord& rec = ds.records[s * c.examples_per_scene + e];
      rec.scene = static_cast<std::uint32_t>(s);
      rec.example = simulate_growth_example(scene.cloud, scene.graph, seed, step, c.theta, rng);
    }
  });
  return ds;
}

// Container, little-endian:
//   "RGTDSET\0", u32 version (1), u32 len + manifest JSON, u64 record count,
//   per record: u32 scene, u32 seed, u32 step, f64 theta,
//               u32 n_in, n_in x (u32 id, u8 remove_truth),
//               u32 n_nb, n_nb x (u32 id, u8 add_truth)
inline constexpr char kDatasetMagic[8] = {'R', 'G', 'T', 'D', 'S', 'E', 'T', '\0'};
inline constexpr std::uint32_t kDatasetVersion = 1;

inline std::string encode_dataset(const Dataset& ds) {
  using namespace io;
  std::string out(kDatasetMagic, sizeof(kDatasetMagic));
  put<std::uint32_t>(out, kDatasetVersion);
  put_string(out, ds.manifest.dump());
  put<std::uint64_t>(out, ds.records.size());
  for (const ExampleRecord& r : ds.records) {
    const TrainingExample& ex = r.example;
    put<std::uint32_t>(out, r.scene);
    put<std::uint32_t>(out, ex.seed);
    put<std::uint32_t>(out, ex.step);
    put<double>(out, ex.theta);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ex.inliers.size()));
    for (std::size_t i = 0; i < ex.inliers.size(); ++i) {
      put<std::uint32_t>(out, ex.inliers[i]);
      put<std::uint8_t>(out, ex.remove_truth[i]);
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ex.neighbors.size()));
    for (std::size_t i = 0; i < ex.neighbors.size(); ++i) {
      put<std::uint32_t>(out, ex.neighbors[i]);
      put<std::uint8_t>(out, ex.add_truth[i]);
    }
  }
  return out;
}

inline Dataset decode_dataset(const std::string& data) {
  using namespace io;
  if (data.size() < sizeof(kDatasetMagic) || std::memcmp(data.data(), kDatasetMagic, sizeof(kDatasetMagic)) != 0)
    throw ParseError(0, "not a dataset file");
  Reader r(data, "dataset");
  r.skip(sizeof(kDatasetMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion) throw ParseError(8, "unsupported dataset version " + std::to_string(version));
  Dataset ds;
  const std::size_t manifest_at = r.position();
  try {
    ds.manifest = nlohmann::json::parse(r.get_string());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_at, std::string("bad dataset manifest: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  r.need(count * 24);  // lower bound per record
  ds.records.resize(count);
  for (auto& rec : ds.records) {
    TrainingExample& ex = rec.example;
    rec.scene = r.get<std::uint32_t>();
    ex.seed = r.get<std::uint32_t>();
    ex.step = r.get<std::uint32_t>();
    ex.theta = r.get<double>();
    const auto n_in = r.get<std::uint32_t>();
    r.need(std::size_t{n_in} * 5);
    for (std::uint32_t i = 0; i < n_in; ++i) {
      ex.inliers.push_back(r.get<std::uint32_t>());
      ex.remove_truth.push_back(r.get<std::uint8_t>());
    }
    const auto n_nb = r.get<std::uint32_t>();
    r.need(std::size_t{n_nb} * 5);
    for (std::uint32_t i = 0; i < n_nb; ++i) {
      ex.neighbors.push_back(r.get<std::uint32_t>());
      ex.add_truth.push_back(r.get<std::uint8_t>());
    }
  }
  if (!r.at_end()) throw ParseError(r.position(), "trailing bytes after dataset records");
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  const std::string bytes = encode_dataset(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_dataset(data);
}

// Rebuilds the generating configuration from a manifest.
inline DatasetConfig config_from_manifest(const nlohmann::json& m) {
  try {
    DatasetConfig c;
    const auto& s = m.at("scene_spec");
    c.scene.room_x = s.at("room_x");
    c.scene.room_y = s.at("room_y");
    c.scene.wall_height = s.at("wall_height");
    c.scene.min_objects = s.at("min_objects");
    c.scene.max_objects = s.at("max_objects");
    c.scene.box_weight = s.at("box_weight");
    c.scene.sphere_weight = s.at("sphere_weight");
    c.scene.cylinder_weight = s.at("cylinder_weight");
    c.scene.min_size = s.at("min_size");
    c.scene.max_size = s.at("max_size");
    c.scene.min_points_per_object = s.at("min_points_per_object");
    c.scene.max_points_per_object = s.at("max_points_per_object");
    c.scene.density = s.at("density");
    c.scene.floor = s.at("floor");
    c.scene.walls = s.at("walls");
    c.scene.jitter = s.at("jitter");
    c.scene.color_noise = s.at("color_noise");
    c.scene.min_gap = s.at("min_gap");
    c.scene.seed = s.at("seed");
    c.scenes = m.at("scene_seeds").size();
    c.examples_per_scene = m.at("examples_per_scene");
    c.r_grow = m.at("r_grow");
    c.theta = m.at("theta");
    c.max_step = m.at("max_step");
    c.k_normal = m.at("k_normal");
    c.seed = m.at("seed");
    c.validate();
    for (std::size_t i = 0; i < c.scenes; ++i)
      if (m.at("scene_seeds")[i].get<std::uint64_t>() != c.scene_seed(i))
        throw ConfigError("manifest scene seed " + std::to_string(i) + " does not match its derivation");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad dataset manifest: ") + e.what());
  }
}

}  // namespace rgt::sim
