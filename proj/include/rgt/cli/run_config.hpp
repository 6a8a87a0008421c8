#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <type_traits>

#include "json.hpp"
#include "rgt/infer/segment.hpp"
#include "rgt/net/region_network.hpp"
#include "rgt/sim/dataset.hpp"
#include "rgt/train/trainer.hpp"

namespace rgt::cli {

using nlohmann::json;

// Every tunable of the pipeline in one document. Keys are addressed with
// dotted paths ("train.lr"); the file form nests them as JSON objects.
struct RunConfig {
  std::uint64_t seed = 1;
  double r_grow = 0.15;
  std::size_t k_normal = pcl::kDefaultNormalNeighbors;
  sim::SceneSpec scene;
  std::size_t scenes = 50;
  std::size_t examples_per_scene = 100;
  double theta = 0.2;
  std::uint32_t max_step = 10;
  net::NetworkConfig network;
  train::TrainConfig train;
  std::string precision = "f32";
  infer::GrowOptions grow;
  std::size_t min_segment = 8;
  double baseline_angle_deg = 10.0;
  double baseline_curvature = 0.05;
  double iou_threshold = 0.5;

  // Calls f(path, field) for every key, in document order.
  template <class C, class F>
  static void visit(C& c, F&& f) {
    f("seed", c.seed);
    f("r_grow", c.r_grow);
    f("k_normal", c.k_normal);
    f("scene.room_x", c.scene.room_x);
    f("scene.room_y", c.scene.room_y);
    f("scene.wall_height", c.scene.wall_height);
    f("scene.min_objects", c.scene.min_objects);
    f("scene.max_objects", c.scene.max_objects);
    f("scene.box_weight", c.scene.box_weight);
    f("scene.sphere_weight", c.scene.sphere_weight);
    f("scene.cylinder_weight", c.scene.cylinder_weight);
    f("scene.min_size", c.scene.min_size);
    f("scene.max_size", c.scene.max_size);
    f("scene.min_points_per_object", c.scene.min_points_per_object);
    f("scene.max_points_per_object", c.scene.max_points_per_object);
    f("scene.density", c.scene.density);
    f("scene.floor", c.scene.floor);
    f("scene.walls", c.scene.walls);
    f("scene.jitter", c.scene.jitter);
    f("scene.color_noise", c.scene.color_noise);
    f("scene.min_gap", c.scene.min_gap);
    f("data.scenes", c.scenes);
    f("data.examples_per_scene", c.examples_per_scene);
    f("data.theta", c.theta);
    f("data.max_step", c.max_step);
    f("network.set_size", c.network.set_size);
    f("network.k_attn", c.network.k_attn);
    f("network.b1_widths", c.network.b1_widths);
    f("network.b2_widths", c.network.b2_widths);
    f("network.b3_widths", c.network.b3_widths);
    f("network.attn_dim", c.network.attn_dim);
    f("network.b2_attention_stages", c.network.b2_attention_stages);
    f("network.share_b1", c.network.share_b1);
    f("train.epochs", c.train.epochs);
    f("train.examples_per_epoch", c.train.examples_per_epoch);
    f("train.batch_size", c.train.batch_size);
    f("train.lr", c.train.lr);
    f("train.theta_max", c.train.theta_max);
    f("train.augment", c.train.augment);
    f("train.checkpoint_every", c.train.checkpoint_every);
    f("train.precision", c.precision);
    f("segment.max_iters", c.grow.max_iters);
    f("segment.threshold", c.grow.threshold);
    f("segment.permanent_exclusion", c.grow.permanent_exclusion);
    f("segment.min_segment", c.min_segment);
    f("baseline.angle_deg", c.baseline_angle_deg);
    f("baseline.curvature_threshold", c.baseline_curvature);
    f("eval.iou_threshold", c.iou_threshold);
  }

  void validate() const {
    if (!(r_grow > 0) || !std::isfinite(r_grow)) throw ConfigError("r_grow must be positive");
    if (k_normal < 3) throw ConfigError("k_normal must be >= 3");
    dataset().validate();
    network.validate();
    train_config().validate();
    if (precision != "f32" && precision != "f64") throw ConfigError("train.precision must be \"f32\" or \"f64\"");
    if (grow.max_iters == 0) throw ConfigError("segment.max_iters must be positive");
    if (!(grow.threshold > 0 && grow.threshold < 1)) throw ConfigError("segment.threshold must lie in (0, 1)");
    if (min_segment == 0) throw ConfigError("segment.min_segment must be positive");
    if (!(baseline_angle_deg >= 0 && baseline_angle_deg <= 90))
      throw ConfigError("baseline.angle_deg must lie in [0, 90]");
    if (!(baseline_curvature > 0)) throw ConfigError("baseline.curvature_threshold must be positive");
    if (!(iou_threshold > 0 && iou_threshold <= 1)) throw ConfigError("eval.iou_threshold must lie in (0, 1]");
  }

  sim::DatasetConfig dataset() const {
    sim::DatasetConfig d;
    d.scene = scene;
    d.scenes = scenes;
    d.examples_per_scene = examples_per_scene;
    d.r_grow = r_grow;
    d.theta = theta;
    d.max_step = max_step;
    d.k_normal = k_normal;
    d.seed = seed;
    return d;
  }

  train::TrainConfig train_config() const {
    train::TrainConfig t = train;
    t.seed = seed;
    return t;
  }

  infer::SegmentOptions segment_options() const {
    infer::SegmentOptions s;
    s.r_grow = r_grow;
    s.grow = grow;
    s.min_segment = min_segment;
    s.seed = seed;
    return s;
  }

  infer::ClassicOptions classic_options() const {
    infer::ClassicOptions c;
    c.angle_deg = baseline_angle_deg;
    c.curvature_threshold = baseline_curvature;
    c.r_grow = r_grow;
    c.min_segment = min_segment;
    return c;
  }

  json to_json() const {
    json out = json::object();
    visit(*this, [&](const std::string& path, const auto& v) { out[json::json_pointer("/" + slashed(path))] = v; });
    return out;
  }

  // Sets one dotted key from a JSON value; unknown keys and ill-typed values
  // are rejected.
  void set(const std::string& path, const json& value) {
    bool found = false;
    visit(*this, [&](const std::string& p, auto& field) {
      if (p != path) return;
      found = true;
      assign(p, value, field);
    });
    if (!found) throw ConfigError("unknown config key '" + path + "'");
  }

  // "key=value"; value is read as JSON when it parses, else as a string.
  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    set(key, value);
  }

  static RunConfig from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
    RunConfig c;
    std::map<std::string, const json*> flat;
    flatten(doc, "", flat);
    for (const auto& [path, value] : flat) c.set(path, *value);
    c.validate();
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config '" + path.string() + "'");
    const json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config '" + path.string() + "' is not valid JSON");
    return from_json(doc);
  }

 private:
  static std::string slashed(std::string p) {
    for (char& ch : p)
      if (ch == '.') ch = '/';
    return p;
  }

  static void flatten(const json& j, const std::string& prefix, std::map<std::string, const json*>& out) {
    for (const auto& [k, v] : j.items()) {
      const std::string path = prefix.empty() ? k : prefix + "." + k;
      if (v.is_object())
        flatten(v, path, out);
      else
        out[path] = &v;
    }
  }

  template <class V>
  static void assign(const std::string& path, const json& value, V& field) {
    auto bad = [&](const std::string& why) { return ConfigError("config key '" + path + "': " + why); };
    if constexpr (std::is_integral_v<V> && !std::is_same_v<V, bool>) {
      if (!value.is_number_integer()) throw bad("expected an integer");
      if constexpr (std::is_unsigned_v<V>)
        if (value.is_number_integer() && !value.is_number_unsigned() && value.get<std::int64_t>() < 0)
          throw bad("must be non-negative");
    }
    if constexpr (std::is_same_v<V, double>)
      if (!value.is_number()) throw bad("expected a number");
    if constexpr (std::is_same_v<V, bool>)
      if (!value.is_boolean()) throw bad("expected true or false");
    if constexpr (std::is_same_v<V, std::string>)
      if (!value.is_string()) throw bad("expected a string");
    try {
      field = value.get<V>();
    } catch (const json::exception& e) {
      throw bad(e.what());
    }
  }
};

}  // namespace rgt::cli
