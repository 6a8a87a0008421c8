#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"
#include "rgt/pcl/cloud.hpp"
#include "rgt/random.hpp"

namespace rgt::sim {

using pcl::Label;
using pcl::Vec3;

enum class Primitive { kBox, kSphere, kCylinder };

struct SceneSpec {
  double room_x = 3.0;
  double room_y = 3.0;
  double wall_height = 1.0;
  int min_objects = 3;
  int max_objects = 6;
  // Relative weights of box, sphere, cylinder.
  double box_weight = 1.0;
  double sphere_weight = 1.0;
  double cylinder_weight = 1.0;
  double min_size = 0.25;  // object extent range, meters
  double max_size = 0.6;
  int min_points_per_object = 64;
  int max_points_per_object = 4000;
  double density = 400.0;  // surface samples per square meter
  bool floor = true;
  bool walls = false;
  double jitter = 0.002;
  double color_noise = 0.03;
  // Minimum clearance between object footprints and to the room border.
  double min_gap = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(room_x > 0 && room_y > 0 && wall_height > 0)) throw ConfigError("room extents must be positive");
    if (min_objects < 0 || max_objects < min_objects) throw ConfigError("object count range invalid");
    if (box_weight < 0 || sphere_weight < 0 || cylinder_weight < 0 ||
        box_weight + sphere_weight + cylinder_weight <= 0)
      throw ConfigError("primitive weights must be non-negative with a positive sum");
    if (!(min_size > 0 && max_size >= min_size)) throw ConfigError("object size range invalid");
    if (min_points_per_object < 8 || max_points_per_object < min_points_per_object)
      throw ConfigError("points per object range must start at >= 8");
    if (!(density > 0)) throw ConfigError("density must be positive");
    if (jitter < 0 || color_noise < 0 || min_gap < 0) throw ConfigError("noise and gap must be non-negative");
    if (!floor && max_objects == 0 && !walls) throw ConfigError("scene would be empty");
  }
};

inline void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = {{"room_x", s.room_x},
       {"room_y", s.room_y},
       {"wall_height", s.wall_height},
       {"min_objects", s.min_objects},
       {"max_objects", s.max_objects},
       {"box_weight", s.box_weight},
       {"sphere_weight", s.sphere_weight},
       {"cylinder_weight", s.cylinder_weight},
       {"min_size", s.min_size},
       {"max_size", s.max_size},
       {"min_points_per_object", s.min_points_per_object},
       {"max_points_per_object", s.max_points_per_object},
       {"density", s.density},
       {"floor", s.floor},
       {"walls", s.walls},
       {"jitter", s.jitter},
       {"color_noise", s.color_noise},
       {"min_gap", s.min_gap},
       {"seed", s.seed}};
}

struct PlacedObject {
  Primitive kind = Primitive::kBox;
  Vec3 center = Vec3::Zero();  // footprint center on the floor (z = 0)
  Vec3 size = Vec3::Zero();    // box: full extents; sphere: radius in x; cylinder: radius x, height z
  double yaw = 0.0;
  double footprint = 0.0;      // bounding circle radius in the floor plane
  Label label = 0;
};

namespace scene_detail {

inline Vec3 instance_color(Rng& rng) {
  // Saturated random hue, medium value.
  const double h = uniform(rng, 0.0, 6.0), s = uniform(rng, 0.5, 0.9), v = uniform(rng, 0.5, 0.9);
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

struct Builder {
  const SceneSpec& spec;
  Rng& rng;
  pcl::RawCloud cloud;
  std::vector<Label> labels;

  int count_for(double area) const {
    const double n = std::round(area * spec.density);
    return static_cast<int>(std::clamp<double>(n, spec.min_points_per_object, spec.max_points_per_object));
  }

  void emit(const Vec3& p, const Vec3& color, Label label) {
    Vec3 q = p;
    for (int a = 0; a < 3; ++a) q[a] += gaussian(rng, spec.jitter);
    Vec3 c;
    for (int a = 0; a < 3; ++a) c[a] = clamp01(color[a] + gaussian(rng, spec.color_noise));
    cloud.positions.push_back(q);
    cloud.colors.push_back(c);
    labels.push_back(label);
  }

  // Uniform samples on the five visible faces (bottom omitted).
  void box(const PlacedObject& o, const Vec3& color) {
    const double sx = o.size.x(), sy = o.size.y(), sz = o.size.z();
    const double areas[5] = {sx * sy, sx * sz, sx * sz, sy * sz, sy * sz};
    const double total = areas[0] + areas[1] + areas[2] + areas[3] + areas[4];
    const int n = count_for(total);
    const double c = std::cos(o.yaw), s = std::sin(o.yaw);
    for (int i = 0; i < n; ++i) {
      double pick = uniform(rng, 0.0, total);
      int face = 0;
      while (face < 4 && pick > areas[face]) pick -= areas[face++];
      const double u = uniform(rng, -0.5, 0.5), v = uniform(rng, -0.5, 0.5), w = uniform(rng, 0.0, 1.0);
      Vec3 local;
      switch (face) {
        case 0: local = {u * sx, v * sy, sz}; break;
        case 1: local = {u * sx, -0.5 * sy, w * sz}; break;
        case 2: local = {u * sx, 0.5 * sy, w * sz}; break;
        case 3: local = {-0.5 * sx, u * sy, w * sz}; break;
        default: local = {0.5 * sx, u * sy, w * sz}; break;
      }
      emit({o.center.x() + c * local.x() - s * local.y(), o.center.y() + s * local.x() + c * local.y(), local.z()},
           color, o.label);
    }
  }

  void sphere(const PlacedObject& o, const Vec3& color) {
    const double r = o.size.x();
    const int n = count_for(4.0 * std::numbers::pi * r * r);
    for (int i = 0; i < n; ++i) {
      const double z = uniform(rng, -1.0, 1.0), phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      emit({o.center.x() + r * rho * std::cos(phi), o.center.y() + r * rho * std::sin(phi), r + r * z}, color,
           o.label);
    }
  }

  // Side wall and top cap.
  void cylinder(const PlacedObject& o, const Vec3& color) {
    const double r = o.size.x(), h = o.size.z();
    const double side = 2.0 * std::numbers::pi * r * h, cap = std::numbers::pi * r * r;
    const int n = count_for(side + cap);
    for (int i = 0; i < n; ++i) {
      const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      if (uniform(rng, 0.0, side + cap) < side) {
        emit({o.center.x() + r * std::cos(phi), o.center.y() + r * std::sin(phi), uniform(rng, 0.0, h)}, color,
             o.label);
      } else {
        const double rr = r * std::sqrt(uniform(rng));
        emit({o.center.x() + rr * std::cos(phi), o.center.y() + rr * std::sin(phi), h}, color, o.label);
      }
    }
  }
};

// True when the floor point (x, y) lies under an object that hides it.
inline bool covered(const PlacedObject& o, double x, double y) {
  const double dx = x - o.center.x(), dy = y - o.center.y();
  switch (o.kind) {
    case Primitive::kBox: {
      const double c = std::cos(o.yaw), s = std::sin(o.yaw);
      const double lx = c * dx + s * dy, ly = -s * dx + c * dy;
      return std::abs(lx) <= 0.5 * o.size.x() && std::abs(ly) <= 0.5 * o.size.y();
    }
    case Primitive::kCylinder: return dx * dx + dy * dy <= o.size.x() * o.size.x();
    case Primitive::kSphere: return false;
  }
  return false;
}

}  // namespace scene_detail

// Draws and places the objects of a scene without sampling any points.
inline std::vector<PlacedObject> place_objects(const SceneSpec& spec, Rng& rng) {
  spec.validate();
  const int count = spec.min_objects + static_cast<int>(uniform_index(rng, spec.max_objects - spec.min_objects + 1));
  const double weights[3] = {spec.box_weight, spec.sphere_weight, spec.cylinder_weight};
  std::vector<PlacedObject> placed;
  Label next_label = spec.floor ? 1 : 0;
  for (int k = 0; k < count; ++k) {
    PlacedObject o;
    const double pick = uniform(rng, 0.0, weights[0] + weights[1] + weights[2]);
    o.kind = pick < weights[0] ? Primitive::kBox : pick < weights[0] + weights[1] ? Primitive::kSphere : Primitive::kCylinder;
    switch (o.kind) {
      case Primitive::kBox:
        o.size = {uniform(rng, spec.min_size, spec.max_size), uniform(rng, spec.min_size, spec.max_size),
                  uniform(rng, spec.min_size, spec.max_size)};
        o.yaw = uniform(rng, 0.0, std::numbers::pi);
        o.footprint = 0.5 * std::hypot(o.size.x(), o.size.y());
        break;
      case Primitive::kSphere:
        o.size = {0.5 * uniform(rng, spec.min_size, spec.max_size), 0.0, 0.0};
        o.footprint = o.size.x();
        break;
      case Primitive::kCylinder:
        o.size = {0.5 * uniform(rng, spec.min_size, spec.max_size), 0.0, uniform(rng, spec.min_size, spec.max_size)};
        o.footprint = o.size.x();
        break;
    }
    o.label = next_label++;
    placed.push_back(o);
  }
  // Whole layouts are redrawn when one object cannot be placed; each layout
  // allows 100 tries per object.
  for (int layout = 0; layout < 100; ++layout) {
    std::size_t done = 0;
    for (; done < placed.size(); ++done) {
      PlacedObject& o = placed[done];
      const double margin = o.footprint + spec.min_gap;
      if (2 * margin >= spec.room_x || 2 * margin >= spec.room_y) break;
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        o.center = {uniform(rng, margin, spec.room_x - margin), uniform(rng, margin, spec.room_y - margin), 0.0};
        ok = std::all_of(placed.begin(), placed.begin() + static_cast<std::ptrdiff_t>(done), [&](const PlacedObject& other) {
          return (o.center - other.center).norm() > o.footprint + other.footprint + spec.min_gap;
        });
      }
      if (!ok) break;
    }
    if (done == placed.size()) return placed;
  }
  throw ConfigError("infeasible scene: " + std::to_string(placed.size()) +
                    " objects do not fit the room after 100 placement attempts");
}

// Floor (label 0 when enabled), then objects, then walls. Labels are
// contiguous from 0 in that order.
inline pcl::RawCloud generate_scene(const SceneSpec& spec, Rng& rng) {
  const std::vector<PlacedObject> objects = place_objects(spec, rng);
  scene_detail::Builder b{spec, rng, {}, {}};

  if (spec.floor) {
    const Vec3 color = scene_detail::instance_color(rng) * 0.3 + Vec3::Constant(0.35);
    const int n = static_cast<int>(std::round(spec.room_x * spec.room_y * spec.density));
    for (int i = 0; i < n; ++i) {
      const double x = uniform(rng, 0.0, spec.room_x), y = uniform(rng, 0.0, spec.room_y);
      const bool hidden = std::any_of(objects.begin(), objects.end(),
                                      [&](const PlacedObject& o) { return scene_detail::covered(o, x, y); });
      if (!hidden) b.emit({x, y, 0.0}, color, 0);
    }
  }
  for (const PlacedObject& o : objects) {
    const Vec3 color = scene_detail::instance_color(rng);
    switch (o.kind) {
      case Primitive::kBox: b.box(o, color); break;
      case Primitive::kSphere: b.sphere(o, color); break;
      case Primitive::kCylinder: b.cylinder(o, color); break;
    }
  }
  if (spec.walls) {
    Label label = static_cast<Label>((spec.floor ? 1 : 0) + objects.size());
    const double lengths[4] = {spec.room_x, spec.room_x, spec.room_y, spec.room_y};
    for (int w = 0; w < 4; ++w, ++label) {
      const Vec3 color = scene_detail::instance_color(rng) * 0.3 + Vec3::Constant(0.5);
      const int n = static_cast<int>(std::round(lengths[w] * spec.wall_height * spec.density));
      for (int i = 0; i < n; ++i) {
        const double t = uniform(rng, 0.0, lengths[w]), z = uniform(rng, 0.0, spec.wall_height);
        Vec3 p;
        switch (w) {
          case 0: p = {t, 0.0, z}; break;
          case 1: p = {t, spec.room_y, z}; break;
          case 2: p = {0.0, t, z}; break;
          default: p = {spec.room_x, t, z}; break;
        }
        b.emit(p, color, label);
      }
    }
  }
  b.cloud.labels = std::move(b.labels);
  return std::move(b.cloud);
}

inline pcl::RawCloud generate_scene(const SceneSpec& spec) {
  Rng rng = make_rng(spec.seed, {0x5343454e45});
  return generate_scene(spec, rng);
}

}  // namespace rgt::sim
