#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "supercut/core.hpp"
#include "supercut/graphs.hpp"
#include "supercut/rng.hpp"
#include "supercut/superpoints.hpp"

namespace supercut {

/// Ground (stuff) plus two box and two sphere thing classes.
inline ClassTable default_scene_table() {
  return ClassTable({"ground", "crate", "cabinet", "ball", "globe"}, {false, true, true, true, true});
}

struct SceneSpec {
  std::size_t num_objects = 50;
  ClassTable table = default_scene_table();
  std::size_t points_min = 120;
  std::size_t points_max = 240;
  double ground_density = 12.0;  // points per square meter
  double jitter = 0.005;         // per-coordinate noise, meters
  double spacing = 2.0;          // grid cell size
  double placement_jitter = 0.2;
  double min_gap = 0.3;
  double size_min = 0.4;
  double size_max = 0.9;
  std::uint64_t seed = 0;

  void validate() const {
    if (points_min == 0 || points_max < points_min) throw ParameterError("scene: bad points-per-object range");
    if (!(size_min > 0.0) || size_max < size_min) throw ParameterError("scene: bad object size range");
    if (!(jitter >= 0.0) || !(placement_jitter >= 0.0) || !(ground_density > 0.0))
      throw ParameterError("scene: jitter and density must be nonnegative");
    if (!(min_gap > 2.0 * jitter)) throw ParameterError("scene: gap must exceed twice the jitter");
    if (size_max + 2.0 * placement_jitter + min_gap > spacing)
      throw ParameterError("scene: objects cannot be packed at this spacing without violating the gap");
    bool has_stuff = false, has_thing = false;
    for (std::size_t c = 0; c < table.size(); ++c) (table.is_thing[c] ? has_thing : has_stuff) = true;
    if (!has_stuff) throw ParameterError("scene: class table needs a stuff class for the ground");
    if (num_objects > 0 && !has_thing) throw ParameterError("scene: class table has no thing class");
  }
};

/// Jittered boxes and spheres floating `min_gap` above a stuff ground plane, one object per
/// grid cell. Deterministic per seed.
inline PointCloud generate_scene(const SceneSpec& spec) {
  spec.validate();
  const auto& table = spec.table;
  std::vector<Label> things;
  Label ground = IGNORE;
  for (Label c = 0; c < table.size(); ++c) {
    if (table.thing(c)) things.push_back(c);
    else if (ground == IGNORE) ground = c;
  }
  CounterRng rng(spec.seed, 0x5ce4e);
  PointCloud cloud;
  auto color_of = [&](Label c, double tint) {
    static constexpr std::uint8_t base[][3] = {{110, 120, 100}, {200, 60, 40},  {50, 90, 210},
                                               {230, 200, 40},  {60, 190, 90},  {170, 60, 200},
                                               {40, 200, 200},  {240, 140, 30}};
    const auto& b = base[c % 8];
    std::array<std::uint8_t, 3> rgb{};
    for (int a = 0; a < 3; ++a)
      rgb[a] = static_cast<std::uint8_t>(std::clamp(b[a] + tint + 4.0 * rng.normal(), 0.0, 255.0));
    return rgb;
  };
  auto push = [&](Vec3 p, Label c, Label o, double tint) {
    for (double& v : p) v += spec.jitter * rng.normal();
    cloud.positions.push_back(p);
    cloud.colors.push_back(color_of(c, tint));
    cloud.semantic.push_back(c);
    cloud.object.push_back(o);
  };

  const std::size_t side = spec.num_objects == 0
                               ? 1
                               : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(spec.num_objects))));
  const double extent = static_cast<double>(side) * spec.spacing;
  const auto ground_points = std::max<std::size_t>(1, static_cast<std::size_t>(spec.ground_density * extent * extent));
  for (std::size_t i = 0; i < ground_points; ++i)
    push({rng.uniform(0.0, extent), rng.uniform(0.0, extent), 0.0}, ground, stuff_object_index(ground), 0.0);

  for (std::size_t k = 0; k < spec.num_objects; ++k) {
    const Label cls = things[rng.below(things.size())];
    const bool sphere = (std::find(things.begin(), things.end(), cls) - things.begin()) % 2 == 1;
    const Label obj = static_cast<Label>(table.size() + k);
    const double tint = rng.uniform(-15.0, 15.0);
    const std::size_t count = spec.points_min + rng.below(spec.points_max - spec.points_min + 1);
    const double cx = (static_cast<double>(k % side) + 0.5) * spec.spacing +
                      rng.uniform(-spec.placement_jitter, spec.placement_jitter);
    const double cy = (static_cast<double>(k / side) + 0.5) * spec.spacing +
                      rng.uniform(-spec.placement_jitter, spec.placement_jitter);
    if (sphere) {
      const double r = 0.5 * rng.uniform(spec.size_min, spec.size_max);
      const Vec3 center{cx, cy, spec.min_gap + r};
      for (std::size_t i = 0; i < count; ++i) {
        Vec3 u{rng.normal(), rng.normal(), rng.normal()};
        double norm = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
        if (!(norm > 0.0)) {
          u = {0, 0, 1};
          norm = 1.0;
        }
        for (int a = 0; a < 3; ++a) u[a] = center[a] + r * u[a] / norm;
        push(u, cls, obj, tint);
      }
    } else {
      const Vec3 size{rng.uniform(spec.size_min, spec.size_max), rng.uniform(spec.size_min, spec.size_max),
                      rng.uniform(spec.size_min, spec.size_max)};
      const Vec3 lo{cx - 0.5 * size[0], cy - 0.5 * size[1], spec.min_gap};
      const double face[3] = {size[1] * size[2], size[0] * size[2], size[0] * size[1]};
      const double total = 2.0 * (face[0] + face[1] + face[2]);
      for (std::size_t i = 0; i < count; ++i) {
        // Area-weighted face choice, then a uniform point on that face.
        double t = rng.uniform() * total;
        int axis = 0;
        while (axis < 2 && t >= 2.0 * face[axis]) t -= 2.0 * face[axis++];
        Vec3 p{lo[0] + rng.uniform() * size[0], lo[1] + rng.uniform() * size[1], lo[2] + rng.uniform() * size[2]};
        p[axis] = lo[axis] + (t < face[axis] ? 0.0 : size[axis]);
        push(p, cls, obj, tint);
      }
    }
  }
  return cloud;
}

struct OracleSignals {
  NodeSignal x;
  std::vector<double> agreement;  // per graph edge
  std::size_t corrupted_edges = 0;
};

/// Oracle node signal and edge agreements for labeled superpoints. Class rows are the one-hot
/// class of the majority object, mixed as (1 - r) one-hot + r u with u uniform on the
/// simplex. Each agreement is replaced by a uniform draw with probability `agreement_noise`.
inline OracleSignals oracle_signals(const SuperpointPartition& sp, const AdjacencyGraph& g,
                                    const PointCloud& cloud, const ClassTable& table,
                                    double class_noise, double agreement_noise, std::uint64_t seed,
                                    unsigned threads = 0) {
  if (!(class_noise >= 0.0 && class_noise <= 1.0) || !(agreement_noise >= 0.0 && agreement_noise <= 1.0))
    throw ParameterError("oracle_signals: noise rates must lie in [0, 1]");
  if (sp.object_class.size() != sp.count() || sp.centroid.size() != sp.count())
    throw StructuralError("oracle_signals: superpoints need majority labels and centroids");
  const std::size_t c_count = table.size();
  OracleSignals out;
  out.x = NodeSignal(sp.count(), c_count, 3);
  for (std::size_t s = 0; s < sp.count(); ++s) {
    double* row = out.x.cls(s);
    const Label c = sp.object_class[s];
    for (std::size_t k = 0; k < c_count; ++k)
      row[k] = c == IGNORE ? 1.0 / static_cast<double>(c_count) : (k == c ? 1.0 : 0.0);
    if (class_noise > 0.0) {
      CounterRng rng(seed, hash_combine(1, s));
      std::vector<double> u(c_count);
      double sum = 0.0;
      for (double& v : u) sum += (v = -std::log(rng.uniform_open_closed()));
      for (std::size_t k = 0; k < c_count; ++k) row[k] = (1.0 - class_noise) * row[k] + class_noise * u[k] / sum;
    }
    for (int a = 0; a < 3; ++a) out.x.pos(s)[a] = sp.centroid[s][a];
  }
  out.agreement = superpoint_agreements(sp, g, cloud, threads);
  if (agreement_noise > 0.0)
    for (std::size_t e = 0; e < out.agreement.size(); ++e) {
      CounterRng rng(seed, hash_combine(2, e));
      if (rng.uniform() < agreement_noise) {
        out.agreement[e] = rng.uniform();
        ++out.corrupted_edges;
      }
    }
  return out;
}

}  // namespace supercut
