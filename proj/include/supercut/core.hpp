#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace supercut {

using Index = std::uint32_t;
using Label = std::uint32_t;

/// Reserved id for unlabeled points, objects and classes.
inline constexpr Label IGNORE = std::numeric_limits<Label>::max();

using Vec3 = std::array<double, 3>;

// Error families. The CLI maps each one onto an exit code.
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParameterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ClassTable {
  std::vector<std::string> names;
  std::vector<bool> is_thing;

  ClassTable() = default;
  ClassTable(std::vector<std::string> class_names, std::vector<bool> thing_flags)
      : names(std::move(class_names)), is_thing(std::move(thing_flags)) {
    if (names.empty()) throw ParameterError("class table needs at least one class");
    if (names.size() != is_thing.size())
      throw StructuralError("class table: names and thing flags differ in length");
  }

  std::size_t size() const { return names.size(); }
  bool thing(Label c) const { return c < is_thing.size() && is_thing[c]; }
  bool stuff(Label c) const { return c < is_thing.size() && !is_thing[c]; }
};

/// Points with optional colors and labels. Labels use IGNORE for void.
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<std::array<std::uint8_t, 3>> colors;  // empty when absent
  std::vector<Label> semantic;                      // empty when absent
  std::vector<Label> object;                        // empty when absent

  std::size_t size() const { return positions.size(); }
  bool has_colors() const { return !colors.empty(); }
  bool labeled() const { return !semantic.empty() && !object.empty(); }

  void check_structure() const {
    const auto n = positions.size();
    if (!colors.empty() && colors.size() != n)
      throw StructuralError("point cloud: color array length differs from positions");
    if (!semantic.empty() && semantic.size() != n)
      throw StructuralError("point cloud: semantic array length differs from positions");
    if (!object.empty() && object.size() != n)
      throw StructuralError("point cloud: object array length differs from positions");
  }
};

/// Node signal: class distribution rows (n x C) and a position/feature part (n x D).
/// The panoptic problem uses D = 3; the superpoint partition uses C = 0.
struct NodeSignal {
  std::size_t num_nodes = 0;
  std::size_t num_classes = 0;
  std::size_t dim = 3;
  std::vector<double> class_scores;  // row-major num_nodes x num_classes
  std::vector<double> position;      // row-major num_nodes x dim

  NodeSignal() = default;
  NodeSignal(std::size_t n, std::size_t c, std::size_t d = 3)
      : num_nodes(n), num_classes(c), dim(d), class_scores(n * c, 0.0), position(n * d, 0.0) {}

  const double* cls(std::size_t i) const { return class_scores.data() + i * num_classes; }
  double* cls(std::size_t i) { return class_scores.data() + i * num_classes; }
  const double* pos(std::size_t i) const { return position.data() + i * dim; }
  double* pos(std::size_t i) { return position.data() + i * dim; }

  /// Throws when a class row leaves the simplex or a buffer is mis-sized.
  void validate(double tolerance = 1e-6) const {
    if (class_scores.size() != num_nodes * num_classes || position.size() != num_nodes * dim)
      throw StructuralError("node signal: buffer sizes do not match declared shape");
    for (std::size_t i = 0; i < num_nodes; ++i) {
      if (num_classes == 0) break;
      double sum = 0.0;
      for (std::size_t c = 0; c < num_classes; ++c) {
        const double v = cls(i)[c];
        if (!std::isfinite(v) || v < 0.0)
          throw NumericError("node signal: class score of node " + std::to_string(i) +
                             " is negative or non-finite");
        sum += v;
      }
      if (std::abs(sum - 1.0) > tolerance)
        throw NumericError("node signal: class scores of node " + std::to_string(i) +
                           " sum to " + std::to_string(sum));
    }
    for (double v : position)
      if (!std::isfinite(v)) throw NumericError("node signal: non-finite position");
  }
};

struct ClusteringParams {
  double lambda = 10.0;
  double eta = 5e-2;
  double epsilon = 1e-4;
  int max_outer_iterations = 10;
  int split_iterations = 2;
  double relative_energy_tolerance = 1e-4;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw ParameterError("lambda must be finite and nonnegative");
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw ParameterError("eta must be nonnegative");
    if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
    if (!(relative_energy_tolerance > 0.0)) throw ParameterError("tolerance must be positive");
    if (max_outer_iterations < 0) throw ParameterError("max_outer_iterations must be >= 0");
    if (split_iterations < 1) throw ParameterError("split_iterations must be >= 1");
  }
};

/// Per-node class and object index. Stuff class c owns object index c;
/// thing objects are numbered from C upwards.
struct PanopticLabels {
  std::vector<Label> semantic;
  std::vector<Label> object;

  std::size_t size() const { return semantic.size(); }
};

inline Label stuff_object_index(Label class_id) { return class_id; }

struct Violation {
  enum class Kind { OutOfRange, MixedClassObject, SplitStuffClass };
  Kind kind;
  std::string message;
};

/// Checks the panoptic index convention on ground truth: objects carry one class, and all
/// points of a stuff class share one object index. Points with an IGNORE field are skipped.
inline std::vector<Violation> validate_ground_truth(const PointCloud& cloud, const ClassTable& table) {
  cloud.check_structure();
  if (!cloud.labeled()) throw StructuralError("validate_ground_truth: cloud has no labels");

  std::vector<Violation> report;
  std::map<Label, Label> object_class;              // object -> first class seen
  std::map<Label, std::vector<Label>> stuff_objects;  // stuff class -> distinct objects
  std::map<Label, bool> mixed_reported;

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Label c = cloud.semantic[i];
    const Label o = cloud.object[i];
    if (c == IGNORE || o == IGNORE) continue;
    if (c >= table.size()) {
      report.push_back({Violation::Kind::OutOfRange,
                        "point " + std::to_string(i) + ": class id " + std::to_string(c) +
                            " out of range"});
      continue;
    }
    auto [it, inserted] = object_class.emplace(o, c);
    if (!inserted && it->second != c && !mixed_reported[o]) {
      mixed_reported[o] = true;
      report.push_back({Violation::Kind::MixedClassObject,
                        "object " + std::to_string(o) + " holds classes " +
                            std::to_string(it->second) + " and " + std::to_string(c)});
    }
    if (table.stuff(c)) {
      auto& objs = stuff_objects[c];
      if (std::find(objs.begin(), objs.end(), o) == objs.end()) objs.push_back(o);
    }
  }
  for (const auto& [c, objs] : stuff_objects) {
    if (objs.size() > 1)
      report.push_back({Violation::Kind::SplitStuffClass,
                        "stuff class " + std::to_string(c) + " uses " +
                            std::to_string(objs.size()) + " object indices"});
  }
  return report;
}

/// Row-wise softmax of raw scores (n x C, row-major).
inline std::vector<double> normalize_scores(const std::vector<double>& raw, std::size_t num_classes) {
  if (num_classes == 0 || raw.size() % num_classes != 0)
    throw StructuralError("normalize_scores: buffer is not a multiple of the class count");
  std::vector<double> out(raw.size());
  for (std::size_t r = 0; r < raw.size(); r += num_classes) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (!std::isfinite(raw[r + c]))
        throw NumericError("normalize_scores: non-finite score in row " +
                           std::to_string(r / num_classes));
      peak = std::max(peak, raw[r + c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) sum += (out[r + c] = std::exp(raw[r + c] - peak));
    for (std::size_t c = 0; c < num_classes; ++c) out[r + c] /= sum;
  }
  return out;
}

/// Checks the output-side label invariants: one class per object and the reserved stuff index.
inline bool labels_consistent(const PanopticLabels& labels, const ClassTable& table) {
  std::map<Label, Label> object_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Label c = labels.semantic[i], o = labels.object[i];
    if (c == IGNORE || o == IGNORE) continue;
    if (table.stuff(c) && o != stuff_object_index(c)) return false;
    if (table.thing(c) && o < table.size()) return false;
    auto [it, inserted] = object_class.emplace(o, c);
    if (!inserted && it->second != c) return false;
  }
  return true;
}

}  // namespace supercut
