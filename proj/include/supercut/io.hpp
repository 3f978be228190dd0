#pragma once

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "supercut/core.hpp"
#include "supercut/cutpursuit.hpp"
#include "supercut/graphs.hpp"
#include "supercut/matchbench.hpp"
#include "supercut/metrics.hpp"
#include "supercut/panoptic.hpp"
#include "supercut/superpoints.hpp"

namespace supercut::io {

using nlohmann::json;

// ---------------------------------------------------------------------------------------
// Primitives

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

[[noreturn]] inline void data_error(const std::string& path, std::size_t line, const std::string& what) {
  throw DataError(path + ":" + std::to_string(line) + ": " + what);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a temporary file in the same directory and renames it into place.
inline void write_file_atomic(const std::string& path, std::string_view bytes) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(tmp + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError(tmp + ": write failed");
  }
  std::filesystem::rename(tmp, target);
}

/// 64-bit FNV-1a digest as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc{} && r.ptr == s.data() + s.size();
}

// Label fields use -1 for IGNORE.
inline bool parse_label(std::string_view s, Label& out) {
  std::int64_t v = 0;
  if (!parse_number(s, v) || v < -1 || v >= static_cast<std::int64_t>(IGNORE)) return false;
  out = v < 0 ? IGNORE : static_cast<Label>(v);
  return true;
}

inline std::string format_label(Label l) { return l == IGNORE ? "-1" : std::to_string(l); }

/// Iterates over data rows of a CSV with an exact expected header.
template <typename Row>
void read_csv(const std::string& path, std::string_view header, std::size_t fields, Row&& row) {
  const std::string text = read_file(path);
  std::size_t line_no = 0, pos = 0;
  bool seen_header = false;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line = trim(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != header) data_error(path, line_no, "expected header '" + std::string(header) + "'");
      seen_header = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != fields)
      data_error(path, line_no, "expected " + std::to_string(fields) + " fields, found " + std::to_string(cells.size()));
    row(cells, line_no);
  }
  if (!seen_header) data_error(path, 1, "missing header '" + std::string(header) + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------------------
// PLY

namespace detail {

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

inline bool ply_type(std::string_view name, PlyType& t) {
  static const std::map<std::string_view, PlyType> types = {
      {"char", PlyType::I8},    {"int8", PlyType::I8},     {"uchar", PlyType::U8},   {"uint8", PlyType::U8},
      {"short", PlyType::I16},  {"int16", PlyType::I16},   {"ushort", PlyType::U16}, {"uint16", PlyType::U16},
      {"int", PlyType::I32},    {"int32", PlyType::I32},   {"uint", PlyType::U32},   {"uint32", PlyType::U32},
      {"float", PlyType::F32},  {"float32", PlyType::F32}, {"double", PlyType::F64}, {"float64", PlyType::F64}};
  const auto it = types.find(name);
  if (it == types.end()) return false;
  t = it->second;
  return true;
}

inline std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::I8: case PlyType::U8: return 1;
    case PlyType::I16: case PlyType::U16: return 2;
    case PlyType::I32: case PlyType::U32: case PlyType::F32: return 4;
    case PlyType::F64: return 8;
  }
  return 0;
}

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof v);
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof v);
  }
  return v;
}

template <typename T>
void store_le(std::string& out, T v) {
  char b[sizeof v];
  std::memcpy(b, &v, sizeof v);
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) std::reverse(b, b + sizeof v);
  out.append(b, sizeof v);
}

inline double ply_load(PlyType t, const char* p) {
  switch (t) {
    case PlyType::I8: return load_le<std::int8_t>(p);
    case PlyType::U8: return load_le<std::uint8_t>(p);
    case PlyType::I16: return load_le<std::int16_t>(p);
    case PlyType::U16: return load_le<std::uint16_t>(p);
    case PlyType::I32: return load_le<std::int32_t>(p);
    case PlyType::U32: return load_le<std::uint32_t>(p);
    case PlyType::F32: return load_le<float>(p);
    case PlyType::F64: return load_le<double>(p);
  }
  return 0.0;
}

}  // namespace detail

/// Reads `x y z` with optional `red green blue`, `semantic_class`, `object_id` (-1 = IGNORE)
/// from an ASCII or binary little-endian PLY. Unknown vertex properties are skipped.
inline PointCloud read_ply(const std::string& path) {
  const std::string text = read_file(path);
  std::size_t pos = 0, line_no = 0;
  auto next_line = [&]() -> std::string_view {
    if (pos >= text.size()) data_error(path, line_no + 1, "unexpected end of file");
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line = detail::trim(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    return line;
  };
  if (next_line() != "ply") data_error(path, 1, "missing 'ply' magic");
  bool binary = false, in_vertex = false, vertex_seen = false;
  std::size_t vertex_count = 0;
  struct Prop {
    std::string name;
    detail::PlyType type;
  };
  std::vector<Prop> props;
  for (;;) {
    const auto line = next_line();
    const auto words = detail::split(line, ' ');
    if (line == "end_header") break;
    if (words[0] == "comment" || words[0] == "obj_info" || line.empty()) continue;
    if (words[0] == "format") {
      if (words.size() != 3) data_error(path, line_no, "malformed format line");
      if (words[1] == "ascii") binary = false;
      else if (words[1] == "binary_little_endian") binary = true;
      else data_error(path, line_no, "unsupported PLY format '" + std::string(words[1]) + "'");
    } else if (words[0] == "element") {
      if (words.size() != 3) data_error(path, line_no, "malformed element line");
      in_vertex = words[1] == "vertex";
      if (in_vertex == vertex_seen) data_error(path, line_no, "the vertex element must come first and only once");
      if (in_vertex && !detail::parse_number(words[2], vertex_count)) data_error(path, line_no, "bad vertex count");
      vertex_seen = true;
    } else if (words[0] == "property") {
      if (!in_vertex) continue;
      if (words.size() != 3) data_error(path, line_no, "list properties are not supported on vertices");
      Prop p{std::string(words[2]), {}};
      if (!detail::ply_type(words[1], p.type)) data_error(path, line_no, "unknown property type '" + std::string(words[1]) + "'");
      props.push_back(std::move(p));
    } else {
      data_error(path, line_no, "unrecognized header line");
    }
  }
  if (!vertex_seen) data_error(path, line_no, "no vertex element");

  auto index_of = [&](std::string_view name) -> int {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i].name == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
  if (ix < 0 || iy < 0 || iz < 0) data_error(path, line_no, "vertex element lacks x, y or z");
  const int ir = index_of("red"), ig = index_of("green"), ib = index_of("blue");
  const int isem = index_of("semantic_class"), iobj = index_of("object_id");
  const bool colors = ir >= 0 && ig >= 0 && ib >= 0;
  const bool labels = isem >= 0 && iobj >= 0;

  PointCloud cloud;
  cloud.positions.resize(vertex_count);
  if (colors) cloud.colors.resize(vertex_count);
  if (labels) {
    cloud.semantic.resize(vertex_count);
    cloud.object.resize(vertex_count);
  }
  std::vector<double> values(props.size());
  auto store = [&](std::size_t v, std::size_t where) {
    for (int a = 0; a < 3; ++a) cloud.positions[v][a] = values[a == 0 ? ix : a == 1 ? iy : iz];
    for (double c : {values[ix], values[iy], values[iz]})
      if (!std::isfinite(c)) data_error(path, where, "non-finite coordinate");
    if (colors)
      for (int a = 0; a < 3; ++a) {
        const double c = values[a == 0 ? ir : a == 1 ? ig : ib];
        if (!(c >= 0.0 && c <= 255.0)) data_error(path, where, "color outside [0, 255]");
        cloud.colors[v][a] = static_cast<std::uint8_t>(c);
      }
    if (labels) {
      for (int idx : {isem, iobj}) {
        const double l = values[idx];
        if (l != std::floor(l) || l < -1.0 || l >= 4294967295.0) data_error(path, where, "invalid label value");
      }
      cloud.semantic[v] = values[isem] < 0 ? IGNORE : static_cast<Label>(values[isem]);
      cloud.object[v] = values[iobj] < 0 ? IGNORE : static_cast<Label>(values[iobj]);
    }
  };

  if (binary) {
    std::size_t stride = 0;
    for (const auto& p : props) stride += detail::ply_size(p.type);
    if (text.size() - pos < stride * vertex_count)
      data_error(path, line_no, "binary body holds fewer than " + std::to_string(vertex_count) + " vertices");
    for (std::size_t v = 0; v < vertex_count; ++v) {
      const char* rec = text.data() + pos + v * stride;
      std::size_t off = 0;
      for (std::size_t i = 0; i < props.size(); ++i) {
        values[i] = detail::ply_load(props[i].type, rec + off);
        off += detail::ply_size(props[i].type);
      }
      store(v, line_no);
    }
  } else {
    for (std::size_t v = 0; v < vertex_count; ++v) {
      std::string_view line;
      do line = next_line();
      while (line.empty());
      const auto words = detail::split(line, ' ');
      std::size_t w = 0;
      for (std::size_t i = 0; i < props.size(); ++i) {
        while (w < words.size() && words[w].empty()) ++w;
        if (w >= words.size()) data_error(path, line_no, "too few values in vertex row");
        if (!detail::parse_number(words[w++], values[i])) data_error(path, line_no, "unparsable value in vertex row");
      }
      store(v, line_no);
    }
  }
  return cloud;
}

inline std::string ply_bytes(const PointCloud& cloud, bool binary) {
  cloud.check_structure();
  const bool colors = cloud.has_colors(), labels = cloud.labeled();
  std::string out = "ply\nformat ";
  out += binary ? "binary_little_endian 1.0\n" : "ascii 1.0\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (colors) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (labels) out += "property int semantic_class\nproperty int object_id\n";
  out += "end_header\n";
  auto label_int = [](Label l) { return l == IGNORE ? std::int32_t{-1} : static_cast<std::int32_t>(l); };
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (binary) {
      for (double c : cloud.positions[i]) detail::store_le(out, c);
      if (colors)
        for (auto c : cloud.colors[i]) detail::store_le(out, c);
      if (labels) {
        detail::store_le(out, label_int(cloud.semantic[i]));
        detail::store_le(out, label_int(cloud.object[i]));
      }
    } else {
      out += format_double(cloud.positions[i][0]) + " " + format_double(cloud.positions[i][1]) + " " +
             format_double(cloud.positions[i][2]);
      if (colors)
        for (auto c : cloud.colors[i]) out += " " + std::to_string(c);
      if (labels) out += " " + std::to_string(label_int(cloud.semantic[i])) + " " + std::to_string(label_int(cloud.object[i]));
      out += "\n";
    }
  }
  return out;
}

inline void write_ply(const std::string& path, const PointCloud& cloud, bool binary = true) {
  write_file_atomic(path, ply_bytes(cloud, binary));
}

// ---------------------------------------------------------------------------------------
// Class scores: "SCLS", version u32, N u64, C u32, then N x C float64 row-major.

inline constexpr std::uint32_t kScoresVersion = 1;

inline void write_scores(const std::string& path, const std::vector<double>& scores, std::uint64_t n, std::uint32_t c) {
  if (scores.size() != n * c) throw StructuralError("write_scores: buffer does not match N x C");
  std::string out = "SCLS";
  detail::store_le(out, kScoresVersion);
  detail::store_le(out, n);
  detail::store_le(out, c);
  for (double v : scores) detail::store_le(out, v);
  write_file_atomic(path, out);
}

inline std::vector<double> read_scores(const std::string& path, std::uint64_t* n_out = nullptr,
                                       std::uint32_t* c_out = nullptr) {
  const std::string bytes = read_file(path);
  constexpr std::size_t header = 4 + 4 + 8 + 4;
  if (bytes.size() < header || bytes.compare(0, 4, "SCLS") != 0) throw DataError(path + ": not a class score file (bad magic)");
  const auto version = detail::load_le<std::uint32_t>(bytes.data() + 4);
  if (version != kScoresVersion) throw DataError(path + ": unsupported score file version " + std::to_string(version));
  const auto n = detail::load_le<std::uint64_t>(bytes.data() + 8);
  const auto c = detail::load_le<std::uint32_t>(bytes.data() + 16);
  if (c == 0 || (bytes.size() - header) / 8 / c != n || (bytes.size() - header) != n * c * 8)
    throw DataError(path + ": body size does not match N=" + std::to_string(n) + " C=" + std::to_string(c));
  std::vector<double> out(n * c);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = detail::load_le<double>(bytes.data() + header + 8 * i);
    if (!std::isfinite(out[i])) throw NumericError(path + ": non-finite score in row " + std::to_string(i / c));
  }
  if (n_out) *n_out = n;
  if (c_out) *c_out = c;
  return out;
}

// ---------------------------------------------------------------------------------------
// CSV tables

inline std::string edges_csv(const AdjacencyGraph& g) {
  std::string out = "src,dst,weight,agreement\n";
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    out += std::to_string(g.source[e]) + "," + std::to_string(g.target[e]) + "," + format_double(g.weight[e]) + ",";
    if (g.has_agreement() && !agreement_ignored(g.agreement[e])) out += format_double(g.agreement[e]);
    out += "\n";
  }
  return out;
}

inline void write_edges(const std::string& path, const AdjacencyGraph& g) { write_file_atomic(path, edges_csv(g)); }

inline AdjacencyGraph read_edges(const std::string& path, std::size_t node_count) {
  AdjacencyGraph g;
  g.node_count = node_count;
  bool any_agreement = false, any_blank = false;
  std::vector<double> agreement;
  detail::read_csv(path, "src,dst,weight,agreement", 4, [&](const auto& f, std::size_t line) {
    Index u = 0, v = 0;
    double w = 0.0, a = kIgnoredAgreement;
    if (!detail::parse_number(f[0], u) || !detail::parse_number(f[1], v)) data_error(path, line, "bad node id");
    if (u >= node_count || v >= node_count) data_error(path, line, "node id out of range");
    if (u == v) data_error(path, line, "self-loop");
    if (!detail::parse_number(f[2], w) || !(w >= 0.0) || !std::isfinite(w)) data_error(path, line, "bad weight");
    if (detail::trim(f[3]).empty()) any_blank = true;
    else if (!detail::parse_number(f[3], a) || !(a >= 0.0 && a <= 1.0)) data_error(path, line, "bad agreement");
    else any_agreement = true;
    g.add_edge(u, v, w);
    agreement.push_back(a);
  });
  if (any_agreement && any_blank) throw DataError(path + ": agreement column is only partly filled");
  if (any_agreement) g.agreement = std::move(agreement);
  const std::size_t before = g.edge_count();
  g.canonicalize();
  if (g.edge_count() != before) throw DataError(path + ": duplicate edges");
  return g;
}

inline void write_superpoints(const std::string& path, const SuperpointPartition& sp) {
  std::string out = "point_id,superpoint_id\n";
  for (std::size_t p = 0; p < sp.point_count(); ++p)
    out += std::to_string(p) + "," + std::to_string(sp.point_to_superpoint[p]) + "\n";
  write_file_atomic(path, out);
}

inline SuperpointPartition read_superpoints(const std::string& path) {
  std::vector<Index> assign;
  Index max_id = 0;
  detail::read_csv(path, "point_id,superpoint_id", 2, [&](const auto& f, std::size_t line) {
    std::size_t p = 0;
    Index s = 0;
    if (!detail::parse_number(f[0], p) || p != assign.size()) data_error(path, line, "point ids must be 0..N-1 in order");
    if (!detail::parse_number(f[1], s) || s == IGNORE) data_error(path, line, "bad superpoint id");
    assign.push_back(s);
    max_id = std::max(max_id, s);
  });
  if (assign.empty()) throw DataError(path + ": no rows");
  const std::size_t count = static_cast<std::size_t>(max_id) + 1;
  std::vector<char> used(count, 0);
  for (Index s : assign) used[s] = 1;
  for (std::size_t s = 0; s < count; ++s)
    if (!used[s]) throw DataError(path + ": superpoint ids must be dense; id " + std::to_string(s) + " is unused");
  return SuperpointPartition::from_assignment(std::move(assign), count);
}

inline void write_agreements(const std::string& path, const AdjacencyGraph& g) {
  std::string out = "src,dst,agreement\n";
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    out += std::to_string(g.source[e]) + "," + std::to_string(g.target[e]) + ",";
    if (g.has_agreement() && !agreement_ignored(g.agreement[e])) out += format_double(g.agreement[e]);
    out += "\n";
  }
  write_file_atomic(path, out);
}

/// Agreements keyed by (min, max) node pair; blank cells mean ignored.
inline std::map<std::pair<Index, Index>, double> read_agreements(const std::string& path) {
  std::map<std::pair<Index, Index>, double> out;
  detail::read_csv(path, "src,dst,agreement", 3, [&](const auto& f, std::size_t line) {
    Index u = 0, v = 0;
    double a = kIgnoredAgreement;
    if (!detail::parse_number(f[0], u) || !detail::parse_number(f[1], v) || u == v) data_error(path, line, "bad node pair");
    if (!detail::trim(f[2]).empty() && (!detail::parse_number(f[2], a) || !(a >= 0.0 && a <= 1.0)))
      data_error(path, line, "agreement must lie in [0, 1]");
    if (!out.emplace(std::pair(std::min(u, v), std::max(u, v)), a).second) data_error(path, line, "duplicate node pair");
  });
  return out;
}

inline std::string labels_csv(const PanopticLabels& labels) {
  std::string out = "point_id,semantic_class,object_id\n";
  for (std::size_t p = 0; p < labels.size(); ++p)
    out += std::to_string(p) + "," + detail::format_label(labels.semantic[p]) + "," +
           detail::format_label(labels.object[p]) + "\n";
  return out;
}

inline void write_labels(const std::string& path, const PanopticLabels& labels) {
  write_file_atomic(path, labels_csv(labels));
}

inline PanopticLabels read_labels(const std::string& path) {
  PanopticLabels out;
  detail::read_csv(path, "point_id,semantic_class,object_id", 3, [&](const auto& f, std::size_t line) {
    std::size_t p = 0;
    Label c = 0, o = 0;
    if (!detail::parse_number(f[0], p) || p != out.size()) data_error(path, line, "point ids must be 0..N-1 in order");
    if (!detail::parse_label(f[1], c) || !detail::parse_label(f[2], o)) data_error(path, line, "bad label value");
    out.semantic.push_back(c);
    out.object.push_back(o);
  });
  return out;
}

inline void write_partition(const std::string& csv_path, const std::string& json_path, const Partition& part) {
  std::string out = "node_id,component_id\n";
  for (std::size_t p = 0; p < part.assignment.size(); ++p)
    out += std::to_string(p) + "," + std::to_string(part.assignment[p]) + "\n";
  json components = json::object();
  for (std::size_t k = 0; k < part.component_count(); ++k) {
    components[std::to_string(k)] = {
        {"class_distribution", std::vector<double>(part.cls(k), part.cls(k) + part.num_classes)},
        {"position", std::vector<double>(part.pos(k), part.pos(k) + part.dim)},
        {"size", part.members(k).size()}};
  }
  const json sidecar = {{"components", components}, {"energy", part.energy}, {"energy_history", part.energy_history}};
  write_file_atomic(csv_path, out);
  write_file_atomic(json_path, sidecar.dump(2) + "\n");
}

inline std::vector<Index> read_partition_csv(const std::string& path) {
  std::vector<Index> out;
  detail::read_csv(path, "node_id,component_id", 2, [&](const auto& f, std::size_t line) {
    std::size_t p = 0;
    Index k = 0;
    if (!detail::parse_number(f[0], p) || p != out.size()) data_error(path, line, "node ids must be 0..N-1 in order");
    if (!detail::parse_number(f[1], k)) data_error(path, line, "bad component id");
    out.push_back(k);
  });
  return out;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "method,n_true,n_pred,median_seconds\n";
  for (const auto& r : rows)
    out += r.method + "," + std::to_string(r.n_true) + "," + std::to_string(r.n_pred) + "," + format_double(r.median_seconds) + "\n";
  return out;
}

/// Rows of `n_true,n_pred`.
inline std::vector<std::pair<std::size_t, std::size_t>> read_sizes(const std::string& path) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  detail::read_csv(path, "n_true,n_pred", 2, [&](const auto& f, std::size_t line) {
    std::size_t a = 0, b = 0;
    if (!detail::parse_number(f[0], a) || !detail::parse_number(f[1], b) || a == 0 || b == 0)
      data_error(path, line, "sizes must be positive integers");
    out.emplace_back(a, b);
  });
  return out;
}

inline std::string grid_csv(const GridResult& r) {
  std::string out = "lambda,eta,epsilon,mean_pq\n";
  for (const auto& c : r.table)
    out += format_double(c.lambda) + "," + format_double(c.eta) + "," + format_double(c.epsilon) + "," +
           format_double(c.mean_pq) + "\n";
  return out;
}

// ---------------------------------------------------------------------------------------
// JSON documents

inline json class_table_json(const ClassTable& t) {
  json classes = json::array();
  for (std::size_t c = 0; c < t.size(); ++c) classes.push_back({{"name", t.names[c]}, {"thing", bool(t.is_thing[c])}});
  return {{"classes", classes}};
}

inline ClassTable class_table_from_json(const json& j, const std::string& where = "class table") {
  try {
    std::vector<std::string> names;
    std::vector<bool> thing;
    for (const auto& c : j.at("classes")) {
      names.push_back(c.at("name").get<std::string>());
      thing.push_back(c.at("thing").get<bool>());
    }
    return ClassTable(std::move(names), std::move(thing));
  } catch (const json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
}

inline ClassTable read_class_table(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
  return class_table_from_json(j, path);
}

inline json metrics_json(const PanopticMetrics& m, const ClassTable& t) {
  json per_class = json::object();
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const auto& q = m.per_class[c];
    if (q.tp + q.fp + q.fn == 0) continue;
    per_class[t.names[c]] = {{"pq", q.pq}, {"rq", q.rq}, {"sq", q.sq}, {"tp", q.tp}, {"fp", q.fp},
                             {"fn", q.fn}, {"precision", q.precision}, {"recall", q.recall}};
  }
  return {{"pq", m.pq}, {"rq", m.rq}, {"sq", m.sq}, {"miou", m.miou}, {"per_class", per_class}};
}

inline json timings_json(const StageTimes& t) {
  json j = json::object();
  for (const auto& [stage, ms] : t) j[stage] = ms;
  return j;
}

inline std::string scores_source_name(ScoresSource s) { return s == ScoresSource::File ? "file" : "oracle"; }
inline std::string agreement_source_name(AgreementSource s) {
  return s == AgreementSource::File ? "file" : s == AgreementSource::Oracle ? "oracle" : "noisy_oracle";
}

inline json config_json(const PipelineConfig& c) {
  return {{"lambda", c.clustering.lambda},
          {"eta", c.clustering.eta},
          {"epsilon", c.clustering.epsilon},
          {"knn_k", c.knn_k},
          {"superpoint_regularization", c.superpoint_regularization},
          {"superpoint_ratio", c.superpoint_ratio},
          {"scores_source", scores_source_name(c.scores_source)},
          {"agreement_source", agreement_source_name(c.agreement_source)},
          {"corruption_rate", c.corruption_rate},
          {"class_noise", c.class_noise},
          {"seed", c.clustering.seed},
          {"max_outer_iterations", c.clustering.max_outer_iterations},
          {"split_iterations", c.clustering.split_iterations},
          {"relative_energy_tolerance", c.clustering.relative_energy_tolerance}};
}

/// Overlays keys present in `j` onto `base`.
inline PipelineConfig config_from_json(const json& j, PipelineConfig base = {}, const std::string& where = "config") {
  try {
    auto& cl = base.clustering;
    if (j.contains("lambda")) cl.lambda = j["lambda"].get<double>();
    if (j.contains("eta")) cl.eta = j["eta"].get<double>();
    if (j.contains("epsilon")) cl.epsilon = j["epsilon"].get<double>();
    if (j.contains("knn_k")) base.knn_k = j["knn_k"].get<std::size_t>();
    if (j.contains("superpoint_regularization")) base.superpoint_regularization = j["superpoint_regularization"].get<double>();
    if (j.contains("superpoint_ratio")) base.superpoint_ratio = j["superpoint_ratio"].get<double>();
    if (j.contains("scores_source")) {
      const auto s = j["scores_source"].get<std::string>();
      if (s == "file") base.scores_source = ScoresSource::File;
      else if (s == "oracle") base.scores_source = ScoresSource::Oracle;
      else throw DataError(where + ": unknown scores_source '" + s + "'");
    }
    if (j.contains("agreement_source")) {
      const auto s = j["agreement_source"].get<std::string>();
      if (s == "file") base.agreement_source = AgreementSource::File;
      else if (s == "oracle") base.agreement_source = AgreementSource::Oracle;
      else if (s == "noisy_oracle") base.agreement_source = AgreementSource::NoisyOracle;
      else throw DataError(where + ": unknown agreement_source '" + s + "'");
    }
    if (j.contains("corruption_rate")) base.corruption_rate = j["corruption_rate"].get<double>();
    if (j.contains("class_noise")) base.class_noise = j["class_noise"].get<double>();
    if (j.contains("seed")) cl.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("max_outer_iterations")) cl.max_outer_iterations = j["max_outer_iterations"].get<int>();
    if (j.contains("split_iterations")) cl.split_iterations = j["split_iterations"].get<int>();
    if (j.contains("relative_energy_tolerance")) cl.relative_energy_tolerance = j["relative_energy_tolerance"].get<double>();
  } catch (const json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
  return base;
}

inline GridSpec grid_from_json(const json& j, const std::string& where = "grid") {
  GridSpec g;
  try {
    if (j.contains("lambda")) g.lambdas = j["lambda"].get<std::vector<double>>();
    if (j.contains("eta")) g.etas = j["eta"].get<std::vector<double>>();
    if (j.contains("epsilon")) g.epsilons = j["epsilon"].get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
  return g;
}

inline json scene_spec_json(const SceneSpec& s) {
  return {{"num_objects", s.num_objects},   {"points_min", s.points_min},
          {"points_max", s.points_max},     {"ground_density", s.ground_density},
          {"jitter", s.jitter},             {"spacing", s.spacing},
          {"placement_jitter", s.placement_jitter}, {"min_gap", s.min_gap},
          {"size_min", s.size_min},         {"size_max", s.size_max},
          {"seed", s.seed},                 {"class_table", class_table_json(s.table)}};
}

/// Overlays keys present in `j` onto `base`.
inline SceneSpec scene_spec_from_json(const json& j, SceneSpec base = {}, const std::string& where = "scene spec") {
  try {
    auto take = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::remove_reference_t<decltype(field)>>();
    };
    take("num_objects", base.num_objects);
    take("points_min", base.points_min);
    take("points_max", base.points_max);
    take("ground_density", base.ground_density);
    take("jitter", base.jitter);
    take("spacing", base.spacing);
    take("placement_jitter", base.placement_jitter);
    take("min_gap", base.min_gap);
    take("size_min", base.size_min);
    take("size_max", base.size_max);
    take("seed", base.seed);
    if (j.contains("class_table")) base.table = class_table_from_json(j["class_table"], where);
  } catch (const json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
  return base;
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace supercut::io
