#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "exa/bytes.hpp"
#include "exa/container.hpp"
#include "exa/emphasis.hpp"
#include "exa/mesh_audit.hpp"
#include "exa/mesh_ops.hpp"
#include "exa/volume_io.hpp"

namespace exa {

struct ExportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ExportFormat { ply, obj, stl, bundle };

inline ExportFormat parse_export_format(const std::string& s) {
  if (s == "ply") return ExportFormat::ply;
  if (s == "obj") return ExportFormat::obj;
  if (s == "stl") return ExportFormat::stl;
  if (s == "bundle") return ExportFormat::bundle;
  throw std::invalid_argument("unknown export format: " + s);
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

namespace detail {

inline VertexAttributes attributes_of(const TriangleMesh& m, std::size_t v) {
  return m.attributes.empty() ? VertexAttributes{} : m.attributes[v];
}

inline Vec3 normal_of(const TriangleMesh& m, std::size_t v) {
  return v < m.normals.size() ? m.normals[v] : Vec3::Zero();
}

}  // namespace detail

// ---- PLY (binary little-endian) ----

inline std::vector<std::uint8_t> ply_bytes(const TriangleMesh& m, EmphasisMode mode = EmphasisMode::bw) {
  std::ostringstream h;
  h << "ply\nformat binary_little_endian 1.0\ncomment exa mesh export, emphasis " << emphasis_name(mode) << "\n"
    << "element vertex " << m.vertex_count() << "\n"
    << "property float x\nproperty float y\nproperty float z\n"
    << "property float nx\nproperty float ny\nproperty float nz\n"
    << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
    << "property int partition\nproperty ushort feature\n"
    << "element face " << m.triangle_count() << "\n"
    << "property list uchar int vertex_indices\nend_header\n";
  const std::string header = h.str();
  ByteWriter w;
  w.raw(header.data(), header.size());
  const auto lut = shape_lut(mode);
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    const Vec3& p = m.positions[v];
    const Vec3 n = detail::normal_of(m, v);
    for (int k = 0; k < 3; ++k) w.f32(static_cast<float>(p[k]));
    for (int k = 0; k < 3; ++k) w.f32(static_cast<float>(n[k]));
    const auto a = detail::attributes_of(m, v);
    const Rgb c = vertex_color(a, mode, lut);
    for (auto ch : c) w.u8(ch);
    w.u32(a.partition);
    w.u16(pack_feature(a));
  }
  for (const auto& t : m.triangles) {
    w.u8(3);
    for (auto v : t) w.u32(v);
  }
  return w.take();
}

inline void write_ply(const std::filesystem::path& path, const TriangleMesh& m, EmphasisMode mode = EmphasisMode::bw) {
  write_file(path, ply_bytes(m, mode));
}

namespace detail {

inline double ply_read_scalar(ByteReader& r, const std::string& t) {
  if (t == "char" || t == "int8") return static_cast<std::int8_t>(r.u8());
  if (t == "uchar" || t == "uint8") return r.u8();
  if (t == "short" || t == "int16") return static_cast<std::int16_t>(r.u16());
  if (t == "ushort" || t == "uint16") return r.u16();
  if (t == "int" || t == "int32") return static_cast<std::int32_t>(r.u32());
  if (t == "uint" || t == "uint32") return r.u32();
  if (t == "float" || t == "float32") return r.f32();
  if (t == "double" || t == "float64") return r.f64();
  throw FormatError("unsupported PLY property type " + t);
}

}  // namespace detail

// Reads binary little-endian PLY with float/double coordinates and a
// triangle face list; optional normals, partition and feature properties.
inline TriangleMesh parse_ply(const std::vector<std::uint8_t>& bytes) {
  const std::string marker = "end_header\n";
  const std::string head(bytes.begin(), bytes.begin() + std::min<std::size_t>(bytes.size(), 1 << 16));
  const auto end = head.find(marker);
  if (head.rfind("ply\n", 0) != 0 || end == std::string::npos) throw FormatError("not a PLY file");
  std::istringstream hs(head.substr(0, end));
  struct Prop {
    std::string name, type, count_type;
    bool list = false;
  };
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Prop> props;
  };
  std::vector<Element> elements;
  std::string line;
  bool binary_le = false;
  while (std::getline(hs, line)) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string f;
      ls >> f;
      binary_le = f == "binary_little_endian";
    } else if (kw == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (kw == "property") {
      if (elements.empty()) throw FormatError("PLY property before element");
      Prop p;
      std::string t;
      ls >> t;
      if (t == "list") {
        p.list = true;
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = t;
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    }
  }
  if (!binary_le) throw FormatError("only binary_little_endian PLY is supported");
  ByteReader r(bytes.data() + end + marker.size(), bytes.size() - end - marker.size());
  TriangleMesh m;
  bool has_normals = false, has_attr = false;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      m.positions.resize(e.count);
      m.normals.assign(e.count, Vec3::Zero());
      m.attributes.resize(e.count);
      for (const auto& p : e.props) {
        if (p.name == "nx") has_normals = true;
        if (p.name == "feature" || p.name == "partition") has_attr = true;
      }
      for (std::size_t v = 0; v < e.count; ++v)
        for (const auto& p : e.props) {
          if (p.list) throw FormatError("list property on vertex element");
          const double x = detail::ply_read_scalar(r, p.type);
          if (p.name == "x") m.positions[v].x() = x;
          else if (p.name == "y") m.positions[v].y() = x;
          else if (p.name == "z") m.positions[v].z() = x;
          else if (p.name == "nx") m.normals[v].x() = x;
          else if (p.name == "ny") m.normals[v].y() = x;
          else if (p.name == "nz") m.normals[v].z() = x;
          else if (p.name == "feature") m.attributes[v] = unpack_feature(static_cast<std::uint16_t>(x));
          else if (p.name == "partition") m.attributes[v].partition = static_cast<std::uint8_t>(x);
        }
    } else if (e.name == "face") {
      for (std::size_t f = 0; f < e.count; ++f)
        for (const auto& p : e.props) {
          if (!p.list) {
            detail::ply_read_scalar(r, p.type);
            continue;
          }
          const auto n = static_cast<std::size_t>(detail::ply_read_scalar(r, p.count_type));
          std::vector<std::uint32_t> idx(n);
          for (auto& i : idx) i = static_cast<std::uint32_t>(detail::ply_read_scalar(r, p.type));
          if (p.name != "vertex_indices" && p.name != "vertex_index") continue;
          for (std::size_t k = 1; k + 1 < n; ++k) m.triangles.push_back({idx[0], idx[k], idx[k + 1]});
        }
    } else {
      for (std::size_t i = 0; i < e.count; ++i)
        for (const auto& p : e.props) {
          if (p.list) {
            const auto n = static_cast<std::size_t>(detail::ply_read_scalar(r, p.count_type));
            for (std::size_t k = 0; k < n; ++k) detail::ply_read_scalar(r, p.type);
          } else {
            detail::ply_read_scalar(r, p.type);
          }
        }
    }
  }
  for (const auto& t : m.triangles)
    for (auto v : t)
      if (v >= m.positions.size()) throw FormatError("PLY face index out of range");
  if (!has_normals) m.normals.clear();
  if (!has_attr) m.attributes.clear();
  m.synthetic.assign(m.triangles.size(), 0);
  return m;
}

inline TriangleMesh read_ply(const std::filesystem::path& path) { return parse_ply(read_file(path)); }

// ---- OBJ ----

namespace detail {

inline void append_float(std::string& s, double x) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, static_cast<float>(x));
  s.append(buf, r.ptr);
}

}  // namespace detail

inline std::string obj_text(const TriangleMesh& m) {
  std::string s = "# exa mesh export\n";
  for (const auto& p : m.positions) {
    s += "v";
    for (int k = 0; k < 3; ++k) {
      s += ' ';
      detail::append_float(s, p[k]);
    }
    s += '\n';
  }
  const bool normals = m.normals.size() == m.vertex_count();
  if (normals)
    for (const auto& n : m.normals) {
      s += "vn";
      for (int k = 0; k < 3; ++k) {
        s += ' ';
        detail::append_float(s, n[k]);
      }
      s += '\n';
    }
  for (const auto& t : m.triangles) {
    s += "f";
    for (auto v : t) {
      const std::string id = std::to_string(v + 1);
      s += ' ' + id;
      if (normals) s += "//" + id;
    }
    s += '\n';
  }
  return s;
}

inline void write_obj(const std::filesystem::path& path, const TriangleMesh& m) {
  const std::string s = obj_text(m);
  write_file(path, std::vector<std::uint8_t>(s.begin(), s.end()));
}

// ---- STL (binary) ----

inline bool is_watertight(const TriangleMesh& m) {
  const MeshAudit a = audit_triangles(m.positions, m.triangles);
  return a.boundary_edges == 0 && a.nonmanifold_edges == 0 && a.inconsistent_edges == 0;
}

inline std::vector<std::uint8_t> stl_bytes(const TriangleMesh& m) {
  if (!is_watertight(m)) throw ExportError("STL export requires a watertight mesh (fill holes first)");
  ByteWriter w;
  std::array<char, 80> header{};
  const std::string text = "exa binary stl";
  std::copy(text.begin(), text.end(), header.begin());
  w.raw(header.data(), header.size());
  w.u32(static_cast<std::uint32_t>(m.triangle_count()));
  for (const auto& t : m.triangles) {
    const Vec3 &a = m.positions[t[0]], &b = m.positions[t[1]], &c = m.positions[t[2]];
    Vec3 n = (b - a).cross(c - a);
    const double len = n.norm();
    if (len > 0) n /= len;
    for (int k = 0; k < 3; ++k) w.f32(static_cast<float>(n[k]));
    for (const Vec3* p : {&a, &b, &c})
      for (int k = 0; k < 3; ++k) w.f32(static_cast<float>((*p)[k]));
    w.u16(0);
  }
  return w.take();
}

inline void write_stl(const std::filesystem::path& path, const TriangleMesh& m) { write_file(path, stl_bytes(m)); }

// ---- Viewer bundle ----

inline constexpr int kBundleVersion = 1;

inline const char* shape_bin_name(int b) {
  static const char* names[9] = {"dome",   "dome-ridge", "ridge", "ridge-saddle", "saddle",
                                 "saddle-rut", "rut",    "rut-cup", "cup"};
  return names[b];
}

// Partition of a triangle: the common label of its vertices, else 0.
inline std::uint8_t triangle_partition(const TriangleMesh& m, const Triangle& t) {
  if (m.attributes.empty()) return 0;
  const auto p = m.attributes[t[0]].partition;
  return m.attributes[t[1]].partition == p && m.attributes[t[2]].partition == p ? p : 0;
}

struct BundleFiles {
  nlohmann::json manifest;
  std::vector<std::uint8_t> positions, normals, indices, features;
};

inline BundleFiles make_bundle(const TriangleMesh& m, double c_min = kDefaultCMin) {
  BundleFiles b;
  const std::size_t nv = m.vertex_count(), nt = m.triangle_count();
  std::vector<std::uint32_t> order(nt);
  std::iota(order.begin(), order.end(), 0u);
  std::vector<std::uint8_t> tp(nt);
  for (std::size_t i = 0; i < nt; ++i) tp[i] = triangle_partition(m, m.triangles[i]);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return tp[x] < tp[y]; });

  ByteWriter pw, nw, iw, fw;
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
  for (std::size_t v = 0; v < nv; ++v) {
    const Vec3& p = m.positions[v];
    if (v == 0) lo = hi = p;
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
    const Vec3 n = detail::normal_of(m, v);
    for (int k = 0; k < 3; ++k) pw.f32(static_cast<float>(p[k]));
    for (int k = 0; k < 3; ++k) nw.f32(static_cast<float>(n[k]));
    fw.u16(pack_feature(detail::attributes_of(m, v)));
  }
  for (auto i : order)
    for (auto v : m.triangles[i]) iw.u32(v);
  b.positions = pw.take();
  b.normals = nw.take();
  b.indices = iw.take();
  b.features = fw.take();

  using nlohmann::json;
  json parts = json::array();
  std::array<std::size_t, 8> vcount{};
  for (std::size_t v = 0; v < nv; ++v) ++vcount[detail::attributes_of(m, v).partition];
  std::size_t first = 0;
  for (int p = 0; p < 8; ++p) {
    std::size_t count = 0;
    while (first + count < nt && tp[order[first + count]] == p) ++count;
    if (count > 0 || (p > 0 && vcount[p] > 0))
      parts.push_back({{"label", p},
                       {"name", p == 0 ? std::string("boundary") : "partition " + std::to_string(p)},
                       {"first_index", 3 * first},
                       {"index_count", 3 * count},
                       {"triangle_count", count},
                       {"vertex_count", vcount[p]}});
    first += count;
  }
  json luts = json::object();
  for (auto mode : {EmphasisMode::curvature, EmphasisMode::bw, EmphasisMode::blue_orange}) {
    json arr = json::array();
    for (const auto& c : shape_lut(mode)) arr.push_back({c[0], c[1], c[2]});
    luts[std::string(emphasis_name(mode))] = arr;
  }
  json bins = json::array();
  for (int i = 0; i < 9; ++i) bins.push_back(shape_bin_name(i));
  const std::size_t synthetic = static_cast<std::size_t>(std::count(m.synthetic.begin(), m.synthetic.end(), 1));
  b.manifest = {
      {"format", "exa-bundle"},
      {"version", kBundleVersion},
      {"vertex_count", nv},
      {"triangle_count", nt},
      {"synthetic_triangles", synthetic},
      {"bbox", {{"min", {lo.x(), lo.y(), lo.z()}}, {"max", {hi.x(), hi.y(), hi.z()}}}},
      {"buffers",
       {{"positions", {{"file", "positions.f32"}, {"type", "float32"}, {"components", 3}, {"count", nv}}},
        {"normals", {{"file", "normals.f32"}, {"type", "float32"}, {"components", 3}, {"count", nv}}},
        {"indices", {{"file", "indices.u32"}, {"type", "uint32"}, {"components", 3}, {"count", nt}}},
        {"features", {{"file", "features.u16"}, {"type", "uint16"}, {"components", 1}, {"count", nv}}}}},
      {"partitions", parts},
      {"feature_layout",
       {{"shape", {{"shift", 9}, {"bits", 7}}},
        {"partition", {{"shift", 6}, {"bits", 3}}},
        {"ao", {{"shift", 0}, {"bits", 6}}}}},
      {"shape_legend",
       {{"flat_code", 0},
        {"code", "1 + 14 * shape_bin + curvedness_bin"},
        {"shape_bins", bins},
        {"curvedness_bins", 14},
        {"curvedness_c_min", c_min},
        {"curvedness_step", "sqrt(2)"}}},
      {"ao_scale", 63},
      {"luts", luts},
  };
  return b;
}

inline void write_bundle(const std::filesystem::path& dir, const TriangleMesh& m, double c_min = kDefaultCMin) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const BundleFiles b = make_bundle(m, c_min);
  const std::string js = b.manifest.dump(1) + "\n";
  write_file(dir / "manifest.json", std::vector<std::uint8_t>(js.begin(), js.end()));
  write_file(dir / "positions.f32", b.positions);
  write_file(dir / "normals.f32", b.normals);
  write_file(dir / "indices.u32", b.indices);
  write_file(dir / "features.u16", b.features);
}

// Writes `path` (a directory for bundles).
inline void export_mesh(const TriangleMesh& m, ExportFormat format, const std::filesystem::path& path,
                        EmphasisMode mode = EmphasisMode::bw) {
  switch (format) {
    case ExportFormat::ply: write_ply(path, m, mode); break;
    case ExportFormat::obj: write_obj(path, m); break;
    case ExportFormat::stl: write_stl(path, m); break;
    case ExportFormat::bundle: write_bundle(path, m); break;
  }
}

}  // namespace exa
