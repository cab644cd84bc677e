#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "exa/ambient_occlusion.hpp"
#include "exa/container.hpp"
#include "exa/curvature.hpp"
#include "exa/delta_codec.hpp"
#include "exa/feature_word.hpp"
#include "exa/filters.hpp"
#include "exa/histogram.hpp"
#include "exa/mesh.hpp"
#include "exa/mesh_export.hpp"
#include "exa/mesh_ops.hpp"
#include "exa/segmentation.hpp"
#include "exa/smoothing.hpp"
#include "exa/volume.hpp"
#include "exa/volume_io.hpp"

namespace exa {

enum class Stage { preprocess = 0, extract = 1, mesh = 2, features = 3, exports = 4 };

inline Stage parse_stage(const std::string& s) {
  if (s == "preprocess") return Stage::preprocess;
  if (s == "extract") return Stage::extract;
  if (s == "mesh") return Stage::mesh;
  if (s == "features") return Stage::features;
  if (s == "export" || s == "all") return Stage::exports;
  throw std::invalid_argument("unknown stage: " + s);
}

inline const char* stage_name(Stage s) {
  static const char* names[] = {"preprocess", "extract", "mesh", "features", "export"};
  return names[static_cast<int>(s)];
}

struct PipelineConfig {
  // Input: a volume file, an EXA container, or a phantom.
  std::string input;
  VolumeFormat format = VolumeFormat::raw3d;
  std::string hdf5_dataset = "/data";
  std::optional<PhantomSpec> phantom;
  std::optional<std::array<std::size_t, 3>> crop_offset;
  Dims crop_size;

  bool resample = true;
  int bins = 1024;
  double f = 2.0;
  std::optional<double> tau;  // empty = estimate
  int denoise_iters = 2;
  int precision = 8;
  int smooth_iters = 32;
  int vertex_iters = 8;
  double k1_thresh = kDefaultK1Threshold;
  int ao_rays = kDefaultAoRays;
  double ao_radius = kDefaultAoRadius;
  std::optional<std::pair<double, double>> cluster;  // angle (deg), position
  bool fill_holes = false;
  std::size_t max_hole = kDefaultMaxHoleLoop;
  std::vector<ExportFormat> exports{ExportFormat::ply};
  EmphasisMode emphasis = EmphasisMode::bw;
  double q_pos = kDefaultPosStep;
  double q_nrm = kDefaultNrmStep;
  Stage last_stage = Stage::exports;
  std::filesystem::path out_dir = "out";
  std::string name = "exa";
};

struct PipelineError : std::runtime_error {
  PipelineError(const std::string& stage, const std::string& cause)
      : std::runtime_error(stage + ": " + cause), stage_name(stage) {}
  std::string stage_name;
};

struct PipelineResult {
  nlohmann::json report;
  std::vector<std::filesystem::path> artifacts;
  TriangleMesh mesh;
};

namespace detail {

class StageClock {
 public:
  explicit StageClock(nlohmann::json& rows) : rows_(rows) {}
  template <typename Fn>
  auto run(const std::string& row, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record(row, t0);
    } else {
      auto r = fn();
      record(row, t0);
      return r;
    }
  }

 private:
  void record(const std::string& row, std::chrono::steady_clock::time_point t0) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows_.push_back({{"name", row}, {"seconds", s}});
  }
  nlohmann::json& rows_;
};

inline std::optional<double> try_snr(const Volume3D& v, int bins) {
  try {
    return estimate_snr(analyze_histogram(v, bins));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline nlohmann::json section_rates(const ExaContainer& x, std::size_t vertices) {
  nlohmann::json r = nlohmann::json::object();
  for (const auto& s : x.sections)
    r[tag_string(s.tag)] = vertices ? 8.0 * static_cast<double>(s.data.size()) / static_cast<double>(vertices) : 0.0;
  return r;
}

}  // namespace detail

// Runs the stages up to config.last_stage. Artifacts go to config.out_dir:
// <name>.extract.exa, <name>.smooth.exa, <name>.features.exa, and the
// requested mesh exports.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  using nlohmann::json;
  PipelineResult res;
  json& rep = res.report;
  rep["stages"] = json::array();
  detail::StageClock clock(rep["stages"]);
  std::string stage = "preprocess";
  auto out_path = [&](const std::string& suffix) { return cfg.out_dir / (cfg.name + suffix); };

  try {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.out_dir.string());

    ExaContainer exa;
    const bool from_exa = !cfg.phantom && std::filesystem::path(cfg.input).extension() == ".exa";
    if (from_exa) {
      exa = clock.run("import", [&] { return exa_read(cfg.input); });
      rep["input"] = {{"exa", cfg.input}};
      rep["dims"] = {exa.header.dims.nx, exa.header.dims.ny, exa.header.dims.nz};
      rep["tau"] = exa.header.tau;
      rep["precision"] = exa.header.precision;
    } else {
      Volume3D vol = clock.run("import", [&] {
        if (cfg.phantom) return generate_phantom(*cfg.phantom);
        if (cfg.input.empty()) throw std::invalid_argument("no input volume or phantom");
        return import_volume(cfg.input, cfg.format, cfg.hdf5_dataset);
      });
      rep["input"] = cfg.phantom ? json{{"phantom", true}, {"seed", cfg.phantom->seed}} : json{{"path", cfg.input}};
      rep["dims"] = {vol.dims().nx, vol.dims().ny, vol.dims().nz};
      if (cfg.crop_offset) vol = crop_volume(vol, *cfg.crop_offset, cfg.crop_size);
      json snr = json::object();
      if (auto s = detail::try_snr(vol, cfg.bins)) snr["input"] = *s;
      if (cfg.resample) {
        vol = clock.run("filter", [&] { return gauss_resample(vol); });
        if (auto s = detail::try_snr(vol, cfg.bins)) snr["filtered"] = *s;
      }
      rep["dims_processed"] = {vol.dims().nx, vol.dims().ny, vol.dims().nz};
      double sigma = 0;
      HistogramModel hist;
      clock.run("estimate", [&] {
        hist = build_histogram(vol, cfg.bins);
        if (cfg.denoise_iters > 0 || !cfg.tau) sigma = estimate_sigma(hist);
      });
      if (sigma > 0) rep["sigma"] = sigma;
      if (cfg.denoise_iters > 0) {
        BilateralOptions opt;
        opt.iterations = cfg.denoise_iters;
        vol = clock.run("denoise", [&] { return denoise_joint_bilateral(vol, sigma, opt); });
        if (auto s = detail::try_snr(vol, cfg.bins)) snr["denoised"] = *s;
      }
      rep["snr_db"] = snr;
      double tau = 0;
      if (cfg.tau) {
        tau = *cfg.tau;
      } else {
        tau = estimate_threshold(build_histogram(vol, cfg.bins), cfg.f);
      }
      rep["tau"] = tau;
      rep["precision"] = cfg.precision;
      if (cfg.last_stage == Stage::preprocess) return res;

      stage = "extract";
      ContourData contour =
          clock.run("extract", [&] { return extract_contour(vol, static_cast<float>(tau), cfg.precision); });
      rep["active_edges"] = contour.edges.size();
      rep["active_cells"] = contour.cells.size();
      rep["ambiguous_facets"] = contour.facets.size();
      exa = clock.run("encode", [&] { return exa_encode(contour); });
      clock.run("export", [&] { exa_write(out_path(".extract.exa"), exa); });
      res.artifacts.push_back(out_path(".extract.exa"));
    }
    if (cfg.last_stage == Stage::extract) return res;

    stage = "mesh";
    XQuadMesh m = clock.run("mesh", [&] {
      XQuadMesh mm = build_mesh(exa_decode(exa));
      compute_normals(mm);
      return mm;
    });
    const std::size_t nv = m.vertex_count();
    rep["vertices"] = nv;
    rep["x_quads"] = m.face_count();
    rep["bits_per_vertex"] = detail::section_rates(exa, nv);
    {
      const std::vector<Vec3> p0 = m.positions, n0 = m.vertex_normals;
      clock.run("smooth", [&] {
        if (cfg.smooth_iters > 0) smooth_face_normals(m, cfg.smooth_iters);
        if (cfg.vertex_iters > 0) update_vertex_positions(m, cfg.vertex_iters);
      });
      const VertexDeltas deltas = clock.run(
          "deltas", [&] { return encode_vertex_deltas(p0, n0, m.positions, m.vertex_normals, cfg.q_pos, cfg.q_nrm); });
      // Continue from the stored (quantized) geometry so readers reproduce it.
      auto [pq, nq] = decode_vertex_deltas(p0, n0, deltas);
      m.positions = std::move(pq);
      m.vertex_normals = std::move(nq);
      exa.set(kDpos, deltas.positions.serialize());
      exa.set(kDnrm, deltas.normals.serialize());
      rep["delta_bits_per_vertex"] = {{"positions", deltas.positions.bits_per_vertex()},
                                      {"normals", deltas.normals.bits_per_vertex()}};
      clock.run("export", [&] { exa_write(out_path(".smooth.exa"), exa); });
      res.artifacts.push_back(out_path(".smooth.exa"));
    }
    triangulate_xquads(m);
    rep["triangles"] = m.triangles.size();
    TriangleMesh tm = to_triangle_mesh(m);
    if (cfg.last_stage == Stage::mesh) {
      res.mesh = std::move(tm);
      return res;
    }

    stage = "features";
    const auto curv = clock.run("curvature", [&] { return estimate_curvatures(m); });
    const Segmentation seg = clock.run(
        "traversal", [&] { return segment_mesh(nv, m.triangles, curv, cfg.k1_thresh); });
    const auto ao = clock.run("ao", [&] {
      return compute_ambient_occlusion(m.positions, m.vertex_normals, m.triangles, cfg.ao_rays, cfg.ao_radius);
    });
    tm.attributes.resize(nv);
    std::vector<std::uint8_t> aoq(nv);
    for (std::size_t v = 0; v < nv; ++v) {
      aoq[v] = quantize_ao(ao[v]);
      tm.attributes[v] = {classify_shape(curv[v].k1, curv[v].k2), seg.labels[v], aoq[v]};
    }
    exa.set(kFeat, pack_features(tm.attributes));
    exa.set(kAocc, pack_ao(aoq));
    rep["partitions"] = seg.sizes;
    rep["components"] = seg.components;
    rep["merged_components"] = seg.merged_components;
    rep["bits_per_vertex"] = detail::section_rates(exa, nv);
    clock.run("export", [&] { exa_write(out_path(".features.exa"), exa); });
    res.artifacts.push_back(out_path(".features.exa"));
    if (cfg.last_stage == Stage::features) {
      res.mesh = std::move(tm);
      return res;
    }

    stage = "export";
    if (cfg.cluster) tm = clock.run("cluster", [&] { return cluster_vertices(tm, cfg.cluster->first, cfg.cluster->second); });
    if (cfg.fill_holes) {
      HoleFillReport hr;
      tm = clock.run("fill_holes", [&] { return fill_holes(tm, cfg.max_hole, &hr); });
      rep["holes"] = {{"loops", hr.loops}, {"filled", hr.filled}, {"too_long", hr.too_long},
                      {"non_simple", hr.non_simple}, {"triangles_added", hr.triangles_added}};
    }
    rep["exported_vertices"] = tm.vertex_count();
    rep["exported_triangles"] = tm.triangle_count();
    clock.run("export_mesh", [&] {
      for (auto f : cfg.exports) {
        std::filesystem::path p;
        switch (f) {
          case ExportFormat::ply: p = out_path(".ply"); break;
          case ExportFormat::obj: p = out_path(".obj"); break;
          case ExportFormat::stl: p = out_path(".stl"); break;
          case ExportFormat::bundle: p = out_path(".bundle"); break;
        }
        export_mesh(tm, f, p, cfg.emphasis);
        res.artifacts.push_back(p);
      }
    });
    res.mesh = std::move(tm);
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(stage, e.what());
  }
  return res;
}

// Rebuilds the triangle mesh stored in a container: topology, then DPOS/DNRM
// deltas and FEAT attributes when present.
inline TriangleMesh mesh_from_exa(const ExaContainer& x) {
  XQuadMesh m = build_mesh(exa_decode(x));
  compute_normals(m);
  const auto* dp = x.find(kDpos);
  const auto* dn = x.find(kDnrm);
  if ((dp == nullptr) != (dn == nullptr)) throw FormatError("DPOS and DNRM must appear together");
  if (dp) {
    VertexDeltas d{DeltaSection::parse(dp->data), DeltaSection::parse(dn->data)};
    auto [p, n] = decode_vertex_deltas(m.positions, m.vertex_normals, d);
    m.positions = std::move(p);
    m.vertex_normals = std::move(n);
  }
  triangulate_xquads(m);
  TriangleMesh tm = to_triangle_mesh(m);
  if (const auto* f = x.find(kFeat)) {
    tm.attributes = unpack_features(f->data);
    if (tm.attributes.size() != tm.vertex_count()) throw FormatError("FEAT count does not match the mesh");
  }
  return tm;
}

// Summary of an EXA container or a bundle directory.
inline nlohmann::json report_stats(const std::filesystem::path& path) {
  using nlohmann::json;
  json r;
  if (std::filesystem::is_directory(path)) {
    std::ifstream in(path / "manifest.json");
    if (!in) throw IoError("no manifest.json in " + path.string());
    const json man = json::parse(in, nullptr, false);
    if (man.is_discarded()) throw IoError("malformed manifest in " + path.string());
    r["kind"] = "bundle";
    r["vertices"] = man.value("vertex_count", 0);
    r["triangles"] = man.value("triangle_count", 0);
    json parts = json::array();
    for (const auto& p : man.value("partitions", json::array()))
      parts.push_back({{"label", p.value("label", 0)}, {"triangles", p.value("triangle_count", 0)}});
    r["partitions"] = parts;
    return r;
  }
  const auto bytes = read_file(path);
  const ExaContainer x = exa_parse(bytes);
  r["kind"] = "exa";
  r["bytes"] = bytes.size();
  r["dims"] = {x.header.dims.nx, x.header.dims.ny, x.header.dims.nz};
  r["tau"] = x.header.tau;
  r["precision"] = x.header.precision;
  std::size_t vertices = 0, triangles = 0;
  if (x.find(kTopo)) {
    const ContourData c = exa_decode(x);
    r["active_edges"] = c.edges.size();
    r["active_cells"] = c.cells.size();
    r["ambiguous_facets"] = c.facets.size();
    const TriangleMesh tm = mesh_from_exa(x);
    vertices = tm.vertex_count();
    triangles = tm.triangle_count();
  }
  r["vertices"] = vertices;
  r["triangles"] = triangles;
  json sections = json::object();
  for (const auto& s : x.sections)
    sections[tag_string(s.tag)] = {
        {"bytes", s.data.size()},
        {"bits_per_vertex", vertices ? 8.0 * static_cast<double>(s.data.size()) / static_cast<double>(vertices) : 0.0}};
  r["sections"] = sections;
  if (const auto* f = x.find(kFeat)) {
    std::array<std::size_t, 8> sizes{};
    for (const auto& a : unpack_features(f->data)) ++sizes[a.partition];
    r["partitions"] = sizes;
  }
  return r;
}

}  // namespace exa
