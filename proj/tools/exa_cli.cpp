// exa: volume -> EXA -> mesh pipeline driver.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "exa/parallel.hpp"
#include "exa/pipeline.hpp"

namespace {

using nlohmann::json;

exa::PhantomKind parse_phantom_kind(const std::string& s) {
  if (s == "sphere") return exa::PhantomKind::sphere;
  if (s == "nested-box") return exa::PhantomKind::nested_box;
  if (s == "bimodal") return exa::PhantomKind::bimodal_noise;
  throw CLI::ValidationError("--phantom", "expected sphere, nested-box or bimodal");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> numbers(const std::string& s, char sep, std::size_t n, const std::string& flag) {
  const auto parts = split(s, sep);
  if (parts.size() != n) throw CLI::ValidationError(flag, "expected " + std::to_string(n) + " values");
  std::vector<double> v;
  for (const auto& p : parts) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(p, &used));
      if (used != p.size()) throw std::invalid_argument(p);
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "not a number: " + p);
    }
  }
  return v;
}

exa::Dims parse_dims(const std::string& s, const std::string& flag) {
  const auto v = numbers(s, 'x', 3, flag);
  for (double d : v)
    if (d < 1 || d != std::floor(d)) throw CLI::ValidationError(flag, "dims must be positive integers");
  return {static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2])};
}

// Turns a JSON config into argv tokens placed before the real arguments.
std::vector<std::string> config_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  const json cfg = json::parse(in, nullptr, false);
  if (cfg.is_discarded() || !cfg.is_object()) throw std::runtime_error("config must be a JSON object: " + path);
  std::vector<std::string> out;
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back(flag);
    } else if (value.is_string()) {
      out.push_back(flag);
      out.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      out.push_back(flag);
      out.push_back(value.dump());
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& e : value) {
        if (!joined.empty()) joined += ',';
        joined += e.is_string() ? e.get<std::string>() : e.dump();
      }
      out.push_back(flag);
      out.push_back(joined);
    } else {
      throw std::runtime_error("unsupported config value for " + key);
    }
  }
  return out;
}

struct RunOptions {
  std::string in, format = "raw3d", dataset = "/data", crop, tau = "auto", preset, cluster, exports = "ply",
              stages = "all", emphasis = "emphasis-bw", phantom, phantom_dims = "64x64x64", out = "out", name = "exa",
              report;
  int bins = 1024, precision = 8, smooth = 32, vertex = 8, ao_rays = exa::kDefaultAoRays, denoise = 2, threads = 0;
  double f = 2.0, k1 = exa::kDefaultK1Threshold, ao_radius = exa::kDefaultAoRadius, noise = 0.1;
  std::uint64_t seed = 1;
  bool fill_holes = false, no_resample = false;
};

exa::PipelineConfig to_config(const RunOptions& o, const CLI::App& app) {
  exa::PipelineConfig c;
  c.input = o.in;
  if (o.format == "raw3d") c.format = exa::VolumeFormat::raw3d;
  else if (o.format == "hdf5") c.format = exa::VolumeFormat::hdf5;
  else throw CLI::ValidationError("--format", "expected raw3d or hdf5");
  c.hdf5_dataset = o.dataset;
  if (!o.phantom.empty()) {
    exa::PhantomSpec p;
    p.kind = parse_phantom_kind(o.phantom);
    p.dims = parse_dims(o.phantom_dims, "--phantom-dims");
    p.noise = o.noise;
    p.seed = o.seed;
    c.phantom = p;
  } else if (o.in.empty()) {
    throw CLI::RequiredError("--in or --phantom");
  }
  if (!o.crop.empty()) {
    const auto halves = split(o.crop, ':');
    if (halves.size() != 2) throw CLI::ValidationError("--crop", "expected x,y,z:nx,ny,nz");
    const auto off = numbers(halves[0], ',', 3, "--crop");
    const auto size = numbers(halves[1], ',', 3, "--crop");
    for (double v : off)
      if (v < 0) throw CLI::ValidationError("--crop", "offsets must be >= 0");
    c.crop_offset = std::array<std::size_t, 3>{static_cast<std::size_t>(off[0]), static_cast<std::size_t>(off[1]),
                                               static_cast<std::size_t>(off[2])};
    c.crop_size = {static_cast<std::size_t>(size[0]), static_cast<std::size_t>(size[1]),
                   static_cast<std::size_t>(size[2])};
  }
  c.resample = !o.no_resample;
  c.bins = o.bins;
  c.f = o.f;
  if (o.tau != "auto") c.tau = numbers(o.tau, ',', 1, "--tau")[0];
  c.denoise_iters = o.denoise;
  c.precision = o.precision;
  if (!o.preset.empty()) {
    if (o.preset != "tablet") throw CLI::ValidationError("--preset", "only 'tablet' is defined");
    if (app.count("--precision") == 0) c.precision = 4;
  }
  c.smooth_iters = o.smooth;
  c.vertex_iters = o.vertex;
  c.k1_thresh = o.k1;
  c.ao_rays = o.ao_rays;
  c.ao_radius = o.ao_radius;
  if (!o.cluster.empty()) {
    const auto v = numbers(o.cluster, ',', 2, "--cluster");
    c.cluster = std::make_pair(v[0], v[1]);
  }
  c.fill_holes = o.fill_holes;
  c.exports.clear();
  for (const auto& e : split(o.exports, ',')) c.exports.push_back(exa::parse_export_format(e));
  c.emphasis = exa::parse_emphasis(o.emphasis);
  c.last_stage = exa::parse_stage(o.stages);
  c.out_dir = o.out;
  c.name = o.name;
  return c;
}

void add_run_options(CLI::App& run, RunOptions& o) {
  run.add_option("--in", o.in, "input volume (raw3d sidecar .json, .h5) or .exa container");
  run.add_option("--format", o.format, "raw3d | hdf5");
  run.add_option("--hdf5-dataset", o.dataset, "HDF5 dataset path");
  run.add_option("--crop", o.crop, "x,y,z:nx,ny,nz");
  run.add_option("--bins", o.bins, "histogram bins")->check(CLI::PositiveNumber);
  run.add_option("--f", o.f, "threshold factor");
  run.add_option("--tau", o.tau, "auto | <float>");
  run.add_option("--precision", o.precision, "crossing precision bits")->check(CLI::Range(1, 16));
  run.add_option("--preset", o.preset, "tablet (precision 4)");
  run.add_option("--denoise-iters", o.denoise, "joint bilateral iterations")->check(CLI::NonNegativeNumber);
  run.add_flag("--no-resample", o.no_resample, "skip low-pass 2:1 resampling");
  run.add_option("--smooth-iters", o.smooth, "face normal iterations")->check(CLI::NonNegativeNumber);
  run.add_option("--vertex-iters", o.vertex, "vertex update iterations")->check(CLI::NonNegativeNumber);
  run.add_option("--k1-thresh", o.k1, "segmentation curvature threshold (< 0)");
  run.add_option("--ao-rays", o.ao_rays, "rays per vertex")->check(CLI::PositiveNumber);
  run.add_option("--ao-radius", o.ao_radius, "ray length in grid units")->check(CLI::PositiveNumber);
  run.add_option("--cluster", o.cluster, "angle_deg,pos_tol");
  run.add_flag("--fill-holes", o.fill_holes, "close boundary loops before export");
  run.add_option("--export", o.exports, "comma list of ply, obj, stl, bundle");
  run.add_option("--emphasis", o.emphasis, "PLY colour mode");
  run.add_option("--stages", o.stages, "preprocess | extract | mesh | features | export | all");
  run.add_option("--threads", o.threads, "worker threads (0 = default)")->check(CLI::NonNegativeNumber);
  run.add_option("--seed", o.seed, "phantom noise seed");
  run.add_option("--phantom", o.phantom, "sphere | nested-box | bimodal");
  run.add_option("--phantom-dims", o.phantom_dims, "NXxNYxNZ");
  run.add_option("--noise", o.noise, "phantom noise sigma")->check(CLI::NonNegativeNumber);
  run.add_option("--out", o.out, "output directory");
  run.add_option("--name", o.name, "artifact base name");
  run.add_option("--report", o.report, "report path (default <out>/<name>.report.json)");
}

std::vector<std::string> with_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> out;
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (config.empty() || out.empty()) return out;
  auto pre = config_args(config);
  out.insert(out.begin() + 1, pre.begin(), pre.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exa: volume contouring, mesh features and export"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_unused;
  app.add_option("--config", config_unused, "JSON config mirroring the run flags (flags win)");

  RunOptions ro;
  auto* run = app.add_subcommand("run", "run the pipeline");
  add_run_options(*run, ro);

  std::string ph_kind = "nested-box", ph_dims = "64x64x64", ph_out;
  double ph_noise = 0.1;
  std::uint64_t ph_seed = 1;
  auto* phantom = app.add_subcommand("phantom", "write a synthetic raw3d volume");
  phantom->add_option("--kind", ph_kind, "sphere | nested-box | bimodal");
  phantom->add_option("--dims", ph_dims, "NXxNYxNZ");
  phantom->add_option("--noise", ph_noise)->check(CLI::NonNegativeNumber);
  phantom->add_option("--seed", ph_seed);
  phantom->add_option("--out", ph_out, "output path (.json sidecar)")->required();

  std::string rep_path;
  auto* report = app.add_subcommand("report", "summarize an EXA container or bundle");
  report->add_option("path", rep_path)->required();

  std::string ex_in, ex_out, ex_format = "ply", ex_emphasis = "emphasis-bw";
  auto* exp = app.add_subcommand("export", "convert an EXA container to a mesh file");
  exp->add_option("input", ex_in, ".exa container")->required();
  exp->add_option("output", ex_out, "output path")->required();
  exp->add_option("--format", ex_format, "ply | obj | stl | bundle");
  exp->add_option("--emphasis", ex_emphasis, "PLY colour mode");

  std::vector<std::string> args;
  try {
    args = with_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      exa::PipelineConfig cfg = to_config(ro, *run);
      if (ro.threads > 0) exa::set_threads(ro.threads);
      json out;
      int code = 0;
      try {
        exa::PipelineResult r = exa::run_pipeline(cfg);
        out = std::move(r.report);
        out["status"] = "ok";
        json arts = json::array();
        for (const auto& a : r.artifacts) arts.push_back(a.string());
        out["artifacts"] = arts;
      } catch (const exa::PipelineError& e) {
        out["status"] = "error";
        out["stage"] = e.stage_name;
        out["error"] = e.what();
        std::cerr << "error: " << e.what() << "\n";
        code = 1;
      }
      out["threads"] = exa::num_threads();
      const std::filesystem::path rp = ro.report.empty() ? cfg.out_dir / (cfg.name + ".report.json") : std::filesystem::path(ro.report);
      std::error_code ec;
      std::filesystem::create_directories(rp.parent_path().empty() ? std::filesystem::path(".") : rp.parent_path(), ec);
      std::ofstream(rp) << out.dump(2) << "\n";
      std::cout << out.dump(2) << "\n";
      return code;
    }
    if (*phantom) {
      exa::PhantomSpec p;
      p.kind = parse_phantom_kind(ph_kind);
      p.dims = parse_dims(ph_dims, "--dims");
      p.noise = ph_noise;
      p.seed = ph_seed;
      exa::write_raw3d(ph_out, exa::generate_phantom(p));
      return 0;
    }
    if (*report) {
      std::cout << exa::report_stats(rep_path).dump(2) << "\n";
      return 0;
    }
    if (*exp) {
      const exa::TriangleMesh m = exa::mesh_from_exa(exa::exa_read(ex_in));
      exa::export_mesh(m, exa::parse_export_format(ex_format), ex_out, exa::parse_emphasis(ex_emphasis));
      return 0;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
