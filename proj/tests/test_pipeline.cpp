#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "exa/parallel.hpp"
#include "exa/pipeline.hpp"

using namespace exa;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("exa_test_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

PipelineConfig phantom_config(const fs::path& out, const std::string& name) {
  PipelineConfig c;
  PhantomSpec p;
  p.kind = PhantomKind::nested_box;
  p.dims = {40, 40, 40};
  p.noise = 0.1;
  p.seed = 7;
  c.phantom = p;
  c.resample = false;
  c.ao_rays = 8;
  c.out_dir = out;
  c.name = name;
  return c;
}

std::vector<std::uint8_t> bytes_of(const fs::path& p) { return read_file(p); }

std::set<std::string> listing(const fs::path& dir) {
  std::set<std::string> s;
  for (const auto& e : fs::directory_iterator(dir)) s.insert(e.path().filename().string());
  return s;
}

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult cli(const std::string& args) {
  CliResult r;
  const std::string cmd = std::string(EXA_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

}  // namespace

TEST(Pipeline, StageNames) {
  EXPECT_EQ(parse_stage("all"), Stage::exports);
  EXPECT_EQ(parse_stage("export"), Stage::exports);
  EXPECT_STREQ(stage_name(parse_stage("features")), "features");
  EXPECT_THROW(parse_stage("render"), std::invalid_argument);
}

TEST(Pipeline, PreprocessOnlyWritesNothing) {
  auto dir = temp_dir("pre");
  auto c = phantom_config(dir, "p");
  c.last_stage = Stage::preprocess;
  auto r = run_pipeline(c);
  EXPECT_TRUE(r.artifacts.empty());
  EXPECT_TRUE(listing(dir).empty());
  EXPECT_GT(r.report["tau"].get<double>(), 0.0);
  EXPECT_LT(r.report["tau"].get<double>(), 1.0);
  EXPECT_GT(r.report["snr_db"]["denoised"].get<double>(), r.report["snr_db"]["input"].get<double>());
}

TEST(Pipeline, ExtractStageWritesOnlyExa) {
  auto dir = temp_dir("extract");
  auto c = phantom_config(dir, "e");
  c.last_stage = Stage::extract;
  auto r = run_pipeline(c);
  EXPECT_EQ(listing(dir), std::set<std::string>{"e.extract.exa"});
  ASSERT_EQ(r.artifacts.size(), 1u);
  auto x = exa_read(dir / "e.extract.exa");
  EXPECT_EQ(x.find(kDpos), nullptr);
  EXPECT_EQ(x.find(kFeat), nullptr);
  EXPECT_EQ(exa_decode(x).edges.size(), r.report["active_edges"].get<std::size_t>());
}

TEST(Pipeline, FullRunArtifactsAndReport) {
  auto dir = temp_dir("full");
  auto c = phantom_config(dir, "f");
  c.exports = {ExportFormat::ply, ExportFormat::stl, ExportFormat::obj, ExportFormat::bundle};
  c.fill_holes = true;
  auto r = run_pipeline(c);
  EXPECT_EQ(listing(dir), (std::set<std::string>{"f.extract.exa", "f.smooth.exa", "f.features.exa", "f.ply", "f.stl",
                                                 "f.obj", "f.bundle"}));
  const auto& rep = r.report;
  const std::size_t nv = rep["vertices"];
  EXPECT_EQ(r.mesh.vertex_count(), nv);
  std::size_t total = 0;
  for (auto s : rep["partitions"]) total += s.get<std::size_t>();
  EXPECT_EQ(total, nv);
  EXPECT_DOUBLE_EQ(rep["bits_per_vertex"]["FEAT"].get<double>(), 8.0 * (8 + 2.0 * nv) / nv);
  EXPECT_EQ(rep["holes"]["loops"], 0);
  const std::set<std::string> rows{"import",    "estimate", "denoise", "extract", "encode",    "export",
                                   "mesh",      "smooth",   "deltas",  "curvature", "traversal", "ao",
                                   "fill_holes", "export_mesh"};
  std::set<std::string> seen;
  for (const auto& s : rep["stages"]) seen.insert(s["name"].get<std::string>());
  EXPECT_EQ(seen, rows);
  auto audit = audit_triangles(r.mesh.positions, r.mesh.triangles);
  EXPECT_TRUE(audit.closed_manifold());
  auto ply = read_ply(dir / "f.ply");
  EXPECT_EQ(ply.triangles, r.mesh.triangles);
  EXPECT_EQ(ply.attributes, r.mesh.attributes);
}

TEST(Pipeline, SameSeedRerunIsByteIdentical) {
  auto a = temp_dir("rerun_a"), b = temp_dir("rerun_b");
  auto ca = phantom_config(a, "r"), cb = phantom_config(b, "r");
  ca.exports = cb.exports = {ExportFormat::ply, ExportFormat::bundle};
  set_threads(1);
  run_pipeline(ca);
  set_threads(4);
  run_pipeline(cb);
  set_threads(0);
  for (auto f : {"r.extract.exa", "r.smooth.exa", "r.features.exa", "r.ply", "r.bundle/manifest.json",
                 "r.bundle/positions.f32", "r.bundle/indices.u32", "r.bundle/features.u16"})
    EXPECT_EQ(bytes_of(a / f), bytes_of(b / f)) << f;
  auto cc = phantom_config(temp_dir("rerun_c"), "r");
  cc.phantom->seed = 8;
  cc.last_stage = Stage::extract;
  run_pipeline(cc);
  EXPECT_NE(bytes_of(cc.out_dir / "r.extract.exa"), bytes_of(a / "r.extract.exa"));
}

TEST(Pipeline, ContainerReproducesMesh) {
  auto dir = temp_dir("roundtrip");
  auto c = phantom_config(dir, "m");
  c.last_stage = Stage::features;
  auto r = run_pipeline(c);
  auto back = mesh_from_exa(exa_read(dir / "m.features.exa"));
  EXPECT_EQ(back.positions, r.mesh.positions);
  EXPECT_EQ(back.triangles, r.mesh.triangles);
  EXPECT_EQ(back.attributes, r.mesh.attributes);
  // The smooth container carries geometry but no attributes.
  auto smooth = mesh_from_exa(exa_read(dir / "m.smooth.exa"));
  EXPECT_EQ(smooth.positions, r.mesh.positions);
  EXPECT_TRUE(smooth.attributes.empty());
  auto x = exa_read(dir / "m.features.exa");
  x.sections.erase(std::remove_if(x.sections.begin(), x.sections.end(), [](auto& s) { return s.tag == kDnrm; }),
                   x.sections.end());
  EXPECT_THROW(mesh_from_exa(x), FormatError);
}

TEST(Pipeline, ResumeFromExtractContainer) {
  auto dir = temp_dir("resume");
  auto c = phantom_config(dir, "a");
  c.last_stage = Stage::features;
  auto full = run_pipeline(c);
  PipelineConfig r;
  r.input = (dir / "a.extract.exa").string();
  r.ao_rays = 8;
  r.out_dir = dir;
  r.name = "b";
  r.last_stage = Stage::features;
  auto resumed = run_pipeline(r);
  EXPECT_EQ(bytes_of(dir / "a.features.exa"), bytes_of(dir / "b.features.exa"));
  EXPECT_EQ(resumed.report["vertices"], full.report["vertices"]);
  EXPECT_FALSE(fs::exists(dir / "b.extract.exa"));
}

TEST(Pipeline, ErrorsNameTheStage) {
  auto dir = temp_dir("errors");
  PipelineConfig c;
  c.input = (dir / "missing.json").string();
  c.out_dir = dir;
  try {
    run_pipeline(c);
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage_name, "preprocess");
  }
  auto bad = phantom_config(dir, "bad");
  bad.k1_thresh = 0.5;
  try {
    run_pipeline(bad);
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage_name, "features");
  }
  auto bad_prec = phantom_config(dir, "bad2");
  bad_prec.precision = 0;
  try {
    run_pipeline(bad_prec);
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage_name, "extract");
  }
}

TEST(Pipeline, ReportStats) {
  auto dir = temp_dir("stats");
  auto c = phantom_config(dir, "s");
  c.exports = {ExportFormat::bundle};
  auto r = run_pipeline(c);
  auto st = report_stats(dir / "s.features.exa");
  EXPECT_EQ(st["kind"], "exa");
  EXPECT_EQ(st["vertices"], r.report["vertices"]);
  EXPECT_EQ(st["triangles"], r.report["triangles"]);
  EXPECT_EQ(st["bytes"], fs::file_size(dir / "s.features.exa"));
  EXPECT_EQ(st["partitions"], r.report["partitions"]);
  EXPECT_EQ(st["sections"]["FEAT"]["bytes"], 8 + 2 * r.report["vertices"].get<std::size_t>());
  auto bs = report_stats(dir / "s.bundle");
  EXPECT_EQ(bs["kind"], "bundle");
  EXPECT_EQ(bs["triangles"], r.report["exported_triangles"]);

  exa_write(dir / "empty.exa", exa_encode(Volume3D(Dims{8, 8, 8}, 0.0f), 1.0f, 8));
  auto es = report_stats(dir / "empty.exa");
  EXPECT_EQ(es["vertices"], 0);
  EXPECT_EQ(es["triangles"], 0);
  EXPECT_EQ(es["active_edges"], 0);
  EXPECT_THROW(report_stats(dir / "none.exa"), IoError);
}

TEST(Cli, RunWritesReportAndArtifacts) {
  auto dir = temp_dir("cli_run");
  auto r = cli("run --phantom nested-box --phantom-dims 40x40x40 --noise 0.1 --seed 7 --no-resample --ao-rays 8 "
               "--export ply,stl,bundle --fill-holes --out " + dir.string() + " --name c");
  ASSERT_EQ(r.code, 0) << r.out;
  auto printed = json::parse(r.out);
  auto rep = read_json(dir / "c.report.json");
  EXPECT_EQ(rep["status"], "ok");
  EXPECT_EQ(printed["vertices"], rep["vertices"]);
  EXPECT_TRUE(fs::exists(dir / "c.stl"));
  EXPECT_TRUE(fs::exists(dir / "c.bundle" / "manifest.json"));
  EXPECT_EQ(rep["artifacts"].size(), 6u);

  // Same run through the library gives the same container bytes.
  auto lib = temp_dir("cli_lib");
  run_pipeline(phantom_config(lib, "c"));
  EXPECT_EQ(bytes_of(lib / "c.features.exa"), bytes_of(dir / "c.features.exa"));

  auto rs = cli("report " + (dir / "c.features.exa").string());
  ASSERT_EQ(rs.code, 0);
  EXPECT_EQ(json::parse(rs.out)["vertices"], rep["vertices"]);
  auto ex = cli("export " + (dir / "c.features.exa").string() + " " + (dir / "x.obj").string() + " --format obj");
  EXPECT_EQ(ex.code, 0);
  EXPECT_GT(fs::file_size(dir / "x.obj"), 0u);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  auto dir = temp_dir("cli_config");
  std::ofstream(dir / "cfg.json") << json{{"phantom", "nested-box"}, {"phantom-dims", "40x40x40"}, {"no-resample", true},
                                          {"precision", 6},          {"stages", "extract"},      {"name", "fromcfg"},
                                          {"out", dir.string()}}
                                         .dump();
  auto r = cli("run --config " + (dir / "cfg.json").string() + " --precision 5");
  ASSERT_EQ(r.code, 0) << r.out;
  auto rep = read_json(dir / "fromcfg.report.json");
  EXPECT_EQ(rep["precision"], 5);
  EXPECT_EQ(exa_read(dir / "fromcfg.extract.exa").header.precision, 5);
  EXPECT_FALSE(fs::exists(dir / "fromcfg.smooth.exa"));
  auto r2 = cli("run --config " + (dir / "cfg.json").string() + " --name other");
  ASSERT_EQ(r2.code, 0);
  EXPECT_EQ(read_json(dir / "other.report.json")["precision"], 6);
  EXPECT_NE(cli("run --config " + (dir / "nope.json").string()).code, 0);
}

TEST(Cli, PhantomThenExplicitTau) {
  auto dir = temp_dir("cli_phantom");
  ASSERT_EQ(cli("phantom --kind sphere --dims 16x16x16 --out " + (dir / "s.json").string()).code, 0);
  EXPECT_TRUE(fs::exists(dir / "s.f32"));
  auto r = cli("run --in " + (dir / "s.json").string() + " --no-resample --denoise-iters 0 --tau 6 --stages mesh --out " +
               dir.string() + " --name s");
  ASSERT_EQ(r.code, 0) << r.out;
  auto rep = json::parse(r.out);
  EXPECT_DOUBLE_EQ(rep["tau"].get<double>(), 6.0);
  EXPECT_GT(rep["vertices"].get<int>(), 0);
  EXPECT_TRUE(fs::exists(dir / "s.smooth.exa"));
  EXPECT_FALSE(fs::exists(dir / "s.features.exa"));
}

TEST(Cli, ExitCodes) {
  auto dir = temp_dir("cli_codes");
  EXPECT_NE(cli("").code, 0);
  EXPECT_NE(cli("run --phantom sphere --precision 20 --out " + dir.string()).code, 0);
  EXPECT_NE(cli("run --phantom cube --out " + dir.string()).code, 0);
  EXPECT_NE(cli("run --out " + dir.string()).code, 0);
  EXPECT_NE(cli("run --phantom sphere --bogus 1").code, 0);
  EXPECT_NE(cli("run --phantom sphere --crop 1,2:3,4,5 --out " + dir.string()).code, 0);
  auto missing = cli("run --in " + (dir / "missing.json").string() + " --out " + dir.string() + " --name m");
  EXPECT_EQ(missing.code, 1);
  auto rep = read_json(dir / "m.report.json");
  EXPECT_EQ(rep["status"], "error");
  EXPECT_EQ(rep["stage"], "preprocess");
  EXPECT_EQ(cli("report " + (dir / "missing.exa").string()).code, 1);
  EXPECT_EQ(cli("run --help").code, 0);
}
