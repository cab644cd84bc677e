#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "exa/filters.hpp"
#include "exa/mesh.hpp"
#include "exa/mesh_audit.hpp"
#include "exa/mesh_ops.hpp"
#include "exa/parallel.hpp"
#include "exa/smoothing.hpp"

using namespace exa;

namespace {

XQuadMesh raw_mesh(const Volume3D& v, float tau) {
  auto m = build_mesh(extract_contour(v, tau, 8));
  compute_normals(m);
  triangulate_xquads(m);
  return m;
}

XQuadMesh smooth_mesh(const Volume3D& v, float tau) {
  auto m = build_mesh(extract_contour(v, tau, 8));
  compute_normals(m);
  smooth_face_normals(m, 32);
  update_vertex_positions(m, 8);
  triangulate_xquads(m);
  return m;
}

Volume3D ball(Dims d, Vec3 c, double r) {
  return Volume3D::from_function(d, [=](double x, double y, double z) { return r - (Vec3(x, y, z) - c).norm(); });
}

std::string describe(const MeshAudit& a) {
  return "boundary " + std::to_string(a.boundary_edges) + " nonmanifold " + std::to_string(a.nonmanifold_edges) +
         " inconsistent " + std::to_string(a.inconsistent_edges) + " vertices " +
         std::to_string(a.nonmanifold_vertices) + " duplicates " + std::to_string(a.duplicate_triangles);
}

// One cell configuration embedded at (1,1,1) of an otherwise outside 4^3 lattice.
ContourData embed(const CellCase& cc, std::mt19937& rng) {
  ContourData c;
  c.dims = {4, 4, 4};
  c.signs = SignGrid(c.dims);
  for (int k = 0; k < 8; ++k)
    if ((cc.pattern >> k) & 1) c.signs.set(c.signs.index(1 + (k & 1), 1 + ((k >> 1) & 1), 1 + ((k >> 2) & 1)), true);
  derive_active_sets(c);
  for (auto& e : c.edges) e.q = static_cast<std::uint16_t>(rng() % 256);
  for (auto& f : c.facets) {
    const int a = static_cast<int>(f.key % 3);
    const auto p = detail::unflatten(f.key / 3, c.dims);
    f.connected = (cc.facet_bits >> (2 * a + (static_cast<int>(p[a]) - 1))) & 1;
  }
  return c;
}

}  // namespace

TEST(ConfigTable, Census) {
  const auto& t = config_table();
  EXPECT_EQ(t.configurations().size(), 656u);
  EXPECT_EQ(t.case_count(), 328u);
  EXPECT_EQ(t.class_count(), 27);
  std::set<int> split;
  for (const auto& c : t.configurations())
    if (c.vertex_count > static_cast<int>(c.cycles.size())) split.insert(c.symmetry_class);
  EXPECT_EQ(split.size(), 11u);
}

TEST(ConfigTable, TrivialAndSingleCorner) {
  const auto& t = config_table();
  EXPECT_TRUE(t.at(0, 0).cycles.empty());
  EXPECT_EQ(t.at(0, 0).vertex_count, 0);
  EXPECT_TRUE(t.at(255, 0).cycles.empty());
  for (int k = 0; k < 8; ++k) {
    const auto& c = t.at(static_cast<std::uint8_t>(1 << k), 0);
    ASSERT_EQ(c.cycles.size(), 1u);
    EXPECT_EQ(c.cycles[0].segs.size(), 3u);
    EXPECT_EQ(c.vertex_count, 1);
    EXPECT_EQ(c.symmetry_class, t.at(1, 0).symmetry_class);
  }
}

TEST(ConfigTable, EveryActiveEdgeInOneCycleProperty) {
  std::size_t fills = 0;
  for (const auto& c : config_table().configurations()) {
    std::array<int, 12> hits{};
    for (const auto& cyc : c.cycles)
      for (const auto& s : cyc.segs) {
        ++hits[s.e0];
        ++hits[s.e1];
      }
    for (int e = 0; e < 12; ++e) {
      const bool active = ((c.pattern >> cell::edge_lower_corner(e)) & 1) != ((c.pattern >> cell::edge_upper_corner(e)) & 1);
      EXPECT_EQ(hits[e], active ? 2 : 0) << int(c.pattern) << " edge " << e;
    }
    // Two dual vertices per cycle, three only where a fill triangle closes the gap.
    EXPECT_LE(c.vertex_count, 2 * static_cast<int>(c.cycles.size()) + static_cast<int>(c.fills.size()));
    fills += c.fills.size();
  }
  EXPECT_EQ(fills, 8u);
}

TEST(Manifold, AllEmbeddedConfigurations) {
  std::mt19937 rng(5);
  std::size_t checked = 0;
  for (const auto& cc : config_table().configurations()) {
    if (cc.pattern == 0 || cc.pattern == 255) continue;
    auto c = embed(cc, rng);
    const std::uint64_t center = c.signs.index(1, 1, 1);
    ASSERT_EQ(&config_table().at(cc.pattern, detail::cell_facet_bits(c, center, cc.pattern)), &cc);
    auto m = build_mesh(c);
    compute_normals(m);
    triangulate_xquads(m);
    const auto a = audit_triangles(m.positions, m.triangles);
    EXPECT_TRUE(a.closed_manifold()) << "pattern " << int(cc.pattern) << " bits " << int(cc.facet_bits) << " "
                                     << describe(a);
    ++checked;
  }
  EXPECT_EQ(checked, 654u);
}

TEST(Manifold, RandomSmoothedVolumes) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::normal_distribution<double> g;
    std::mt19937_64 r(s);
    std::vector<float> v(32 * 32 * 32);
    for (auto& x : v) x = static_cast<float>(g(r));
    auto vol = pad_volume(gauss3(gauss3(Volume3D(Dims{32, 32, 32}, v))), 1, -100.0f);
    auto m = raw_mesh(vol, 0.0f);
    const auto a = audit_triangles(m.positions, m.triangles);
    EXPECT_TRUE(a.closed_manifold()) << "seed " << s << " " << describe(a);
  }
}

TEST(Manifold, SphereEulerAndOrientation) {
  auto m = raw_mesh(ball({64, 64, 64}, {31.3, 31.6, 31.45}, 20), 0.0f);
  const auto a = audit_triangles(m.positions, m.triangles);
  EXPECT_TRUE(a.closed_manifold()) << describe(a);
  EXPECT_EQ(a.euler, 2);
  const double exact = 4.0 / 3.0 * std::numbers::pi * 8000;
  EXPECT_GT(a.signed_volume, 0.0);
  EXPECT_NEAR(a.signed_volume, exact, 0.02 * exact);
}

TEST(Manifold, SingleVoxelIsClosedOctahedronLike) {
  std::vector<float> v(5 * 5 * 5, 0.0f);
  v[(2 * 5 + 2) * 5 + 2] = 1.0f;
  auto m = raw_mesh(Volume3D(Dims{5, 5, 5}, v), 0.5f);
  EXPECT_EQ(m.vertex_count(), 8u);
  EXPECT_EQ(m.face_count(), 6u);
  const auto a = audit_triangles(m.positions, m.triangles);
  EXPECT_TRUE(a.closed_manifold());
  EXPECT_EQ(a.euler, 2);
  EXPECT_GT(a.signed_volume, 0.0);
}

TEST(Triangulation, OctagonGivesSixTriangles) {
  std::vector<std::array<int, 3>> out;
  detail::triangulate_polygon(8, [](int i, int j) { return std::pair<double, double>{0.0, double(j - i)}; }, out);
  ASSERT_EQ(out.size(), 6u);
  // Each side of the octagon is used once, each chord twice.
  std::map<std::pair<int, int>, int> use;
  for (auto t : out)
    for (int k = 0; k < 3; ++k) ++use[{std::min(t[k], t[(k + 1) % 3]), std::max(t[k], t[(k + 1) % 3])}];
  for (auto [e, n] : use) {
    const bool side = e.second - e.first == 1 || (e.first == 0 && e.second == 7);
    EXPECT_EQ(n, side ? 1 : 2);
  }
  EXPECT_EQ(use.size(), 8u + 5u);
}

TEST(Triangulation, PolygonCountsProperty) {
  auto m = build_mesh(extract_contour(ball({40, 40, 40}, {19.7, 20.2, 19.9}, 13), 0.0f, 8));
  compute_normals(m);
  triangulate_xquads(m);
  std::vector<int> per_face(m.face_count(), 0);
  for (auto f : m.triangle_face) ++per_face[f];
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    EXPECT_GE(m.face(f).size(), 3u);
    EXPECT_LE(m.face(f).size(), 8u);
    EXPECT_LE(per_face[f], static_cast<int>(m.face(f).size()) - 2);
  }
}

TEST(Normals, PointOutwardOnBall) {
  const Vec3 c(31.3, 31.6, 31.45);
  auto m = raw_mesh(ball({64, 64, 64}, c, 20), 0.0f);
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    EXPECT_NEAR(m.vertex_normals[v].norm(), 1.0, 1e-9);
    EXPECT_GT(m.vertex_normals[v].dot((m.positions[v] - c).normalized()), 0.9);
  }
}

TEST(Smoothing, WeightedVectorMedian) {
  std::vector<Vec3> x{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {50, 50, 0}};
  auto med = weighted_vector_median(x, {1, 1, 1, 1}, 200);
  EXPECT_LT(med.norm(), 1.0);
  auto one = weighted_vector_median({{2, 3, 4}}, {1}, 8);
  EXPECT_TRUE(one.isApprox(Vec3(2, 3, 4)));
}

TEST(Smoothing, UnitNormalsAndBoundedSteps) {
  auto m = build_mesh(extract_contour(ball({48, 48, 48}, {23.6, 24.1, 23.8}, 15), 0.0f, 8));
  compute_normals(m);
  smooth_face_normals(m, 4);
  for (const auto& n : m.face_normals) EXPECT_NEAR(n.norm(), 1.0, 1e-9);
  auto before = m.positions;
  update_vertex_positions(m, 1);
  for (std::size_t v = 0; v < m.vertex_count(); ++v)
    EXPECT_LE((m.positions[v] - before[v]).norm(), kMaxVertexStep + 1e-12);
  EXPECT_THROW(smooth_face_normals(m, 0), std::invalid_argument);
  EXPECT_THROW(update_vertex_positions(m, 0), std::invalid_argument);
}

TEST(Smoothing, ReducesRadialError) {
  const Vec3 c(31.3, 31.6, 31.45);
  auto v = ball({64, 64, 64}, c, 20);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 0.3);
  std::vector<float> noisy = v.values();
  for (auto& x : noisy) x += static_cast<float>(g(rng));
  auto rms = [&](const XQuadMesh& m) {
    double s = 0;
    for (const auto& p : m.positions) s += std::pow((p - c).norm() - 20, 2);
    return std::sqrt(s / m.vertex_count());
  };
  Volume3D nv(v.dims(), noisy);
  auto a = raw_mesh(nv, 0.0f);
  auto b = smooth_mesh(nv, 0.0f);
  EXPECT_LT(rms(b), rms(a));
  const auto audit = audit_triangles(b.positions, b.triangles);
  EXPECT_EQ(audit.nonmanifold_edges, 0u);
}

TEST(Smoothing, ThreadCountInvariant) {
  auto v = ball({40, 40, 40}, {19.7, 20.2, 19.9}, 13);
  set_threads(1);
  auto a = smooth_mesh(v, 0.0f);
  set_threads(8);
  auto b = smooth_mesh(v, 0.0f);
  set_threads(0);
  EXPECT_EQ(a.positions, b.positions);
  EXPECT_EQ(a.triangles, b.triangles);
}

TEST(Clustering, PlaneCollapsesStrongly) {
  auto plane = Volume3D::from_function({64, 64, 64}, [](double, double, double z) { return 30.3 - z; });
  auto t = to_triangle_mesh(smooth_mesh(plane, 0.0f));
  auto c = cluster_vertices(t, 10, 0.1);
  EXPECT_GT(1.0 - double(c.triangle_count()) / t.triangle_count(), 0.9);
  for (const auto& p : c.positions) EXPECT_NEAR(p.z(), 30.3, 0.1);
  const auto a = audit_triangles(c.positions, c.triangles);
  EXPECT_EQ(a.nonmanifold_edges, 0u);
  EXPECT_EQ(a.inconsistent_edges, 0u);
  EXPECT_EQ(a.boundary_edges, audit_triangles(t.positions, t.triangles).boundary_edges);
}

TEST(Clustering, ZeroAngleIsNoOpAndBadTolerancesThrow) {
  auto t = to_triangle_mesh(raw_mesh(ball({24, 24, 24}, {11.6, 11.4, 11.5}, 7), 0.0f));
  auto same = cluster_vertices(t, 0, 0.1);
  EXPECT_EQ(same.positions, t.positions);
  EXPECT_EQ(same.triangles, t.triangles);
  EXPECT_THROW(cluster_vertices(t, -1, 0.1), std::invalid_argument);
  EXPECT_THROW(cluster_vertices(t, 5, 0), std::invalid_argument);
  EXPECT_THROW(cluster_vertices(t, 5, -1), std::invalid_argument);
}

TEST(Clustering, SphereStaysManifoldAndNearSurface) {
  const Vec3 c(31.3, 31.6, 31.45);
  auto t = to_triangle_mesh(smooth_mesh(ball({64, 64, 64}, c, 20), 0.0f));
  for (auto [ang, pos] : {std::pair{5.0, 0.05}, {20.0, 0.2}, {60.0, 1.0}}) {
    auto m = cluster_vertices(t, ang, pos);
    EXPECT_LT(m.triangle_count(), t.triangle_count());
    const auto a = audit_triangles(m.positions, m.triangles);
    EXPECT_TRUE(a.closed_manifold()) << ang << " " << describe(a);
    EXPECT_EQ(a.euler, 2);
    for (const auto& p : m.positions) EXPECT_LT(std::abs((p - c).norm() - 20), 0.2 + pos);
  }
}

TEST(HoleFilling, HexagonMinArea) {
  std::vector<Vec3> hex;
  for (int i = 0; i < 6; ++i) hex.emplace_back(std::cos(i * std::numbers::pi / 3), std::sin(i * std::numbers::pi / 3), 0);
  auto tris = min_area_triangulation(hex);
  ASSERT_EQ(tris.size(), 4u);
  double area = 0;
  for (auto t : tris) area += triangle_area(hex[t[0]], hex[t[1]], hex[t[2]]);
  EXPECT_NEAR(area, 1.5 * std::sqrt(3.0), 1e-12);
}

TEST(HoleFilling, ClosesRemovedCap) {
  auto t = to_triangle_mesh(raw_mesh(ball({40, 40, 40}, {19.7, 20.2, 19.9}, 13), 0.0f));
  std::vector<std::uint8_t> keep(t.triangle_count(), 1);
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto& tr = t.triangles[i];
    if (t.positions[tr[0]].z() > 31 || t.positions[tr[1]].z() > 31 || t.positions[tr[2]].z() > 31) {
      keep[i] = 0;
      ++dropped;
    }
  }
  ASSERT_GT(dropped, 0u);
  auto open = submesh(t, keep);
  ASSERT_GT(audit_triangles(open.positions, open.triangles).boundary_edges, 0u);
  HoleFillReport rep;
  auto closed = fill_holes(open, 256, &rep);
  EXPECT_EQ(rep.loops, 1u);
  EXPECT_EQ(rep.filled, 1u);
  const auto a = audit_triangles(closed.positions, closed.triangles);
  EXPECT_TRUE(a.closed_manifold()) << describe(a);
  EXPECT_EQ(a.euler, 2);
  EXPECT_GT(a.signed_volume, 0.0);
  std::size_t synthetic = 0;
  for (auto s : closed.synthetic) synthetic += s;
  EXPECT_EQ(synthetic, rep.triangles_added);
  // A loop longer than the limit is left open.
  HoleFillReport small;
  fill_holes(open, 3, &small);
  EXPECT_EQ(small.too_long, 1u);
}

TEST(HoleFilling, ClosedMeshIsNoOp) {
  auto t = to_triangle_mesh(raw_mesh(ball({24, 24, 24}, {11.6, 11.4, 11.5}, 7), 0.0f));
  HoleFillReport rep;
  auto f = fill_holes(t, 256, &rep);
  EXPECT_EQ(rep.loops, 0u);
  EXPECT_EQ(f.triangles, t.triangles);
}

TEST(Submesh, PartitionExtraction) {
  auto t = to_triangle_mesh(raw_mesh(ball({24, 24, 24}, {11.6, 11.4, 11.5}, 7), 0.0f));
  t.attributes.resize(t.vertex_count());
  for (std::size_t v = 0; v < t.vertex_count(); ++v) t.attributes[v].partition = t.positions[v].x() < 11.6 ? 1 : 2;
  auto a = extract_partition(t, 1), b = extract_partition(t, 2);
  EXPECT_GT(a.triangle_count(), 0u);
  EXPECT_GT(b.triangle_count(), 0u);
  EXPECT_LT(a.triangle_count() + b.triangle_count(), t.triangle_count());
  for (const auto& at : a.attributes) EXPECT_EQ(at.partition, 1);
  EXPECT_THROW(submesh(t, {1, 0}), std::invalid_argument);
}
