#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "exa/ambient_occlusion.hpp"
#include "exa/curvature.hpp"
#include "exa/delta_codec.hpp"
#include "exa/feature_word.hpp"
#include "exa/mesh.hpp"
#include "exa/parallel.hpp"
#include "exa/segmentation.hpp"
#include "exa/smoothing.hpp"

using namespace exa;

namespace {

XQuadMesh smooth_mesh(const Volume3D& v, float tau) {
  auto m = build_mesh(extract_contour(v, tau, 8));
  compute_normals(m);
  smooth_face_normals(m, 32);
  update_vertex_positions(m, 8);
  triangulate_xquads(m);
  return m;
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

// Solid shell between two concentric spheres; the inner surface bounds a closed cavity.
Volume3D hollow_ball(double inner, double outer) {
  const Vec3 c(23.4, 23.7, 23.55);
  return Volume3D::from_function({48, 48, 48}, [=](double x, double y, double z) {
    const double r = (Vec3(x, y, z) - c).norm();
    return std::min(r - inner, outer - r);
  });
}

}  // namespace

TEST(PairCurvature, CircleChordsGiveInverseRadius) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 200; ++i) {
    const double R = 2 + 30 * std::abs(u(rng)), a = u(rng), b = u(rng);
    if (std::abs(a - b) < 1e-3) continue;
    const Vec3 n1(std::cos(a), std::sin(a), 0), n2(std::cos(b), std::sin(b), 0);
    EXPECT_NEAR(pair_curvature(R * n1, n1, R * n2, n2), 1.0 / R, 1e-12);
    EXPECT_NEAR(pair_curvature(R * n1, -n1, R * n2, -n2), -1.0 / R, 1e-12);
  }
  EXPECT_TRUE(std::isnan(pair_curvature(Vec3(1, 2, 3), Vec3::UnitZ(), Vec3(1, 2, 3), Vec3::UnitX())));
  EXPECT_EQ(pair_curvature(Vec3::Zero(), Vec3::UnitZ(), Vec3(3, 1, 0), Vec3::UnitZ()), 0.0);
}

TEST(ShapeCode, ReferenceShapes) {
  const double k = 0.2;
  EXPECT_EQ(classify_shape(0.001, -0.001), 0);
  EXPECT_EQ(classify_shape(0, 0), 0);
  EXPECT_EQ(shape_bin_of(classify_shape(k, k)), 0);     // convex cap
  EXPECT_EQ(shape_bin_of(classify_shape(k, 0)), 2);     // convex cylinder
  EXPECT_EQ(shape_bin_of(classify_shape(k, -k)), 4);    // saddle
  EXPECT_EQ(shape_bin_of(classify_shape(0, -k)), 6);    // concave cylinder
  EXPECT_EQ(shape_bin_of(classify_shape(-k, -k)), 8);   // concave cap
  EXPECT_EQ(shape_bin_of(0), -1);
  // c = 0.2, c_min = 1/64: floor(2 log2(12.8)) = 7.
  EXPECT_EQ(curvedness_bin_of(classify_shape(0.2, 0)), 7);
  EXPECT_EQ(classify_shape(-100, -100), 126);
  EXPECT_THROW(classify_shape(0, 1), std::invalid_argument);
  EXPECT_THROW(classify_shape(1, 0, 0), std::invalid_argument);
}

TEST(ShapeCode, CodesCoverSevenBits) {
  std::set<int> codes{0};
  for (int sb = 0; sb < 9; ++sb)
    for (int cb = 0; cb < 14; ++cb) {
      const double phi = std::numbers::pi / 4 + (sb + 0.5) * std::numbers::pi / 9;
      const double c = kDefaultCMin * std::exp2((cb + 0.5) / 2);
      const int code = classify_shape(c * std::sin(phi), c * std::cos(phi));
      EXPECT_EQ(shape_bin_of(static_cast<std::uint8_t>(code)), sb);
      EXPECT_EQ(curvedness_bin_of(static_cast<std::uint8_t>(code)), cb);
      codes.insert(code);
    }
  EXPECT_EQ(codes.size(), 127u);
  EXPECT_EQ(*codes.rbegin(), 126);
}

TEST(ShapeCode, ScaleCovarianceAndMirrorProperty) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  int checked = 0;
  for (int i = 0; i < 20000; ++i) {
    double a = u(rng), b = u(rng);
    const double k1 = std::max(a, b), k2 = std::min(a, b);
    const double c = std::hypot(k1, k2);
    const double lc = 2 * std::log2(c / kDefaultCMin);
    const double sp = 9 * (shape_angle(k1, k2) - std::numbers::pi / 4) / std::numbers::pi;
    // Stay away from bin edges and clamps.
    if (lc < 0.5 || lc > 11.5 || std::abs(lc - std::round(lc)) < 1e-6 || std::abs(sp - std::round(sp)) < 1e-6) continue;
    const auto code = classify_shape(k1, k2);
    const auto scaled = classify_shape(std::sqrt(2.0) * k1, std::sqrt(2.0) * k2);
    EXPECT_EQ(curvedness_bin_of(scaled), curvedness_bin_of(code) + 1);
    EXPECT_EQ(shape_bin_of(scaled), shape_bin_of(code));
    const auto mirror = classify_shape(-k2, -k1);
    EXPECT_EQ(shape_bin_of(mirror), 8 - shape_bin_of(code));
    EXPECT_EQ(curvedness_bin_of(mirror), curvedness_bin_of(code));
    ++checked;
  }
  EXPECT_GT(checked, 10000);
}

TEST(Curvature, TensorFitRecoversPrincipalCurvatures) {
  // Samples k(theta) = k1 cos^2 + k2 sin^2 around a known frame.
  const Vec3 n = Vec3(0.3, -0.2, 0.9).normalized();
  auto [t, b] = tangent_frame(n);
  std::vector<std::pair<double, Vec3>> s;
  for (int i = 0; i < 8; ++i) {
    const double th = 0.4 + i * std::numbers::pi / 8;
    s.emplace_back(0.3 * std::cos(th) * std::cos(th) - 0.1 * std::sin(th) * std::sin(th),
                   std::cos(th) * t + std::sin(th) * b + 0.05 * n);
  }
  const auto k = fit_curvature_tensor(n, s);
  EXPECT_NEAR(k.k1, 0.3, 1e-9);
  EXPECT_NEAR(k.k2, -0.1, 1e-9);
}

TEST(Curvature, BallMedianNearInverseRadius) {
  const Vec3 c(31.3, 31.6, 31.45);
  auto m = smooth_mesh(Volume3D::from_function({64, 64, 64}, [&](double x, double y, double z) {
                         return 20 - (Vec3(x, y, z) - c).norm();
                       }),
                       0.0f);
  auto k = estimate_curvatures(m);
  std::vector<double> a, b;
  for (const auto& p : k) {
    EXPECT_GE(p.k1, p.k2);
    a.push_back(p.k1);
    b.push_back(p.k2);
  }
  EXPECT_NEAR(median(a), 0.05, 0.15 * 0.05);
  EXPECT_NEAR(median(b), 0.05, 0.15 * 0.05);
}

TEST(Curvature, CylinderAndPlane) {
  auto cyl = smooth_mesh(Volume3D::from_function({48, 48, 48}, [](double x, double y, double) {
                           return 15 - std::hypot(x - 23.3, y - 23.6);
                         }),
                         0.0f);
  auto kc = estimate_curvatures(cyl);
  std::vector<double> a, b;
  for (std::size_t v = 0; v < kc.size(); ++v) {
    const double z = cyl.positions[v].z();
    if (z < 8 || z > 39) continue;
    a.push_back(kc[v].k1);
    b.push_back(kc[v].k2);
  }
  const double k1 = median(a), k2 = median(b);
  EXPECT_NEAR(k1, 1.0 / 15, 0.15 / 15);
  EXPECT_LE(std::abs(k2), 0.2 * k1);

  auto plane = smooth_mesh(Volume3D::from_function({48, 48, 48}, [](double, double, double z) { return 20.3 - z; }), 0.0f);
  auto kp = estimate_curvatures(plane);
  std::size_t flat = 0, n = 0;
  for (std::size_t v = 0; v < kp.size(); ++v) {
    const auto& p = plane.positions[v];
    if (p.x() < 3 || p.x() > 44 || p.y() < 3 || p.y() > 44) continue;
    ++n;
    flat += classify_shape(kp[v].k1, kp[v].k2) == 0;
  }
  EXPECT_GE(flat, 0.99 * n);
  EXPECT_THROW(estimate_curvatures(build_mesh(extract_contour(hollow_ball(4, 14), 0.0f))), std::invalid_argument);
}

TEST(Segmentation, HandBuiltStrip) {
  // Two triangles joined at vertex 2.
  std::vector<std::array<std::uint32_t, 3>> tris{{0, 1, 2}, {2, 3, 4}};
  std::vector<CurvaturePair> k(5);
  auto whole = segment_mesh(5, tris, k);
  EXPECT_EQ(whole.components, 1u);
  EXPECT_EQ(whole.labels, std::vector<std::uint8_t>(5, 1));
  k[2] = {-0.6, -0.8};
  auto cut = segment_mesh(5, tris, k);
  EXPECT_EQ(cut.components, 2u);
  EXPECT_EQ(cut.labels, (std::vector<std::uint8_t>{1, 1, 0, 2, 2}));
  EXPECT_EQ(cut.sizes[0], 1u);
  // Only the smaller curvature decides.
  k[2] = {0.6, -0.4};
  EXPECT_EQ(segment_mesh(5, tris, k).components, 1u);
  EXPECT_THROW(segment_mesh(5, tris, k, 0.0), std::invalid_argument);
  EXPECT_THROW(segment_mesh(4, tris, k), std::invalid_argument);
}

TEST(Segmentation, CapsAtSevenLabels) {
  std::vector<std::array<std::uint32_t, 3>> tris;
  // Nine separate triangles.
  for (std::uint32_t i = 0; i < 9; ++i) tris.push_back({3 * i, 3 * i + 1, 3 * i + 2});
  std::vector<CurvaturePair> k(27);
  auto s = segment_mesh(27, tris, k);
  EXPECT_EQ(s.components, 9u);
  EXPECT_EQ(s.merged_components, 2u);
  EXPECT_EQ(s.sizes[7], 9u);
  for (int l = 1; l < 7; ++l) EXPECT_EQ(s.sizes[l], 3u);
}

TEST(Segmentation, PartitionProperty) {
  PhantomSpec p;
  p.kind = PhantomKind::nested_box;
  auto m = smooth_mesh(generate_phantom(p), 0.5f);
  auto k = estimate_curvatures(m);
  auto s = segment_mesh(m.vertex_count(), m.triangles, k);
  std::size_t total = 0;
  for (auto z : s.sizes) total += z;
  EXPECT_EQ(total, m.vertex_count());
  for (int l = 2; l < 7; ++l) EXPECT_LE(s.sizes[l], s.sizes[l - 1]);
  EXPECT_GE(s.components, 2u);
  for (const auto& t : m.triangles)
    for (int e = 0; e < 3; ++e) {
      const auto a = s.labels[t[e]], b = s.labels[t[(e + 1) % 3]];
      if (a && b) {
        EXPECT_EQ(a, b);
      }
    }
}

TEST(Segmentation, SphereIsOnePartition) {
  const Vec3 c(23.4, 23.7, 23.55);
  auto m = smooth_mesh(Volume3D::from_function({48, 48, 48}, [&](double x, double y, double z) {
                         return 15 - (Vec3(x, y, z) - c).norm();
                       }),
                       0.0f);
  auto s = segment_mesh(m.vertex_count(), m.triangles, estimate_curvatures(m));
  EXPECT_EQ(s.components, 1u);
  EXPECT_EQ(s.sizes[1], m.vertex_count());
}

TEST(AmbientOcclusion, AngleWeightPeak) {
  double best = 0, arg = 0;
  for (int i = 0; i <= 1000000; ++i) {
    const double phi = i * (std::numbers::pi / 2) / 1000000;
    const double w = ao_angle_weight(phi);
    if (w > best) best = w, arg = phi;
  }
  EXPECT_NEAR(arg, std::atan(std::sqrt(2.0)), 0.01);
  EXPECT_NEAR(best, 0.6204, 1e-4);
  EXPECT_EQ(ao_angle_weight(0), 0.0);
  EXPECT_NEAR(ao_angle_weight(std::numbers::pi / 2), 0.0, 1e-7);
}

TEST(AmbientOcclusion, FibonacciHemisphere) {
  const Vec3 n = Vec3(-0.4, 0.7, 0.2).normalized();
  const int count = 400;
  auto d = fibonacci_directions(count, n);
  ASSERT_EQ(d.size(), static_cast<std::size_t>(count));
  double mean = 0;
  for (const auto& v : d) {
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    EXPECT_GT(v.dot(n), 0.0);
    mean += v.dot(n) / count;
  }
  // Uniform over the hemisphere area.
  EXPECT_NEAR(mean, 0.5, 1e-9);
  double min_angle = 10;
  for (int i = 0; i < count; ++i)
    for (int j = i + 1; j < count; ++j) min_angle = std::min(min_angle, std::acos(std::min(1.0, d[i].dot(d[j]))));
  // Cap area per ray 2 pi / n; nearest neighbours no closer than a third of that spacing.
  EXPECT_GT(min_angle, std::sqrt(2 * std::numbers::pi / count) / 3);
  EXPECT_THROW(fibonacci_directions(0, n), std::invalid_argument);
  EXPECT_THROW(fibonacci_directions(4, Vec3::Zero()), std::invalid_argument);
}

TEST(AmbientOcclusion, OpenPlaneAndClosedCavity) {
  auto plane = smooth_mesh(Volume3D::from_function({48, 48, 48}, [](double, double, double z) { return 20.3 - z; }), 0.0f);
  auto ao = compute_ambient_occlusion(plane.positions, plane.vertex_normals, plane.triangles);
  for (std::size_t v = 0; v < ao.size(); ++v) {
    const auto& p = plane.positions[v];
    if (std::abs(p.x() - 24) < 4 && std::abs(p.y() - 24) < 4) {
      EXPECT_GE(ao[v], 0.95);
    }
  }
  const Vec3 c(23.4, 23.7, 23.55);
  auto shell = smooth_mesh(hollow_ball(2.5, 18), 0.0f);
  auto ao2 = compute_ambient_occlusion(shell.positions, shell.vertex_normals, shell.triangles);
  std::size_t inner = 0;
  for (std::size_t v = 0; v < ao2.size(); ++v) {
    EXPECT_GE(ao2[v], 0.0);
    EXPECT_LE(ao2[v], 1.0);
    if ((shell.positions[v] - c).norm() < 6) {
      EXPECT_LE(ao2[v], 0.05);
      ++inner;
    } else {
      EXPECT_GE(ao2[v], 0.95);
    }
  }
  EXPECT_GT(inner, 20u);
}

TEST(AmbientOcclusion, BadArguments) {
  std::vector<Vec3> p{Vec3::Zero()}, n{Vec3::UnitZ()};
  EXPECT_THROW(compute_ambient_occlusion(p, n, {}, 0, 1), std::invalid_argument);
  EXPECT_THROW(compute_ambient_occlusion(p, n, {}, 8, 0), std::invalid_argument);
  EXPECT_THROW(compute_ambient_occlusion(p, {}, {}, 8, 1), std::invalid_argument);
  EXPECT_EQ(compute_ambient_occlusion(p, n, {}, 8, 1), std::vector<double>{1.0});
}

TEST(AmbientOcclusion, ThreadAndTranslationInvariance) {
  auto m = smooth_mesh(hollow_ball(4, 14), 0.0f);
  set_threads(1);
  auto a = compute_ambient_occlusion(m.positions, m.vertex_normals, m.triangles, 48, 32);
  set_threads(8);
  auto b = compute_ambient_occlusion(m.positions, m.vertex_normals, m.triangles, 48, 32);
  set_threads(0);
  EXPECT_EQ(a, b);
  auto moved = m.positions;
  for (auto& p : moved) p += Vec3(64, -32, 16);
  auto c = compute_ambient_occlusion(moved, m.vertex_normals, m.triangles, 48, 32);
  for (std::size_t v = 0; v < a.size(); ++v) EXPECT_NEAR(a[v], c[v], 1e-9);
}

TEST(FeatureWord, LayoutAndExhaustiveRoundTrip) {
  EXPECT_EQ(pack_feature({0, 0, 63}), 0x003F);
  EXPECT_EQ(pack_feature({126, 7, 0}), 0xFDC0);
  EXPECT_EQ(pack_feature({1, 1, 1}), 0x0241);
  for (std::uint32_t w = 0; w < 65536; ++w) {
    const auto a = unpack_feature(static_cast<std::uint16_t>(w));
    if ((w >> 9) == 127) {
      EXPECT_THROW(pack_feature(a), std::invalid_argument);
    } else {
      ASSERT_EQ(pack_feature(a), w);
    }
  }
  EXPECT_THROW(pack_feature({0, 8, 0}), std::invalid_argument);
  EXPECT_THROW(pack_feature({0, 0, 64}), std::invalid_argument);
}

TEST(FeatureWord, SectionsAreSixteenAndSixBitsPerVertex) {
  std::mt19937 rng(3);
  std::vector<VertexAttributes> attrs(1001);
  std::vector<std::uint8_t> ao(attrs.size());
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    attrs[i] = {static_cast<std::uint8_t>(rng() % 127), static_cast<std::uint8_t>(rng() % 8),
                static_cast<std::uint8_t>(rng() % 64)};
    ao[i] = attrs[i].ao;
  }
  const auto feat = pack_features(attrs);
  EXPECT_EQ(feat.size(), 8 + 2 * attrs.size());
  EXPECT_EQ(unpack_features(feat), attrs);
  const auto aocc = pack_ao(ao);
  EXPECT_EQ(aocc.size(), 8 + (6 * ao.size() + 7) / 8);
  EXPECT_EQ(unpack_ao(aocc), ao);
  auto cut = feat;
  cut.pop_back();
  EXPECT_THROW(unpack_features(cut), StreamError);
  EXPECT_EQ(quantize_ao(0.0), 0);
  EXPECT_EQ(quantize_ao(1.0), 63);
  EXPECT_EQ(quantize_ao(0.5), 32);
  EXPECT_EQ(quantize_ao(-3), 0);
  EXPECT_EQ(quantize_ao(7), 63);
}

TEST(Deltas, ZigzagRoundTrip) {
  for (std::int64_t v : {0LL, 1LL, -1LL, 2LL, -2LL, 123456789LL, -987654321LL}) EXPECT_EQ(unzigzag(zigzag(v)), v);
  EXPECT_EQ(zigzag(-1), 1u);
  EXPECT_EQ(zigzag(1), 2u);
}

TEST(Deltas, RoundTripWithinHalfStepProperty) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 0.2), big(0, 40);
  for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{5000}, std::size_t{13000}}) {
    std::vector<Vec3> p0(n), n0(n), p1(n), n1(n);
    for (std::size_t i = 0; i < n; ++i) {
      p0[i] = Vec3(big(rng), big(rng), big(rng));
      p1[i] = p0[i] + Vec3(g(rng), g(rng), g(rng));
      n0[i] = Vec3(g(rng), g(rng), 1).normalized();
      n1[i] = (n0[i] + 0.1 * Vec3(g(rng), g(rng), g(rng))).normalized();
    }
    auto d = encode_vertex_deltas(p0, n0, p1, n1);
    const auto pd = DeltaSection::parse(d.positions.serialize());
    EXPECT_EQ(pd.count, n);
    EXPECT_EQ(pd.payload, d.positions.payload);
    auto [p, nr] = decode_vertex_deltas(p0, n0, {pd, DeltaSection::parse(d.normals.serialize())});
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < 3; ++k) EXPECT_LE(std::abs(p[i][k] - p1[i][k]), 0.5 * kDefaultPosStep + 1e-9);
      EXPECT_NEAR(nr[i].norm(), 1.0, 1e-12);
      EXPECT_LT((nr[i] - n1[i]).norm(), 2 * kDefaultNrmStep);
    }
  }
}

TEST(Deltas, PackingHandlesZeroRunsAndWideValues) {
  std::vector<std::uint64_t> vals(10000, 0);
  vals[17] = (std::uint64_t{1} << 59) + 3;
  vals[9000] = 5;
  for (const auto* L : {&ladder64(), &ladder128()}) {
    if (L->word_bits == 128) vals[17] = (std::uint64_t{1} << 39) + 3;
    auto bytes = pack_values(*L, vals);
    EXPECT_EQ(bytes.size() % (L->word_bits / 8), 0u);
    ByteReader r(bytes);
    EXPECT_EQ(unpack_values(*L, r, vals.size()), vals);
  }
}

TEST(Deltas, CorruptSelectorRejected) {
  std::vector<Vec3> a(10, Vec3::Zero()), b(10, Vec3(0.5, -0.5, 0.25));
  auto d = encode_vertex_deltas(a, a, b, a);
  d.positions.payload[7] |= 0xF0;
  EXPECT_THROW(decode_vertex_deltas(a, a, d), StreamError);
  EXPECT_THROW(encode_vertex_deltas(a, a, b, a, 0.0), std::invalid_argument);
  EXPECT_THROW(encode_vertex_deltas(a, a, std::vector<Vec3>(3), a), std::invalid_argument);
}

TEST(Deltas, ThreadCountInvariantBytes) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 0.3);
  std::vector<Vec3> p0(20000), p1(20000);
  for (std::size_t i = 0; i < p0.size(); ++i) {
    p0[i] = Vec3(g(rng), g(rng), g(rng)) * 50;
    p1[i] = p0[i] + Vec3(g(rng), g(rng), g(rng));
  }
  set_threads(1);
  auto a = encode_vertex_deltas(p0, p0, p1, p1);
  set_threads(8);
  auto b = encode_vertex_deltas(p0, p0, p1, p1);
  set_threads(0);
  EXPECT_EQ(a.positions.payload, b.positions.payload);
  EXPECT_EQ(a.normals.payload, b.normals.payload);
}
