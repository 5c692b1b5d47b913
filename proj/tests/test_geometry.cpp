// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "rfsim/config.hpp"
#include "rfsim/geometry.hpp"

using namespace rfsim;

namespace {

// Independent oracle: plane hit followed by a same-side edge test.
std::optional<double> plane_edge_hit(const Triangle& tri, const Vec3& o, const Vec3& d) {
  const Vec3& a = tri.vertices[0];
  const Vec3& b = tri.vertices[1];
  const Vec3& c = tri.vertices[2];
  const Vec3 n = (b - a).cross(c - a);
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const double t = n.dot(a - o) / denom;
  const Vec3 p = o + t * d;
  const double s0 = n.dot((b - a).cross(p - a));
  const double s1 = n.dot((c - b).cross(p - b));
  const double s2 = n.dot((a - c).cross(p - c));
  if (s0 < 0 || s1 < 0 || s2 < 0) return std::nullopt;
  return t;
}

std::optional<std::pair<double, std::uint32_t>> oracle_nearest(const Scene& s, const Vec3& o, const Vec3& d) {
  std::optional<std::pair<double, std::uint32_t>> best;
  for (std::uint32_t i = 0; i < s.triangles().size(); ++i) {
    const auto t = plane_edge_hit(s.triangles()[i], o, d);
    if (t && *t > kRayEpsilon && (!best || *t < best->first)) best = {{*t, i}};
  }
  return best;
}

Scene random_scene(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-50, 50), off(-3, 3);
  std::vector<Triangle> tris;
  while (tris.size() < count) {
    const Vec3 c(pos(rng), pos(rng), pos(rng));
    const Vec3 a = c + Vec3(off(rng), off(rng), off(rng));
    const Vec3 b = c + Vec3(off(rng), off(rng), off(rng));
    const Vec3 e = c + Vec3(off(rng), off(rng), off(rng));
    if ((b - a).cross(e - a).norm() < 1e-3) continue;
    tris.push_back(Triangle::make(a, b, e, 0));
  }
  return Scene(std::move(tris), {builtin_materials().front()});
}

Scene ground(double half = 1000.0) {
  const std::string obj = "g ground\nv -" + std::to_string(half) + " -" + std::to_string(half) +
                          " 0\nv " + std::to_string(half) + " -" + std::to_string(half) + " 0\nv " +
                          std::to_string(half) + " " + std::to_string(half) + " 0\nv -" +
                          std::to_string(half) + " " + std::to_string(half) + " 0\nf 1 2 3 4\n";
  return build_scene(parse_obj_mesh(obj), {{"ground", "ground"}}, builtin_materials());
}

}  // namespace

TEST_CASE("two-plate scene has four triangles and two materials") {
  const Scene s = builtin_scene("two-plate", builtin_materials());
  CHECK(s.triangles().size() == 4);
  CHECK(s.materials().size() == 2);
  for (const auto& t : s.triangles()) CHECK(std::abs(t.normal.norm() - 1.0) < 1e-12);
}

TEST_CASE("empty mesh is rejected with 'no geometry'") {
  CHECK_THROWS_WITH_AS(build_scene(parse_obj_mesh("# nothing\n"), {}, builtin_materials()),
                       doctest::Contains("no geometry"), GeometryError);
}

TEST_CASE("mesh parser errors") {
  SUBCASE("malformed vertex names the line") {
    CHECK_THROWS_WITH_AS(parse_obj_mesh("v 0 0 0\nv 1 x 0\n"), doctest::Contains("line 2"), GeometryError);
  }
  SUBCASE("index out of range") {
    CHECK_THROWS_AS(parse_obj_mesh("v 0 0 0\nv 1 0 0\nf 1 2 3\n"), GeometryError);
  }
  SUBCASE("unbound material group") {
    const auto groups = parse_obj_mesh("g wall\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
    CHECK_THROWS_AS(build_scene(groups, {}, builtin_materials()), GeometryError);
    CHECK_THROWS_AS(build_scene(groups, {{"wall", "unobtainium"}}, builtin_materials()), GeometryError);
  }
  SUBCASE("degenerate triangle is rejected with its index") {
    const auto groups = parse_obj_mesh("g wall\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\nf 1 2 3\nf 1 2 4\n");
    CHECK_THROWS_WITH_AS(build_scene(groups, {{"wall", "concrete"}}, builtin_materials()),
                         doctest::Contains("1"), GeometryError);
  }
  SUBCASE("slash and negative indices") {
    const auto groups = parse_obj_mesh("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2//2 -2 -1\n");
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].faces.size() == 2);
  }
}

TEST_CASE("ray into the ground plane") {
  const Scene s = ground();
  const auto hit = s.intersect({0, 0, 10}, {0, 0, -1});
  REQUIRE(hit);
  CHECK(hit->t == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(hit->point.norm() < 1e-9);
  CHECK(hit->front_face);
  CHECK_FALSE(s.intersect({0, 0, 10}, Vec3(1, 1, 0).normalized()));
}

TEST_CASE("BVH agrees with a brute-force oracle on random rays") {
  const Scene s = random_scene(200, 1);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> pos(-60, 60);
  std::normal_distribution<double> n01;
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 o(pos(rng), pos(rng), pos(rng));
    // Aim half the rays at triangles so that hits are well represented.
    Vec3 d = (i % 2 == 0) ? Vec3(n01(rng), n01(rng), n01(rng))
                          : Vec3(s.triangles()[static_cast<std::size_t>(i) % 200].centroid() - o);
    d.normalize();
    const auto got = s.intersect(o, d);
    const auto want = oracle_nearest(s, o, d);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      ++hits;
      CHECK(got->triangle_id == want->second);
      CHECK(std::abs(got->t - want->first) <= 1e-9 * std::max(1.0, want->first));
    }
  }
  CHECK(hits > 400);
}

TEST_CASE("BVH audit on a 10k-triangle scene") {
  const Scene s = random_scene(10000, 3);
  const BvhStats st = s.bvh_stats();
  CHECK(st.max_depth <= Scene::kMaxDepth);
  CHECK(st.max_leaf_size <= Scene::kMaxLeafSize);
  REQUIRE(st.reachable.size() == 10000);
  for (std::uint32_t i = 0; i < 10000; ++i) CHECK(st.reachable[i] == i);
}

TEST_CASE("coincident triangles tie-break to the lowest id") {
  const Triangle a = Triangle::make({-1, -1, 0}, {1, -1, 0}, {0, 1, 0}, 0);
  const Scene s({a, a}, {builtin_materials().front()});
  const auto hit = s.intersect({0, 0, 5}, {0, 0, -1});
  REQUIRE(hit);
  CHECK(hit->triangle_id == 0);
}

TEST_CASE("visibility") {
  const Scene g = ground();
  CHECK(g.is_visible({0, 0, 1}, {50, 3, 20}));
  const Scene two = builtin_scene("two-plate", builtin_materials());
  CHECK_FALSE(two.is_visible({30, 10, 5}, {30, 20, 5}));
  CHECK(two.is_visible({30, 10, 5}, {30, 20, 5}) == two.is_visible({30, 20, 5}, {30, 10, 5}));
  SUBCASE("grazing segment within epsilon of a surface is visible") {
    CHECK(g.is_visible({0, 0, 0.5 * kRayEpsilon}, {10, 0, 0.5 * kRayEpsilon}));
    CHECK(g.is_visible({0, 0, 0}, {10, 0, 5}));
  }
}

TEST_CASE("visibility is symmetric on random segments") {
  const Scene s = random_scene(300, 4);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-60, 60);
  for (int i = 0; i < 500; ++i) {
    const Vec3 a(pos(rng), pos(rng), pos(rng)), b(pos(rng), pos(rng), pos(rng));
    CHECK(s.is_visible(a, b) == s.is_visible(b, a));
  }
}

TEST_CASE("translation leaves hit distances unchanged") {
  const Scene s = random_scene(200, 6);
  const Vec3 shift(123.25, -57.5, 9.75);
  std::vector<Triangle> moved;
  for (const auto& t : s.triangles())
    moved.push_back(Triangle::make(t.vertices[0] + shift, t.vertices[1] + shift, t.vertices[2] + shift, 0));
  const Scene m(std::move(moved), s.materials());
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(-60, 60);
  for (int i = 0; i < 300; ++i) {
    const Vec3 o(pos(rng), pos(rng), pos(rng));
    const Vec3 d = (s.triangles()[static_cast<std::size_t>(i) % 200].centroid() - o).normalized();
    const auto a = s.intersect(o, d);
    const auto b = m.intersect(o + shift, d);
    REQUIRE(a.has_value() == b.has_value());
    if (a) {
      CHECK(a->triangle_id == b->triangle_id);
      CHECK(std::abs(a->t - b->t) <= 1e-9 * std::max(1.0, a->t));
    }
  }
}

TEST_CASE("content hash is stable and geometry sensitive") {
  const Scene a = builtin_scene("urban-demo", builtin_materials());
  const Scene b = builtin_scene("urban-demo", builtin_materials());
  const Scene c = builtin_scene("two-plate", builtin_materials());
  CHECK(a.content_hash() == b.content_hash());
  CHECK(a.content_hash() != c.content_hash());
}
