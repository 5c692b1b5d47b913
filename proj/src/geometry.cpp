// SPDX-License-Identifier: Apache-2.0

#include "rfsim/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "rfsim/hash.hpp"

namespace rfsim {

Triangle Triangle::make(const Vec3& a, const Vec3& b, const Vec3& c, std::uint32_t material_id) {
  Triangle tri;
  tri.vertices = {a, b, c};
  tri.material_id = material_id;
  const Vec3 cross = (b - a).cross(c - a);
  const double norm = cross.norm();
  tri.area = 0.5 * norm;
  if (!(tri.area > kMinTriangleArea)) throw GeometryError("degenerate triangle");
  tri.normal = cross / norm;
  return tri;
}

Box3 Triangle::bounds() const {
  Box3 box(vertices[0]);
  box.extend(vertices[1]);
  box.extend(vertices[2]);
  return box;
}

std::optional<double> intersect_triangle(const Triangle& tri, const Vec3& origin,
                                         const Vec3& direction) {
  const Vec3 e1 = tri.vertices[1] - tri.vertices[0];
  const Vec3 e2 = tri.vertices[2] - tri.vertices[0];
  const Vec3 p = direction.cross(e2);
  const double det = e1.dot(p);
  // Relative parallelism test; scale by the edge lengths so the threshold is unitless.
  if (std::abs(det) <= 1e-12 * e1.norm() * e2.norm()) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 s = origin - tri.vertices[0];
  const double u = s.dot(p) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = direction.dot(q) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  return e2.dot(q) * inv_det;
}

namespace {

bool ray_box(const Box3& box, const Vec3& origin, const Vec3& inv_dir, double t_max) {
  double t0 = 0.0;
  double t1 = t_max;
  for (int axis = 0; axis < 3; ++axis) {
    const double lo = box.min()[axis];
    const double hi = box.max()[axis];
    if (std::isinf(inv_dir[axis])) {
      if (origin[axis] < lo || origin[axis] > hi) return false;
      continue;
    }
    double ta = (lo - origin[axis]) * inv_dir[axis];
    double tb = (hi - origin[axis]) * inv_dir[axis];
    if (ta > tb) std::swap(ta, tb);
    // Widen slightly so boxes of flat (zero-thickness) geometry are never missed.
    const double pad = 1e-9 * (1.0 + std::abs(ta) + std::abs(tb));
    t0 = std::max(t0, ta - pad);
    t1 = std::min(t1, tb + pad);
    if (t0 > t1) return false;
  }
  return true;
}

Vec3 inverse_direction(const Vec3& d) {
  Vec3 inv;
  for (int i = 0; i < 3; ++i)
    inv[i] = d[i] == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / d[i];
  return inv;
}

double surface_area(const Box3& box) {
  if (box.isEmpty()) return 0.0;
  const Vec3 d = box.sizes();
  return 2.0 * (d.x() * d.y() + d.y() * d.z() + d.z() * d.x());
}

// Nearest-first ordering with a deterministic tie break on the triangle id.
bool closer(double t, std::uint32_t id, const RayHit& best) {
  return t < best.t || (t == best.t && id < best.triangle_id);
}

RayHit make_hit(const Triangle& tri, std::uint32_t id, const Vec3& origin, const Vec3& direction,
                double t) {
  return RayHit{t, origin + t * direction, id, direction.dot(tri.normal) < 0.0};
}

}  // namespace

Scene::Scene(std::vector<Triangle> triangles, std::vector<Material> materials)
    : triangles_(std::move(triangles)), materials_(std::move(materials)) {
  for (const auto& m : materials_) m.validate();
  for (std::size_t i = 0; i < triangles_.size(); ++i) {
    if (triangles_[i].material_id >= materials_.size())
      throw GeometryError("triangle " + std::to_string(i) + " references unknown material");
  }
  build_bvh();
}

void Scene::build_bvh() {
  nodes_.clear();
  order_.resize(triangles_.size());
  bounds_ = Box3();
  if (triangles_.empty()) return;
  std::vector<Vec3> centroids(triangles_.size());
  for (std::uint32_t i = 0; i < triangles_.size(); ++i) {
    order_[i] = i;
    centroids[i] = triangles_[i].centroid();
    bounds_.extend(triangles_[i].bounds());
  }
  nodes_.reserve(2 * triangles_.size());
  build_node(0, static_cast<std::uint32_t>(triangles_.size()), 1, centroids);
}

// Binned SAH split; falls back to a median split when binning cannot separate the centroids.
std::uint32_t Scene::build_node(std::uint32_t begin, std::uint32_t end, std::size_t depth,
                                const std::vector<Vec3>& centroids) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  Box3 box;
  Box3 centroid_box;
  for (std::uint32_t i = begin; i < end; ++i) {
    box.extend(triangles_[order_[i]].bounds());
    centroid_box.extend(centroids[order_[i]]);
  }
  nodes_[index].bounds = box;

  const std::uint32_t count = end - begin;
  if (count <= kMaxLeafSize) {
    nodes_[index].first = begin;
    nodes_[index].count = count;
    return index;
  }

  constexpr int kBins = 16;
  int best_axis = -1;
  int best_split = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  const Vec3 extent = centroid_box.sizes();
  for (int axis = 0; axis < 3; ++axis) {
    if (extent[axis] <= 0.0) continue;
    std::array<Box3, kBins> bin_box;
    std::array<std::uint32_t, kBins> bin_count{};
    const double scale = kBins / extent[axis];
    auto bin_of = [&](std::uint32_t tri) {
      int b = static_cast<int>((centroids[tri][axis] - centroid_box.min()[axis]) * scale);
      return std::clamp(b, 0, kBins - 1);
    };
    for (std::uint32_t i = begin; i < end; ++i) {
      const int b = bin_of(order_[i]);
      ++bin_count[b];
      bin_box[b].extend(triangles_[order_[i]].bounds());
    }
    std::array<double, kBins> right_cost{};
    Box3 acc;
    std::uint32_t acc_n = 0;
    for (int b = kBins - 1; b > 0; --b) {
      acc.extend(bin_box[b]);
      acc_n += bin_count[b];
      right_cost[b] = acc_n * surface_area(acc);
    }
    acc = Box3();
    acc_n = 0;
    for (int b = 0; b < kBins - 1; ++b) {
      acc.extend(bin_box[b]);
      acc_n += bin_count[b];
      if (acc_n == 0 || acc_n == count) continue;
      const double cost = acc_n * surface_area(acc) + right_cost[b + 1];
      if (cost < best_cost) {
        best_cost = cost;
        best_axis = axis;
        best_split = b;
      }
    }
  }

  std::uint32_t mid;
  if (best_axis >= 0) {
    const double scale = kBins / extent[best_axis];
    const double lo = centroid_box.min()[best_axis];
    auto* first = order_.data() + begin;
    auto* last = order_.data() + end;
    auto* pivot = std::stable_partition(first, last, [&](std::uint32_t tri) {
      int b = std::clamp(static_cast<int>((centroids[tri][best_axis] - lo) * scale), 0, kBins - 1);
      return b <= best_split;
    });
    mid = static_cast<std::uint32_t>(pivot - order_.data());
  } else {
    mid = begin + count / 2;
  }
  if (mid == begin || mid == end) mid = begin + count / 2;

  if (depth >= kMaxDepth) {
    // Depth cap reached: keep everything in this leaf.
    nodes_[index].first = begin;
    nodes_[index].count = count;
    return index;
  }
  const std::uint32_t left = build_node(begin, mid, depth + 1, centroids);
  const std::uint32_t right = build_node(mid, end, depth + 1, centroids);
  nodes_[index].first = left;
  nodes_[index].right = right;
  nodes_[index].count = 0;
  return index;
}

template <typename Visitor>
void Scene::traverse(const Vec3& origin, const Vec3& inv_dir, double t_max, Visitor&& visit) const {
  if (nodes_.empty()) return;
  std::array<std::uint32_t, 2 * kMaxDepth + 2> stack;
  std::size_t top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const BvhNode& node = nodes_[stack[--top]];
    if (!ray_box(node.bounds, origin, inv_dir, t_max)) continue;
    if (node.is_leaf()) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        // The visitor may shrink t_max; returning false stops the traversal.
        if (!visit(order_[i], t_max)) return;
      }
    } else {
      stack[top++] = node.right;
      stack[top++] = node.first;
    }
  }
}

std::optional<RayHit> Scene::intersect(const Vec3& origin, const Vec3& direction,
                                       double t_max) const {
  std::optional<RayHit> best;
  traverse(origin, inverse_direction(direction), t_max, [&](std::uint32_t id, double& limit) {
    const auto t = intersect_triangle(triangles_[id], origin, direction);
    if (t && *t > kRayEpsilon && *t < t_max && (!best || closer(*t, id, *best))) {
      best = make_hit(triangles_[id], id, origin, direction, *t);
      limit = *t;
    }
    return true;
  });
  return best;
}

std::optional<RayHit> Scene::intersect_brute_force(const Vec3& origin, const Vec3& direction,
                                                   double t_max) const {
  std::optional<RayHit> best;
  for (std::uint32_t id = 0; id < triangles_.size(); ++id) {
    const auto t = intersect_triangle(triangles_[id], origin, direction);
    if (t && *t > kRayEpsilon && *t < t_max && (!best || closer(*t, id, *best)))
      best = make_hit(triangles_[id], id, origin, direction, *t);
  }
  return best;
}

std::vector<RayHit> Scene::segment_hits(const Vec3& a, const Vec3& b) const {
  const Vec3 delta = b - a;
  const double length = delta.norm();
  std::vector<RayHit> hits;
  if (length <= 2.0 * kRayEpsilon) return hits;
  const Vec3 dir = delta / length;
  const double t_end = length - kRayEpsilon;
  traverse(a, inverse_direction(dir), t_end, [&](std::uint32_t id, double&) {
    const auto t = intersect_triangle(triangles_[id], a, dir);
    if (t && *t > kRayEpsilon && *t < t_end) hits.push_back(make_hit(triangles_[id], id, a, dir, *t));
    return true;
  });
  std::sort(hits.begin(), hits.end(), [](const RayHit& x, const RayHit& y) {
    return x.t < y.t || (x.t == y.t && x.triangle_id < y.triangle_id);
  });
  // A crossing through a shared edge of coplanar triangles is one surface crossing.
  std::vector<RayHit> merged;
  for (const auto& h : hits) {
    if (!merged.empty() && std::abs(h.t - merged.back().t) < 1e-9 &&
        std::abs(triangles_[h.triangle_id].normal.dot(triangles_[merged.back().triangle_id].normal)) >
            1.0 - 1e-12)
      continue;
    merged.push_back(h);
  }
  return merged;
}

bool Scene::is_visible(const Vec3& a, const Vec3& b) const {
  const Vec3 delta = b - a;
  const double length = delta.norm();
  if (length <= 2.0 * kRayEpsilon) return true;
  const Vec3 dir = delta / length;
  const double t_end = length - kRayEpsilon;
  bool blocked = false;
  traverse(a, inverse_direction(dir), t_end, [&](std::uint32_t id, double&) {
    const auto t = intersect_triangle(triangles_[id], a, dir);
    if (t && *t > kRayEpsilon && *t < t_end) blocked = true;
    return !blocked;
  });
  return !blocked;
}

BvhStats Scene::bvh_stats() const {
  BvhStats stats;
  stats.node_count = nodes_.size();
  if (nodes_.empty()) return stats;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0u, 1u}};
  while (!stack.empty()) {
    auto [idx, depth] = stack.back();
    stack.pop_back();
    stats.max_depth = std::max(stats.max_depth, depth);
    const BvhNode& node = nodes_[idx];
    if (node.is_leaf()) {
      ++stats.leaf_count;
      stats.max_leaf_size = std::max<std::size_t>(stats.max_leaf_size, node.count);
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i)
        stats.reachable.push_back(order_[i]);
    } else {
      stack.push_back({node.first, depth + 1});
      stack.push_back({node.right, depth + 1});
    }
  }
  std::sort(stats.reachable.begin(), stats.reachable.end());
  return stats;
}

std::uint64_t Scene::content_hash() const {
  Fnv1a h;
  h.u64(triangles_.size());
  for (const auto& tri : triangles_) {
    for (const auto& v : tri.vertices)
      for (int i = 0; i < 3; ++i) h.f64(v[i]);
    h.u64(tri.material_id);
  }
  h.u64(materials_.size());
  for (const auto& m : materials_) {
    h.str(m.name);
    h.f64(m.epsilon_r);
    h.f64(m.sigma);
    h.f64(m.scattering_coefficient);
    h.u64(static_cast<std::uint64_t>(m.lobe.kind));
    h.u64(static_cast<std::uint64_t>(m.lobe.alpha_r));
    h.f64(m.xpd_ratio);
  }
  return h.digest();
}

}  // namespace rfsim
