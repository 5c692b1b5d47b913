// SPDX-License-Identifier: Apache-2.0
//
// Triangle-mesh scene with a BVH for exact ray and segment queries.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfsim/materials.hpp"

namespace rfsim {

using Vec3 = Eigen::Vector3d;
using Box3 = Eigen::AlignedBox3d;

/// Self-intersection guard along a ray, in meters.
inline constexpr double kRayEpsilon = 1e-6;

/// Minimum accepted triangle area, in square meters.
inline constexpr double kMinTriangleArea = 1e-12;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Triangle {
  std::array<Vec3, 3> vertices;
  std::uint32_t material_id = 0;
  Vec3 normal = Vec3::Zero();  // unit, right-hand winding
  double area = 0.0;

  /// Builds a triangle and derives its normal and area; throws on degenerate input.
  static Triangle make(const Vec3& a, const Vec3& b, const Vec3& c, std::uint32_t material_id);

  Vec3 centroid() const { return (vertices[0] + vertices[1] + vertices[2]) / 3.0; }
  Box3 bounds() const;
};

struct RayHit {
  double t = 0.0;
  Vec3 point = Vec3::Zero();
  std::uint32_t triangle_id = 0;
  bool front_face = false;  // ray arrived against the normal
};

struct BvhNode {
  Box3 bounds;
  std::uint32_t first = 0;  // leaf: first index into the triangle order; inner: left child
  std::uint32_t count = 0;  // leaf: triangle count; inner: 0
  std::uint32_t right = 0;  // inner: right child
  bool is_leaf() const { return count > 0; }
};

struct BvhStats {
  std::size_t node_count = 0;
  std::size_t leaf_count = 0;
  std::size_t max_depth = 0;
  std::size_t max_leaf_size = 0;
  std::vector<std::uint32_t> reachable;  // every triangle id found by a full traversal, sorted
};

/// Immutable scene. Queries are const and thread-safe.
class Scene {
 public:
  static constexpr std::size_t kMaxLeafSize = 4;
  static constexpr std::size_t kMaxDepth = 64;

  Scene() = default;
  Scene(std::vector<Triangle> triangles, std::vector<Material> materials);

  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Material>& materials() const { return materials_; }
  const Material& material_of(std::uint32_t triangle_id) const {
    return materials_[triangles_[triangle_id].material_id];
  }
  const Box3& bounds() const { return bounds_; }
  bool empty() const { return triangles_.empty(); }

  /// Nearest hit with kRayEpsilon < t < t_max. `direction` must be unit length.
  std::optional<RayHit> intersect(const Vec3& origin, const Vec3& direction,
                                  double t_max = std::numeric_limits<double>::infinity()) const;

  /// Reference implementation testing every triangle; used as an oracle.
  std::optional<RayHit> intersect_brute_force(
      const Vec3& origin, const Vec3& direction,
      double t_max = std::numeric_limits<double>::infinity()) const;

  /// All hits on the open segment (a, b) with the epsilon guard at both ends, sorted by t.
  std::vector<RayHit> segment_hits(const Vec3& a, const Vec3& b) const;

  /// True iff no triangle intersects the open segment (a, b), guarded at both ends.
  bool is_visible(const Vec3& a, const Vec3& b) const;

  BvhStats bvh_stats() const;

  /// Order-sensitive 64-bit digest of geometry and materials.
  std::uint64_t content_hash() const;

 private:
  void build_bvh();
  std::uint32_t build_node(std::uint32_t begin, std::uint32_t end, std::size_t depth,
                           const std::vector<Vec3>& centroids);

  template <typename Visitor>
  void traverse(const Vec3& origin, const Vec3& inv_dir, double t_max, Visitor&& visit) const;

  std::vector<Triangle> triangles_;
  std::vector<Material> materials_;
  std::vector<BvhNode> nodes_;
  std::vector<std::uint32_t> order_;
  Box3 bounds_;
};

/// Moller-Trumbore test; returns t of the hit (no epsilon guard applied).
std::optional<double> intersect_triangle(const Triangle& tri, const Vec3& origin, const Vec3& direction);

// -- mesh input -------------------------------------------------------------

struct MeshGroup {
  std::string name;
  std::vector<std::array<Vec3, 3>> faces;
};

/// Parses a Wavefront-style ASCII mesh: `v x y z`, `f i j k ...` (polygons fan-triangulated,
/// `i/t/n` and negative indices accepted) and `g`/`o` group statements. Other records are ignored.
std::vector<MeshGroup> parse_obj_mesh(const std::string& text);

/// Parses the JSON sidecar `{"group_name": "material_name", ...}`.
std::map<std::string, std::string> parse_material_bindings(const std::string& json_text);

/// Assembles a scene from parsed groups; every group must be bound to a library material.
Scene build_scene(const std::vector<MeshGroup>& groups,
                  const std::map<std::string, std::string>& bindings,
                  const std::vector<Material>& library);

/// Reads a mesh file and its bindings sidecar, then calls build_scene.
Scene load_scene(const std::string& mesh_path, const std::string& bindings_path,
                 const std::vector<Material>& library);

}  // namespace rfsim
