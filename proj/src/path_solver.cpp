// SPDX-License-Identifier: Apache-2.0

#include "rfsim/path_solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rfsim/hash.hpp"

namespace rfsim {

void PathConfig::validate() const {
  if (!(frequency_hz > 0.0)) throw std::invalid_argument("paths.frequency_hz must be positive");
  if (max_reflection_depth < 0 || max_reflection_depth > kMaxReflectionDepthCap)
    throw std::invalid_argument("paths.max_reflection_depth must lie in [0, " +
                                std::to_string(kMaxReflectionDepthCap) + "]");
  if (max_transmission_events < 0)
    throw std::invalid_argument("paths.max_transmission_events must be >= 0");
  if (!(scatter_tessellation_edge > 0.0))
    throw std::invalid_argument("paths.scatter_tessellation_edge must be positive");
}

const char* to_string(InteractionKind kind) {
  switch (kind) {
    case InteractionKind::Emit: return "emit";
    case InteractionKind::SpecularReflect: return "reflect";
    case InteractionKind::Transmit: return "transmit";
    case InteractionKind::DiffuseScatter: return "scatter";
    case InteractionKind::Receive: return "receive";
  }
  return "?";
}

Angles direction_angles(const Vec3& unit) {
  return {std::atan2(unit.y(), unit.x()), std::asin(std::clamp(unit.z(), -1.0, 1.0))};
}

double PropagationPath::gain_db() const {
  return 10.0 * std::log10(transfer.squaredNorm() / 2.0);
}

bool path_order(const PropagationPath& a, const PropagationPath& b) {
  if (a.delay != b.delay) return a.delay < b.delay;
  if (a.kind_signature != b.kind_signature) return a.kind_signature < b.kind_signature;
  const auto n = std::min(a.interactions.size(), b.interactions.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto ta = a.interactions[i].triangle_id.value_or(0);
    const auto tb = b.interactions[i].triangle_id.value_or(0);
    if (ta != tb) return ta < tb;
  }
  return a.interactions.size() < b.interactions.size();
}

namespace {

struct Plane {
  Vec3 normal;
  double offset = 0.0;  // normal . x = offset
  std::vector<std::uint32_t> triangles;
  Box3 box;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
  Vec3 mirror(const Vec3& p) const { return p - 2.0 * signed_distance(p) * normal; }
};

// Coplanar triangles are grouped so that image chains run over planes, not triangles.
std::vector<Plane> group_planes(const Scene& scene) {
  std::vector<Plane> planes;
  const auto& tris = scene.triangles();
  for (std::uint32_t id = 0; id < tris.size(); ++id) {
    Vec3 n = tris[id].normal;
    int axis = 0;
    n.cwiseAbs().maxCoeff(&axis);
    if (n[axis] < 0.0) n = -n;
    const double d = n.dot(tris[id].vertices[0]);
    auto it = std::find_if(planes.begin(), planes.end(), [&](const Plane& p) {
      return p.normal.dot(n) > 1.0 - 1e-12 && std::abs(p.offset - d) < 1e-9 * (1.0 + std::abs(d));
    });
    if (it == planes.end()) {
      planes.push_back({n, d, {}, Box3()});
      it = planes.end() - 1;
    }
    it->triangles.push_back(id);
    it->box.extend(tris[id].bounds());
  }
  return planes;
}

// Axis-aligned box test: does any corner of `box` lie strictly on `side` of the plane?
bool box_reaches_side(const Plane& plane, const Box3& box, double side) {
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner = box.corner(static_cast<Box3::CornerType>(c));
    if (side * plane.signed_distance(corner) > kRayEpsilon) return true;
  }
  return false;
}

bool point_in_triangle(const Triangle& tri, const Vec3& p) {
  const Vec3 e1 = tri.vertices[1] - tri.vertices[0];
  const Vec3 e2 = tri.vertices[2] - tri.vertices[0];
  const Vec3 w = p - tri.vertices[0];
  const double d11 = e1.dot(e1), d12 = e1.dot(e2), d22 = e2.dot(e2);
  const double w1 = w.dot(e1), w2 = w.dot(e2);
  const double den = d11 * d22 - d12 * d12;
  const double u = (d22 * w1 - d12 * w2) / den;
  const double v = (d11 * w2 - d12 * w1) / den;
  constexpr double tol = 1e-9;
  return u >= -tol && v >= -tol && u + v <= 1.0 + tol;
}

std::string signature_of(const std::vector<Interaction>& chain) {
  std::string s;
  for (const auto& it : chain) {
    switch (it.kind) {
      case InteractionKind::SpecularReflect: s += 'R'; break;
      case InteractionKind::Transmit: s += 'T'; break;
      case InteractionKind::DiffuseScatter: s += 'S'; break;
      default: break;
    }
  }
  return s.empty() ? "LOS" : s;
}

PropagationPath finish_path(std::vector<Interaction> chain, double length, const Vec3& departure,
                            const Vec3& arrival, const Mat2c& transfer, double frequency_hz) {
  PropagationPath p;
  p.kind_signature = signature_of(chain);
  p.interactions = std::move(chain);
  p.total_length = length;
  p.delay = length / kSpeedOfLight;
  p.departure = departure;
  p.arrival = arrival;
  p.aod = direction_angles(departure);
  p.aoa = direction_angles(-arrival);
  p.transfer = transfer;
  p.frequency_hz = frequency_hz;
  return p;
}

void check_endpoints(const Scene& scene, const Vec3& tx, const Vec3& rx) {
  if ((tx - rx).norm() <= kRayEpsilon) throw std::invalid_argument("transmitter and receiver coincide");
  if (scene.empty()) return;
  Box3 allowed = scene.bounds();
  const double margin = std::max(10.0, allowed.diagonal().norm());
  allowed.min().array() -= margin;
  allowed.max().array() += margin;
  if (!allowed.contains(tx) || !allowed.contains(rx))
    throw std::invalid_argument("endpoint lies far outside the scene bounds");
}

PropagationPath los_path(const Vec3& tx, const Vec3& rx, double frequency_hz) {
  const Vec3 delta = rx - tx;
  const double d = delta.norm();
  const Vec3 k = delta / d;
  std::vector<Interaction> chain{{InteractionKind::Emit, tx, std::nullopt, 1.0},
                                 {InteractionKind::Receive, rx, std::nullopt, 1.0}};
  const Mat2c t = Mat2c::Identity() * em::free_space_factor(d, frequency_hz);
  return finish_path(std::move(chain), d, k, k, t, frequency_hz);
}

class SpecularSearch {
 public:
  SpecularSearch(const Scene& scene, const Vec3& tx, const Vec3& rx, const PathConfig& config)
      : scene_(scene), planes_(group_planes(scene)), tx_(tx), rx_(rx), config_(config) {}

  void run(int depth, std::vector<PropagationPath>& out) {
    out_ = &out;
    std::vector<std::size_t> seq;
    std::vector<Vec3> images{tx_};
    descend(seq, images, depth);
  }

 private:
  void descend(std::vector<std::size_t>& seq, std::vector<Vec3>& images, int depth_left) {
    if (depth_left == 0) return;
    for (std::size_t p = 0; p < planes_.size(); ++p) {
      if (!seq.empty() && seq.back() == p) continue;
      const Plane& plane = planes_[p];
      const double src_side = plane.signed_distance(images.back());
      if (std::abs(src_side) <= kRayEpsilon) continue;
      if (!seq.empty()) {
        // The wave leaving the previous reflection stays on the side of that plane's source
        // image; a plane entirely behind it can never be reached.
        const Plane& prev = planes_[seq.back()];
        const double side = prev.signed_distance(images[images.size() - 2]) > 0.0 ? 1.0 : -1.0;
        if (!box_reaches_side(prev, plane.box, side)) continue;
      }
      seq.push_back(p);
      images.push_back(plane.mirror(images.back()));
      // Receiver must be on the illuminated side of the last plane.
      if (src_side * plane.signed_distance(rx_) > 0.0) validate(seq, images);
      descend(seq, images, depth_left - 1);
      images.pop_back();
      seq.pop_back();
    }
  }

  void validate(const std::vector<std::size_t>& seq, const std::vector<Vec3>& images) {
    const std::size_t n = seq.size();
    std::vector<Vec3> points(n);
    std::vector<std::uint32_t> tri_ids(n);
    Vec3 target = rx_;
    for (std::size_t k = n; k-- > 0;) {
      const Plane& plane = planes_[seq[k]];
      const Vec3& image = images[k + 1];
      const Vec3 dir = target - image;
      const double denom = plane.normal.dot(dir);
      if (denom == 0.0) return;
      const double s = -plane.signed_distance(image) / denom;
      if (!(s > 0.0 && s < 1.0)) return;
      const Vec3 p = image + s * dir;
      const auto hit = std::find_if(plane.triangles.begin(), plane.triangles.end(), [&](std::uint32_t id) {
        return point_in_triangle(scene_.triangles()[id], p);
      });
      if (hit == plane.triangles.end()) return;
      points[k] = p;
      tri_ids[k] = *hit;
      target = p;
    }

    // Segment endpoints: tx, P1..Pn, rx.
    std::vector<Vec3> nodes;
    nodes.reserve(n + 2);
    nodes.push_back(tx_);
    nodes.insert(nodes.end(), points.begin(), points.end());
    nodes.push_back(rx_);
    double length = 0.0;
    std::vector<Vec3> dirs;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      const Vec3 d = nodes[i + 1] - nodes[i];
      const double l = d.norm();
      if (l <= kRayEpsilon) return;
      length += l;
      dirs.push_back(d / l);
    }
    for (std::size_t k = 0; k < n; ++k) {
      const Vec3& nrm = planes_[seq[k]].normal;
      if ((em::reflect_direction<double>(dirs[k], nrm) - dirs[k + 1]).norm() > 1e-9) return;
    }
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
      if (!scene_.is_visible(nodes[i], nodes[i + 1])) return;

    std::vector<Interaction> chain;
    chain.push_back({InteractionKind::Emit, tx_, std::nullopt, 1.0});
    auto transfer = em::PolarizationTransfer<double>::identity(em::angular_basis<double>(dirs[0]));
    for (std::size_t k = 0; k < n; ++k) {
      const Triangle& tri = scene_.triangles()[tri_ids[k]];
      const Material& mat = scene_.material_of(tri_ids[k]);
      const double cos_i = std::abs(dirs[k].dot(tri.normal));
      const auto f = em::fresnel<double>(1.0, complex_permittivity(mat, config_.frequency_hz), cos_i);
      const em::TransverseBasis<double> in{transfer.out.e1, transfer.out.e2, dirs[k]};
      transfer = transfer.then(em::reflection_transfer<double>(in, tri.normal, f, specular_attenuation(mat)));
      chain.push_back({InteractionKind::SpecularReflect, points[k], tri_ids[k], cos_i});
    }
    chain.push_back({InteractionKind::Receive, rx_, std::nullopt, 1.0});
    const Basis arrival{transfer.out.e1, transfer.out.e2, dirs.back()};
    const Mat2c m = em::basis_change(arrival, em::angular_basis<double>(dirs.back())).cast<std::complex<double>>() *
                    transfer.matrix * em::free_space_factor(length, config_.frequency_hz);
    out_->push_back(finish_path(std::move(chain), length, dirs.front(), dirs.back(), m,
                                config_.frequency_hz));
  }

  const Scene& scene_;
  std::vector<Plane> planes_;
  Vec3 tx_, rx_;
  const PathConfig& config_;
  std::vector<PropagationPath>* out_ = nullptr;
};

}  // namespace

std::vector<PropagationPath> image_method_specular(const Scene& scene, const Vec3& tx,
                                                   const Vec3& rx, int depth,
                                                   const PathConfig& config) {
  check_endpoints(scene, tx, rx);
  if (depth < 0 || depth > PathConfig::kMaxReflectionDepthCap)
    throw std::invalid_argument("reflection depth out of range");
  std::vector<PropagationPath> out;
  if (scene.is_visible(tx, rx)) out.push_back(los_path(tx, rx, config.frequency_hz));
  if (depth > 0 && !scene.empty()) SpecularSearch(scene, tx, rx, config).run(depth, out);
  std::stable_sort(out.begin(), out.end(), path_order);
  return out;
}

std::vector<PropagationPath> transmission_paths(const Scene& scene, const Vec3& tx, const Vec3& rx,
                                                const PathConfig& config) {
  check_endpoints(scene, tx, rx);
  std::vector<PropagationPath> out;
  const auto hits = scene.segment_hits(tx, rx);
  if (hits.empty() || static_cast<int>(hits.size()) > config.max_transmission_events) return out;

  const Vec3 delta = rx - tx;
  const double d = delta.norm();
  const Vec3 k = delta / d;
  std::vector<Interaction> chain{{InteractionKind::Emit, tx, std::nullopt, 1.0}};
  auto transfer = em::PolarizationTransfer<double>::identity(em::angular_basis<double>(k));
  for (const auto& hit : hits) {
    const Triangle& tri = scene.triangles()[hit.triangle_id];
    const double cos_i = std::abs(k.dot(tri.normal));
    const auto f = em::fresnel<double>(
        1.0, complex_permittivity(scene.material_of(hit.triangle_id), config.frequency_hz), cos_i);
    transfer = transfer.then(em::transmission_transfer<double>(transfer.out, tri.normal, f,
                                                               em::TransmissionGeometry::Straight));
    chain.push_back({InteractionKind::Transmit, hit.point, hit.triangle_id, cos_i});
  }
  chain.push_back({InteractionKind::Receive, rx, std::nullopt, 1.0});
  const Mat2c m = transfer.rebased(transfer.in, em::angular_basis<double>(k)).matrix *
                  em::free_space_factor(d, config.frequency_hz);
  out.push_back(finish_path(std::move(chain), d, k, k, m, config.frequency_hz));
  return out;
}

std::vector<ScatterPatch> tessellate(const Triangle& triangle, std::uint32_t triangle_id,
                                     double edge) {
  if (!(edge > 0.0)) throw std::invalid_argument("tessellation edge must be positive");
  const auto m = static_cast<int>(std::max(1.0, std::ceil(std::sqrt(triangle.area) / edge - 1e-9)));
  const Vec3& a = triangle.vertices[0];
  const Vec3 du = (triangle.vertices[1] - a) / m;
  const Vec3 dv = (triangle.vertices[2] - a) / m;
  const double patch_area = triangle.area / (static_cast<double>(m) * m);
  std::vector<ScatterPatch> patches;
  patches.reserve(static_cast<std::size_t>(m) * m);
  std::uint32_t index = 0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; i + j < m; ++j) {
      const Vec3 base = a + i * du + j * dv;
      patches.push_back({base + (du + dv) / 3.0, patch_area, triangle_id, index++});
      if (i + j + 1 < m) patches.push_back({base + 2.0 * (du + dv) / 3.0, patch_area, triangle_id, index++});
    }
  }
  return patches;
}

em::ScatteringPhases patch_phases(std::uint64_t seed, std::uint32_t triangle_id,
                                  std::uint32_t patch_index) {
  const std::uint64_t key = derive_seed(derive_seed(seed, triangle_id), patch_index);
  return {2.0 * kPi * unit_from_bits(splitmix64(key)),
          2.0 * kPi * unit_from_bits(splitmix64(key ^ 0xa5a5a5a5a5a5a5a5ULL))};
}

std::vector<PropagationPath> scatter_paths(const Scene& scene, const Vec3& tx, const Vec3& rx,
                                           const PathConfig& config) {
  check_endpoints(scene, tx, rx);
  std::vector<PropagationPath> out;
  const auto& tris = scene.triangles();
  for (std::uint32_t id = 0; id < tris.size(); ++id) {
    const Material& mat = scene.material_of(id);
    if (mat.scattering_coefficient <= 0.0) continue;
    const Triangle& tri = tris[id];
    const double tx_side = tri.normal.dot(tx - tri.vertices[0]);
    const double rx_side = tri.normal.dot(rx - tri.vertices[0]);
    if (tx_side * rx_side <= 0.0 || std::abs(tx_side) <= kRayEpsilon || std::abs(rx_side) <= kRayEpsilon)
      continue;
    const auto eta = complex_permittivity(mat, config.frequency_hz);
    for (const auto& patch : tessellate(tri, id, config.scatter_tessellation_edge)) {
      const Vec3& q = patch.center;
      if (!scene.is_visible(tx, q) || !scene.is_visible(q, rx)) continue;
      const double d1 = (q - tx).norm();
      const double d2 = (rx - q).norm();
      const Vec3 k_i = (q - tx) / d1;
      const Vec3 k_s = (rx - q) / d2;
      const double cos_i = std::abs(k_i.dot(tri.normal));
      if (cos_i <= 0.0) continue;
      const auto f = em::fresnel<double>(1.0, eta, cos_i);
      const auto st = em::scattering_transfer<double>(
          em::angular_basis<double>(k_i), q, rx, tri.normal, mat, patch.area, f,
          patch_phases(config.seed, id, patch.index));
      if (st.matrix.isZero(0.0)) continue;
      // Incident spherical wave at q, and phase accrued on the second leg.
      const double lambda = kSpeedOfLight / config.frequency_hz;
      const double cycles2 = d2 / lambda;
      const Mat2c m = st.matrix * em::free_space_factor(d1, config.frequency_hz) *
                      std::polar(1.0, -2.0 * kPi * (cycles2 - std::floor(cycles2)));
      std::vector<Interaction> chain{{InteractionKind::Emit, tx, std::nullopt, 1.0},
                                     {InteractionKind::DiffuseScatter, q, id, cos_i},
                                     {InteractionKind::Receive, rx, std::nullopt, 1.0}};
      out.push_back(finish_path(std::move(chain), d1 + d2, k_i, k_s, m, config.frequency_hz));
    }
  }
  std::stable_sort(out.begin(), out.end(), path_order);
  return out;
}

std::vector<PropagationPath> solve_paths(const Scene& scene, const Vec3& tx, const Vec3& rx,
                                         const PathConfig& config) {
  config.validate();
  check_endpoints(scene, tx, rx);
  std::vector<PropagationPath> out;
  const int depth = config.reflection ? config.max_reflection_depth : 0;
  for (auto& p : image_method_specular(scene, tx, rx, depth, config)) {
    if (p.kind_signature == "LOS" && !config.line_of_sight) continue;
    out.push_back(std::move(p));
  }
  if (config.transmission && config.max_transmission_events > 0)
    for (auto& p : transmission_paths(scene, tx, rx, config)) out.push_back(std::move(p));
  if (config.scattering)
    for (auto& p : scatter_paths(scene, tx, rx, config)) out.push_back(std::move(p));
  std::stable_sort(out.begin(), out.end(), path_order);
  return out;
}

nlohmann::json path_to_json(const PropagationPath& path) {
  nlohmann::json interactions = nlohmann::json::array();
  for (const auto& it : path.interactions) {
    nlohmann::json j{{"kind", to_string(it.kind)},
                     {"point", {it.point.x(), it.point.y(), it.point.z()}},
                     {"incidence_cosine", it.incidence_cosine}};
    j["triangle"] = it.triangle_id ? nlohmann::json(*it.triangle_id) : nlohmann::json(nullptr);
    interactions.push_back(std::move(j));
  }
  nlohmann::json transfer = nlohmann::json::array();
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      transfer.push_back({path.transfer(r, c).real(), path.transfer(r, c).imag()});
  return {{"kind", path.kind_signature},
          {"length_m", path.total_length},
          {"delay_s", path.delay},
          {"gain_db", path.gain_db()},
          {"aod_rad", {path.aod.azimuth, path.aod.elevation}},
          {"aoa_rad", {path.aoa.azimuth, path.aoa.elevation}},
          {"frequency_hz", path.frequency_hz},
          {"transfer", transfer},
          {"interactions", interactions}};
}

nlohmann::json paths_to_json(const std::vector<PropagationPath>& paths) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : paths) arr.push_back(path_to_json(p));
  return arr;
}

}  // namespace rfsim
