// SPDX-License-Identifier: Apache-2.0

#include "rfsim/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "rfsim/hash.hpp"

namespace rfsim {

using nlohmann::json;

namespace {

// Demo scenes are coarse; this keeps scattering tractable for dataset runs.
constexpr double kPresetTessellationEdge = 8.0;

// Consumes keys of one JSON object and rejects whatever is left over.
class StrictObject {
 public:
  StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(label() + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* take(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  void number(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }
  void integer(const char* key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      out = v->get<int>();
    }
  }
  void u64(const char* key, std::uint64_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void boolean(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }
  void string(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }
  void vec3(const char* key, Vec3& out) {
    if (const json* v = take(key)) {
      if (!v->is_array() || v->size() != 3) fail(key, "expected [x, y, z]");
      for (int i = 0; i < 3; ++i) {
        if (!(*v)[static_cast<std::size_t>(i)].is_number()) fail(key, "expected [x, y, z]");
        out(i) = (*v)[static_cast<std::size_t>(i)].get<double>();
      }
    }
  }
  template <typename E>
  void choice(const char* key, E& out, std::initializer_list<std::pair<const char*, E>> options) {
    if (const json* v = take(key)) {
      if (v->is_string())
        for (const auto& [name, value] : options)
          if (v->get<std::string>() == name) {
            out = value;
            return;
          }
      std::string allowed;
      for (const auto& o : options) allowed += std::string(allowed.empty() ? "" : ", ") + '"' + o.first + '"';
      fail(key, "expected one of " + allowed);
    }
  }

  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  [[noreturn]] void fail(const char* key, const std::string& msg) const {
    throw ConfigError(path(key) + ": " + msg);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) throw ConfigError(path(item.key().c_str()) + ": unknown key");
  }

 private:
  std::string label() const { return where_.empty() ? "config" : where_; }
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

const char* plane_name(ArrayPlane p) {
  switch (p) {
    case ArrayPlane::YZ: return "yz";
    case ArrayPlane::XZ: return "xz";
    case ArrayPlane::XY: return "xy";
  }
  return "yz";
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// -- built-in scene geometry ----------------------------------------------------------------

class ObjWriter {
 public:
  void group(const std::string& name) { text_ << "g " << name << "\n"; }

  void quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const int base = count_;
    for (const Vec3* v : {&a, &b, &c, &d}) {
      text_ << "v " << v->x() << " " << v->y() << " " << v->z() << "\n";
      ++count_;
    }
    text_ << "f " << base + 1 << " " << base + 2 << " " << base + 3 << " " << base + 4 << "\n";
  }

  // Horizontal rectangle at height z, normal +z.
  void floor(double x0, double x1, double y0, double y1, double z) {
    quad({x0, y0, z}, {x1, y0, z}, {x1, y1, z}, {x0, y1, z});
  }

  // Four walls and a roof with outward normals; the base rests on the ground.
  void building(const Vec3& lo, const Vec3& hi) {
    const double x0 = lo.x(), y0 = lo.y(), x1 = hi.x(), y1 = hi.y(), z0 = lo.z(), z1 = hi.z();
    quad({x0, y0, z0}, {x1, y0, z0}, {x1, y0, z1}, {x0, y0, z1});  // -y
    quad({x1, y1, z0}, {x0, y1, z0}, {x0, y1, z1}, {x1, y1, z1});  // +y
    quad({x0, y1, z0}, {x0, y0, z0}, {x0, y0, z1}, {x0, y1, z1});  // -x
    quad({x1, y0, z0}, {x1, y1, z0}, {x1, y1, z1}, {x1, y0, z1});  // +x
    floor(x0, x1, y0, y1, z1);
  }

  std::string str() const { return text_.str(); }

 private:
  std::ostringstream text_;
  int count_ = 0;
};

}  // namespace

// -- value codecs ----------------------------------------------------------------------------

json to_json(const AntennaArray& a) {
  return {{"layout", a.layout == ArrayLayout::UPA ? "upa" : "single"},
          {"rows", a.rows},
          {"cols", a.cols},
          {"spacing_v", a.spacing_v},
          {"spacing_h", a.spacing_h},
          {"polarization", a.polarization == ArrayPolarization::CrossPolarized ? "cross" : "single"},
          {"cross_slant_deg", a.cross_slant_deg},
          {"plane", plane_name(a.plane)},
          {"orientation_deg", vec_json(a.orientation_deg)},
          {"position", vec_json(a.position)}};
}

json to_json(const OfdmGrid& g) {
  return {{"carrier_frequency", g.carrier_frequency},
          {"subcarrier_count", g.subcarrier_count},
          {"subcarrier_spacing", g.subcarrier_spacing}};
}

json to_json(const PathConfig& p) {
  return {{"frequency_hz", p.frequency_hz},
          {"max_reflection_depth", p.max_reflection_depth},
          {"max_transmission_events", p.max_transmission_events},
          {"line_of_sight", p.line_of_sight},
          {"reflection", p.reflection},
          {"transmission", p.transmission},
          {"scattering", p.scattering},
          {"scatter_tessellation_edge", p.scatter_tessellation_edge},
          {"seed", p.seed}};
}

json to_json(const TrajectoryConfig& t) {
  return {{"model", "random-waypoint"},
          {"box_origin", vec_json(t.box_origin)},
          {"box_dims", vec_json(t.box_dims)},
          {"speed", t.speed},
          {"sample_interval", t.sample_interval},
          {"samples_per_trajectory", t.samples_per_trajectory},
          {"trajectory_count", t.trajectory_count},
          {"train_count", t.train_count},
          {"seed", t.seed}};
}

AntennaArray antenna_array_from_json(const json& j, AntennaArray a, const std::string& where) {
  StrictObject o(j, where);
  o.choice("layout", a.layout, {{"single", ArrayLayout::Single}, {"upa", ArrayLayout::UPA}});
  o.integer("rows", a.rows);
  o.integer("cols", a.cols);
  o.number("spacing_v", a.spacing_v);
  o.number("spacing_h", a.spacing_h);
  o.choice("polarization", a.polarization,
           {{"single", ArrayPolarization::Single}, {"cross", ArrayPolarization::CrossPolarized}});
  o.number("cross_slant_deg", a.cross_slant_deg);
  o.choice("plane", a.plane, {{"yz", ArrayPlane::YZ}, {"xz", ArrayPlane::XZ}, {"xy", ArrayPlane::XY}});
  o.vec3("orientation_deg", a.orientation_deg);
  o.vec3("position", a.position);
  o.finish();
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return a;
}

OfdmGrid ofdm_from_json(const json& j, OfdmGrid g, const std::string& where) {
  StrictObject o(j, where);
  o.number("carrier_frequency", g.carrier_frequency);
  o.integer("subcarrier_count", g.subcarrier_count);
  o.number("subcarrier_spacing", g.subcarrier_spacing);
  o.finish();
  return g;
}

PathConfig path_config_from_json(const json& j, PathConfig p, const std::string& where) {
  StrictObject o(j, where);
  o.number("frequency_hz", p.frequency_hz);
  o.integer("max_reflection_depth", p.max_reflection_depth);
  o.integer("max_transmission_events", p.max_transmission_events);
  o.boolean("line_of_sight", p.line_of_sight);
  o.boolean("reflection", p.reflection);
  o.boolean("transmission", p.transmission);
  o.boolean("scattering", p.scattering);
  o.number("scatter_tessellation_edge", p.scatter_tessellation_edge);
  o.u64("seed", p.seed);
  o.finish();
  return p;
}

TrajectoryConfig trajectory_config_from_json(const json& j, TrajectoryConfig t, const std::string& where) {
  StrictObject o(j, where);
  o.choice("model", t.model, {{"random-waypoint", TrajectoryModel::RandomWaypoint}});
  o.vec3("box_origin", t.box_origin);
  o.vec3("box_dims", t.box_dims);
  o.number("speed", t.speed);
  o.number("sample_interval", t.sample_interval);
  o.integer("samples_per_trajectory", t.samples_per_trajectory);
  o.integer("trajectory_count", t.trajectory_count);
  o.integer("train_count", t.train_count);
  o.u64("seed", t.seed);
  o.finish();
  return t;
}

// -- RunConfig -------------------------------------------------------------------------------

PathConfig RunConfig::resolved_paths() const {
  PathConfig p = paths;
  p.frequency_hz = ofdm.carrier_frequency;
  p.seed = derive_seed(seed, 0x7061746873ULL);
  return p;
}

TrajectoryConfig RunConfig::resolved_trajectories() const {
  TrajectoryConfig t = trajectories;
  t.seed = derive_seed(seed, 0x7472616a73ULL);
  return t;
}

std::vector<Material> RunConfig::materials() const {
  return material_library.empty() ? builtin_materials() : load_material_library(material_library);
}

Scene RunConfig::load_scene() const {
  if (scene.mesh.empty()) return builtin_scene(scene.builtin, materials());
  return rfsim::load_scene(scene.mesh, scene.bindings, materials());
}

DatasetJob RunConfig::dataset_job(const Scene& s) const {
  DatasetJob job;
  job.scene = &s;
  job.bs = tx_array;
  job.uav = rx_array;
  job.trajectories = resolved_trajectories();
  job.grid = ofdm;
  job.paths = resolved_paths();
  json echo = to_json();
  echo.erase("output_dir");
  echo.erase("threads");
  job.config_echo = std::move(echo);
  return job;
}

void RunConfig::validate() const {
  const auto wrap = [](const std::string& where, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  };
  if (scene.mesh.empty()) {
    const auto names = builtin_scene_names();
    if (std::find(names.begin(), names.end(), scene.builtin) == names.end())
      throw ConfigError("scene.builtin: unknown scene '" + scene.builtin + "'");
  } else if (scene.bindings.empty()) {
    throw ConfigError("scene.bindings: required together with scene.mesh");
  }
  wrap("tx_array", [&] { tx_array.validate(); });
  wrap("rx_array", [&] { rx_array.validate(); });
  wrap("ofdm", [&] { ofdm.validate(); });
  wrap("paths", [&] { resolved_paths().validate(); });
  wrap("trajectories", [&] { resolved_trajectories().validate(); });
  wrap("ofdm", [&] { check_narrowband(tx_array, rx_array, ofdm); });
  if (!(camera.fov_deg > 0.0 && camera.fov_deg < 180.0))
    throw ConfigError("camera.fov_deg: must lie in (0, 180)");
  if (adp.angle_fft < tx_array.positions_per_polarization())
    throw ConfigError("adp.angle_fft: must be >= elements per polarization (" +
                      std::to_string(tx_array.positions_per_polarization()) + ")");
  if (adp.delay_fft < ofdm.subcarrier_count)
    throw ConfigError("adp.delay_fft: must be >= subcarrier_count");
  if (adp.k < 1) throw ConfigError("adp.k: must be >= 1");
  if (threads < 0) throw ConfigError("threads: must be >= 0");
}

json RunConfig::to_json() const {
  json p = rfsim::to_json(paths);
  p.erase("frequency_hz");
  p.erase("seed");
  json t = rfsim::to_json(trajectories);
  t.erase("seed");
  json s = {{"builtin", scene.builtin}};
  if (!scene.mesh.empty()) s = {{"mesh", scene.mesh}, {"bindings", scene.bindings}};
  return {{"preset", preset},
          {"scene", s},
          {"material_library", material_library},
          {"tx_array", rfsim::to_json(tx_array)},
          {"rx_array", rfsim::to_json(rx_array)},
          {"ofdm", rfsim::to_json(ofdm)},
          {"paths", p},
          {"trajectories", t},
          {"camera",
           {{"fov_deg", camera.fov_deg},
            {"position", vec_json(camera.position)},
            {"rotation_deg", vec_json(camera.rotation_deg)}}},
          {"adp", {{"angle_fft", adp.angle_fft}, {"delay_fft", adp.delay_fft}, {"k", adp.k}}},
          {"output_dir", output_dir},
          {"seed", seed},
          {"threads", threads}};
}

RunConfig great_msd_default() {
  RunConfig c;
  c.preset = "great-msd-default";
  c.tx_array = AntennaArray::upa(4, 8, 2.0, 0.5, ArrayPolarization::CrossPolarized, ArrayPlane::YZ,
                                 Vec3(57.70, 0.01, 25.70));
  c.rx_array = AntennaArray::single(Vec3::Zero());
  c.rx_array.spacing_v = c.rx_array.spacing_h = 0.5;
  c.paths.scatter_tessellation_edge = kPresetTessellationEdge;
  return c;
}

std::vector<std::string> preset_names() { return {"great-msd-default"}; }

RunConfig preset_config(const std::string& name) {
  if (name == "great-msd-default") return great_msd_default();
  throw ConfigError("preset: unknown preset '" + name + "'");
}

RunConfig parse_run_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("config syntax error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
  StrictObject o(doc, "");
  std::string preset = "great-msd-default";
  o.string("preset", preset);
  RunConfig c = preset_config(preset);
  if (const json* s = o.take("scene")) {
    StrictObject so(*s, "scene");
    so.string("builtin", c.scene.builtin);
    so.string("mesh", c.scene.mesh);
    so.string("bindings", c.scene.bindings);
    so.finish();
  }
  o.string("material_library", c.material_library);
  if (const json* v = o.take("tx_array")) c.tx_array = antenna_array_from_json(*v, c.tx_array, "tx_array");
  if (const json* v = o.take("rx_array")) c.rx_array = antenna_array_from_json(*v, c.rx_array, "rx_array");
  if (const json* v = o.take("ofdm")) c.ofdm = ofdm_from_json(*v, c.ofdm, "ofdm");
  if (const json* v = o.take("paths")) {
    if (v->is_object() && (v->contains("seed") || v->contains("frequency_hz")))
      throw ConfigError(std::string("paths.") + (v->contains("seed") ? "seed" : "frequency_hz") +
                        ": derived from the top-level seed and ofdm.carrier_frequency");
    c.paths = path_config_from_json(*v, c.paths, "paths");
  }
  if (const json* v = o.take("trajectories")) {
    if (v->is_object() && v->contains("seed"))
      throw ConfigError("trajectories.seed: derived from the top-level seed");
    c.trajectories = trajectory_config_from_json(*v, c.trajectories, "trajectories");
  }
  if (const json* v = o.take("camera")) {
    StrictObject co(*v, "camera");
    co.number("fov_deg", c.camera.fov_deg);
    co.vec3("position", c.camera.position);
    co.vec3("rotation_deg", c.camera.rotation_deg);
    co.finish();
  }
  if (const json* v = o.take("adp")) {
    StrictObject ao(*v, "adp");
    ao.integer("angle_fft", c.adp.angle_fft);
    ao.integer("delay_fft", c.adp.delay_fft);
    ao.integer("k", c.adp.k);
    ao.finish();
  }
  o.string("output_dir", c.output_dir);
  o.u64("seed", c.seed);
  o.integer("threads", c.threads);
  o.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  RunConfig c = parse_run_config(read_text(path));
  const auto base = std::filesystem::path(path).parent_path();
  const auto anchor = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  anchor(c.scene.mesh);
  anchor(c.scene.bindings);
  anchor(c.material_library);
  return c;
}

std::string serialize_run_config(const RunConfig& config) { return config.to_json().dump(2) + "\n"; }

// -- built-in scenes -------------------------------------------------------------------------

std::vector<std::string> builtin_scene_names() {
  return {"urban-demo", "two-plate", "ground-plane", "empty"};
}

SceneText builtin_scene_text(const std::string& name) {
  ObjWriter w;
  json bindings;
  if (name == "urban-demo") {
    w.group("ground");
    w.floor(-80, 200, -40, 60, 0);
    const struct {
      const char* group;
      const char* material;
      Vec3 lo, hi;
    } blocks[] = {{"building_a", "concrete", {0, 22, 0}, {40, 40, 45}},
                  {"building_b", "glass", {60, 24, 0}, {100, 44, 60}},
                  {"building_c", "brick", {110, 20, 0}, {150, 36, 35}},
                  {"building_d", "concrete", {40, -30, 0}, {75, -8, 20}}};
    bindings["ground"] = "ground";
    for (const auto& b : blocks) {
      w.group(b.group);
      w.building(b.lo, b.hi);
      bindings[b.group] = b.material;
    }
  } else if (name == "two-plate") {
    w.group("floor");
    w.floor(-20, 80, -20, 20, 0);
    w.group("wall");
    w.quad({0, 15, 0}, {60, 15, 0}, {60, 15, 20}, {0, 15, 20});
    bindings = {{"floor", "concrete"}, {"wall", "brick"}};
  } else if (name == "ground-plane") {
    w.group("ground");
    w.floor(-100, 150, -100, 100, 0);
    bindings = {{"ground", "ground"}};
  } else if (name == "empty") {
    return {};
  } else {
    throw ConfigError("unknown built-in scene '" + name + "'");
  }
  return {w.str(), bindings.dump(2) + "\n"};
}

Scene builtin_scene(const std::string& name, const std::vector<Material>& library) {
  const SceneText text = builtin_scene_text(name);
  if (text.obj.empty()) return Scene{};
  return build_scene(parse_obj_mesh(text.obj), parse_material_bindings(text.bindings), library);
}

}  // namespace rfsim
