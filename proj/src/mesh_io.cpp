// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "rfsim/geometry.hpp"

namespace rfsim {

namespace {

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GeometryError(std::string("cannot open ") + what + " '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

[[noreturn]] void mesh_error(std::size_t line, const std::string& msg) {
  throw GeometryError("mesh line " + std::to_string(line) + ": " + msg);
}

}  // namespace

std::vector<MeshGroup> parse_obj_mesh(const std::string& text) {
  std::vector<Vec3> positions;
  std::vector<MeshGroup> groups;
  auto current = [&]() -> MeshGroup& {
    if (groups.empty()) groups.push_back({"default", {}});
    return groups.back();
  };

  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream line(raw);
    std::string tag;
    if (!(line >> tag)) continue;

    if (tag == "v") {
      double x, y, z;
      if (!(line >> x >> y >> z)) mesh_error(line_no, "vertex needs three coordinates");
      if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
        mesh_error(line_no, "non-finite vertex");
      positions.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<std::size_t> idx;
      std::string token;
      while (line >> token) {
        const std::string head = token.substr(0, token.find('/'));
        long long i = 0;
        try {
          std::size_t used = 0;
          i = std::stoll(head, &used);
          if (used != head.size()) throw std::invalid_argument(head);
        } catch (const std::exception&) {
          mesh_error(line_no, "bad face index '" + token + "'");
        }
        if (i < 0) i += static_cast<long long>(positions.size()) + 1;
        if (i < 1 || i > static_cast<long long>(positions.size()))
          mesh_error(line_no, "face index " + head + " out of range");
        idx.push_back(static_cast<std::size_t>(i - 1));
      }
      if (idx.size() < 3) mesh_error(line_no, "face needs at least three vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k)
        current().faces.push_back({positions[idx[0]], positions[idx[k]], positions[idx[k + 1]]});
    } else if (tag == "g" || tag == "o") {
      std::string name;
      line >> name;
      if (name.empty()) mesh_error(line_no, "group without a name");
      auto it = std::find_if(groups.begin(), groups.end(),
                             [&](const MeshGroup& g) { return g.name == name; });
      if (it == groups.end()) {
        groups.push_back({name, {}});
      } else {
        // Re-opened group: move it to the back so subsequent faces land in it.
        MeshGroup g = std::move(*it);
        groups.erase(it);
        groups.push_back(std::move(g));
      }
    }
    // vn, vt, usemtl, mtllib, s, l: ignored.
  }
  std::erase_if(groups, [](const MeshGroup& g) { return g.faces.empty(); });
  return groups;
}

std::map<std::string, std::string> parse_material_bindings(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw GeometryError(std::string("material bindings: ") + e.what());
  }
  if (!doc.is_object()) throw GeometryError("material bindings must be a JSON object");
  std::map<std::string, std::string> out;
  for (const auto& [group, material] : doc.items()) {
    if (!material.is_string())
      throw GeometryError("material bindings: value for '" + group + "' must be a string");
    out[group] = material.get<std::string>();
  }
  return out;
}

Scene build_scene(const std::vector<MeshGroup>& groups,
                  const std::map<std::string, std::string>& bindings,
                  const std::vector<Material>& library) {
  std::size_t face_total = 0;
  for (const auto& g : groups) face_total += g.faces.size();
  if (face_total == 0) throw GeometryError("no geometry");

  std::vector<Material> used;
  std::vector<Triangle> triangles;
  triangles.reserve(face_total);
  for (const auto& g : groups) {
    auto bound = bindings.find(g.name);
    if (bound == bindings.end()) throw GeometryError("group '" + g.name + "' has no material binding");
    auto lib = std::find_if(library.begin(), library.end(),
                            [&](const Material& m) { return m.name == bound->second; });
    if (lib == library.end())
      throw GeometryError("unbound material name '" + bound->second + "' (group '" + g.name + "')");
    auto slot = std::find_if(used.begin(), used.end(),
                             [&](const Material& m) { return m.name == lib->name; });
    if (slot == used.end()) {
      used.push_back(*lib);
      slot = used.end() - 1;
    }
    const auto material_id = static_cast<std::uint32_t>(slot - used.begin());
    for (const auto& f : g.faces) {
      try {
        triangles.push_back(Triangle::make(f[0], f[1], f[2], material_id));
      } catch (const GeometryError&) {
        throw GeometryError("degenerate triangle " + std::to_string(triangles.size()) +
                            " in group '" + g.name + "'");
      }
    }
  }
  return Scene(std::move(triangles), std::move(used));
}

Scene load_scene(const std::string& mesh_path, const std::string& bindings_path,
                 const std::vector<Material>& library) {
  return build_scene(parse_obj_mesh(read_file(mesh_path, "mesh")),
                     parse_material_bindings(read_file(bindings_path, "material bindings")),
                     library);
}

}  // namespace rfsim
