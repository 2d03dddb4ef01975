#include "ftp/scene.hpp"

#include <random>
#include <set>

#include "ftp/errors.hpp"
#include "ftp/io.hpp"

namespace ftp::scene {

using Eigen::Vector3d;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

Vector3d vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

}  // namespace

Vector3d SceneSphere::center_at(double t) const {
  if (path.empty()) return center;
  if (t <= path.front().time) return path.front().center;
  if (t >= path.back().time) return path.back().center;
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (t <= path[i].time) {
      const Keyframe& a = path[i - 1];
      const Keyframe& b = path[i];
      const double s = (t - a.time) / (b.time - a.time);
      return a.center + s * (b.center - a.center);
    }
  }
  return path.back().center;
}

bool Scene::dynamic() const {
  for (const auto& s : spheres) {
    if (s.moving() || s.appear_at > 0.0) return true;
  }
  return false;
}

std::vector<geometry::ObstacleSphere> Scene::spheres_at(double t) const {
  std::vector<geometry::ObstacleSphere> out;
  for (const auto& s : spheres) {
    if (s.present(t)) out.push_back({s.center_at(t), s.radius});
  }
  return out;
}

gridmap::VoxelGrid Scene::grid_at(double t) const {
  gridmap::VoxelGrid grid = cloud.empty() ? gridmap::VoxelGrid::empty(lattice) : gridmap::voxelize(cloud, lattice);
  const auto sp = spheres_at(t);
  gridmap::rasterize_spheres(grid, sp);
  for (const auto& b : boxes) gridmap::rasterize_box(grid, b.lo, b.hi);
  return grid;
}

gridmap::DistanceField Scene::field_at(double t) const { return gridmap::compute_edf(grid_at(t)); }

Vector3d Scene::goal_at(double t) const {
  Vector3d g = goal;
  for (const auto& c : goal_changes) {
    if (t >= c.time) g = c.goal;
  }
  return g;
}

Scene scene_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "scene",
             {"name", "grid", "start", "goal", "goal_orientation_wxyz", "spheres", "boxes", "random_spheres",
              "point_cloud", "table_z", "complete_occlusion", "goal_changes"});
  Scene s;
  s.name = j.value("name", std::string("scene"));
  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, "scene.grid", {"origin", "resolution", "dims"});
    if (g.contains("origin")) s.lattice.origin = vec3(g["origin"], "scene.grid.origin");
    if (g.contains("resolution")) s.lattice.resolution = number(g["resolution"], "scene.grid.resolution");
    if (g.contains("dims")) {
      const auto dims = g["dims"].get<std::vector<int>>();
      if (dims.size() != 3) throw ConfigError("scene.grid.dims: expected three integers");
      s.lattice.dims = {dims[0], dims[1], dims[2]};
    }
    if (!(s.lattice.resolution > 0.0) || s.lattice.dims[0] < 2 || s.lattice.dims[1] < 2 ||
        s.lattice.dims[2] < 2) {
      throw ConfigError("scene.grid: resolution must be positive and every dimension at least 2");
    }
  }
  if (!j.contains("start") || !j.contains("goal")) throw ConfigError("scene: start and goal are required");
  s.start = vec3(j["start"], "scene.start");
  s.goal = vec3(j["goal"], "scene.goal");
  if (j.contains("goal_orientation_wxyz")) {
    const auto q = j["goal_orientation_wxyz"].get<std::vector<double>>();
    if (q.size() != 4) throw ConfigError("scene.goal_orientation_wxyz: expected four numbers");
    s.goal_orientation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized();
  }
  for (const json& o : j.value("spheres", json::array())) {
    check_keys(o, "scene.spheres[]", {"center", "radius", "appear_at", "path"});
    SceneSphere sp;
    if (o.contains("center")) sp.center = vec3(o["center"], "scene.spheres[].center");
    if (o.contains("radius")) sp.radius = number(o["radius"], "scene.spheres[].radius");
    if (!(sp.radius > 0.0)) throw ConfigError("scene.spheres[].radius must be positive");
    if (o.contains("appear_at")) sp.appear_at = number(o["appear_at"], "scene.spheres[].appear_at");
    for (const json& k : o.value("path", json::array())) {
      check_keys(k, "scene.spheres[].path[]", {"t", "center"});
      sp.path.push_back({number(k.at("t"), "path.t"), vec3(k.at("center"), "path.center")});
      if (sp.path.size() > 1 && !(sp.path.back().time > sp.path[sp.path.size() - 2].time)) {
        throw ConfigError("scene.spheres[].path: keyframe times must increase");
      }
    }
    if (!o.contains("center") && sp.path.empty()) throw ConfigError("scene.spheres[]: need center or path");
    if (!o.contains("center")) sp.center = sp.path.front().center;
    s.spheres.push_back(std::move(sp));
  }
  for (const json& b : j.value("boxes", json::array())) {
    check_keys(b, "scene.boxes[]", {"lo", "hi"});
    s.boxes.push_back({vec3(b.at("lo"), "scene.boxes[].lo"), vec3(b.at("hi"), "scene.boxes[].hi")});
  }
  if (j.contains("random_spheres")) {
    const json& r = j["random_spheres"];
    check_keys(r, "scene.random_spheres", {"count", "radius", "lo", "hi", "endpoint_clearance"});
    s.random.count = r.value("count", 0);
    s.random.radius = r.value("radius", s.random.radius);
    if (r.contains("lo")) s.random.lo = vec3(r["lo"], "scene.random_spheres.lo");
    if (r.contains("hi")) s.random.hi = vec3(r["hi"], "scene.random_spheres.hi");
    s.random.endpoint_clearance = r.value("endpoint_clearance", s.random.endpoint_clearance);
    if (s.random.count < 0 || !(s.random.radius > 0.0)) throw ConfigError("scene.random_spheres: bad count/radius");
  }
  s.table_z = j.value("table_z", 0.0);
  if (j.contains("point_cloud")) {
    std::filesystem::path p = j["point_cloud"].get<std::string>();
    if (!p.is_absolute()) p = base_dir / p;
    if (!std::filesystem::exists(p)) throw IoError("scene.point_cloud: no such file " + p.string());
    gridmap::PointCloud raw = gridmap::read_point_cloud(p);
    gridmap::PointCloud above = gridmap::filter_above_table(raw, s.table_z, 0.5 * s.lattice.resolution);
    s.cloud = j.value("complete_occlusion", true)
                  ? gridmap::complete_occlusion(above, s.table_z, s.lattice.resolution)
                  : above;
  }
  for (const json& c : j.value("goal_changes", json::array())) {
    check_keys(c, "scene.goal_changes[]", {"t", "goal"});
    s.goal_changes.push_back({number(c.at("t"), "goal_changes.t"), vec3(c.at("goal"), "goal_changes.goal")});
  }
  return s;
}

Scene load_scene(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return scene_from_json(j, path.parent_path());
}

Scene with_random_spheres(Scene scene, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const RandomSpheres& r = scene.random;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = r.radius + r.endpoint_clearance;
  int placed = 0;
  for (int attempt = 0; placed < r.count; ++attempt) {
    if (attempt > 10000 * (r.count + 1)) throw ConfigError("random_spheres: cannot place spheres clear of start/goal");
    Vector3d c;
    for (int k = 0; k < 3; ++k) c[k] = r.lo[k] + u(rng) * (r.hi[k] - r.lo[k]);
    if ((c - scene.start).norm() < keep || (c - scene.goal).norm() < keep) continue;
    SceneSphere sp;
    sp.center = c;
    sp.radius = r.radius;
    scene.spheres.push_back(sp);
    ++placed;
  }
  return scene;
}

}  // namespace ftp::scene
