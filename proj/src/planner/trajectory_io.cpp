#include "ftp/planner/trajectory_io.hpp"

#include <cmath>

#include <json.hpp>

#include "ftp/errors.hpp"
#include "ftp/io.hpp"

namespace ftp::planner {

using Eigen::Vector3d;
using io::format_double;
using json = nlohmann::json;

void write_trajectory_csv(const BSplineTrajectory& traj, double sample_dt, const std::filesystem::path& path,
                          const std::string& config_hash) {
  if (!(sample_dt > 0.0)) throw std::invalid_argument("sample spacing must be positive");
  auto os = io::open_output(path);
  io::write_csv_header(os, {"t", "x", "y", "z", "vx", "vy", "vz"}, config_hash);
  const double T = traj.duration();
  const int n = static_cast<int>(std::floor(T / sample_dt + 1e-9));
  auto row = [&](double t) {
    const Vector3d p = traj.evaluate(t), v = traj.evaluate(t, 1);
    os << format_double(t);
    for (int i = 0; i < 3; ++i) os << ',' << format_double(p[i]);
    for (int i = 0; i < 3; ++i) os << ',' << format_double(v[i]);
    os << '\n';
  };
  for (int k = 0; k <= n; ++k) row(std::min(k * sample_dt, T));
  if (T - n * sample_dt > 1e-9) row(T);
}

namespace {

json vec(const Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

void write_trajectory_json(const BSplineTrajectory& traj, const std::vector<Waypoint>& waypoints,
                           const std::filesystem::path& path, const std::string& config_hash) {
  json doc;
  if (!config_hash.empty()) doc["config_hash"] = config_hash;
  doc["degree"] = traj.degree();
  doc["knot_interval"] = traj.knot_interval();
  doc["duration"] = traj.duration();
  doc["control_points"] = json::array();
  for (const auto& q : traj.control_points()) doc["control_points"].push_back(vec(q));
  doc["waypoints"] = json::array();
  for (const auto& w : waypoints) {
    const auto& o = w.pose.orientation;
    doc["waypoints"].push_back({{"t", w.time},
                                {"position", vec(w.pose.position)},
                                {"orientation_wxyz", {o.w(), o.x(), o.y(), o.z()}},
                                {"velocity", vec(w.velocity)}});
  }
  auto os = io::open_output(path);
  os << doc.dump(2) << '\n';
}

BSplineTrajectory read_trajectory_json(const std::filesystem::path& path) {
  try {
    const json doc = json::parse(io::read_text(path));
    std::vector<Vector3d> pts;
    for (const auto& q : doc.at("control_points")) {
      pts.emplace_back(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>());
    }
    return BSplineTrajectory(std::move(pts), doc.at("knot_interval").get<double>());
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

const std::vector<std::string>& benchmark_columns() {
  static const std::vector<std::string> cols{"scene",    "planner", "trial",        "length_m",
                                             "time_s",   "success", "min_clearance_m"};
  return cols;
}

void append_benchmark_row(const std::filesystem::path& path, const PlannerMetrics& m,
                          const std::string& config_hash) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  auto os = io::open_output(path, /*append=*/true);
  if (fresh) io::write_csv_header(os, benchmark_columns(), config_hash);
  os << m.scene << ',' << m.planner << ',' << m.trial << ',' << format_double(m.length) << ','
     << format_double(m.time) << ',' << (m.success ? 1 : 0) << ',' << format_double(m.min_clearance)
     << '\n';
}

}  // namespace ftp::planner
