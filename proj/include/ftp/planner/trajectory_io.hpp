#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ftp/planner/bspline.hpp"
#include "ftp/planner/trajectory_planner.hpp"

namespace ftp::planner {

/// Rows (t, x, y, z, vx, vy, vz) sampled every `sample_dt`, end included.
void write_trajectory_csv(const BSplineTrajectory& traj, double sample_dt,
                          const std::filesystem::path& path, const std::string& config_hash = "");

/// {"knot_interval", "degree", "duration", "control_points", "waypoints"}.
void write_trajectory_json(const BSplineTrajectory& traj, const std::vector<Waypoint>& waypoints,
                           const std::filesystem::path& path, const std::string& config_hash = "");

/// Reads back the control points and knot interval of a JSON export.
BSplineTrajectory read_trajectory_json(const std::filesystem::path& path);

/// One benchmark row: path length (m), planning time (s), success flag.
struct PlannerMetrics {
  std::string scene;
  std::string planner;
  int trial = 0;
  double length = 0.0;
  double time = 0.0;
  bool success = false;
  double min_clearance = 0.0;
};

const std::vector<std::string>& benchmark_columns();

/// Appends a row; writes the header first when the file is new or empty.
void append_benchmark_row(const std::filesystem::path& path, const PlannerMetrics& m,
                          const std::string& config_hash = "");

}  // namespace ftp::planner
