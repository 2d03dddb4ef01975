#include <filesystem>
#include <fstream>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ftp/errors.hpp"
#include "ftp/gridmap.hpp"
#include "ftp/io.hpp"
#include "ftp/planner/bspline.hpp"
#include "ftp/planner/bspline_optimizer.hpp"
#include "ftp/planner/kino_search.hpp"
#include "ftp/planner/replan.hpp"
#include "ftp/planner/trajectory_io.hpp"
#include "ftp/planner/trajectory_planner.hpp"
#include "../support/oracles.hpp"

using namespace ftp::planner;
using namespace ftp::gridmap;
using Eigen::Vector3d;

namespace {

DistanceField free_field() { return compute_edf(VoxelGrid::default_workspace()); }

DistanceField field_with_spheres(const std::vector<ftp::geometry::ObstacleSphere>& spheres) {
  VoxelGrid g = VoxelGrid::default_workspace();
  rasterize_spheres(g, spheres);
  return compute_edf(g);
}

std::vector<Vector3d> random_points(std::mt19937_64& rng, int n, double scale = 0.3) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vector3d> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

}  // namespace

// --- B-spline ---------------------------------------------------------------

TEST(BSpline, ConstantCurve) {
  const Vector3d P(0.1, -0.2, 0.3);
  const BSplineTrajectory traj(std::vector<Vector3d>(7, P), 0.1);
  for (double t = 0.0; t <= traj.duration(); t += 0.013) {
    EXPECT_LT((traj.evaluate(t) - P).norm(), 1e-15);
    EXPECT_LT(traj.evaluate(t, 1).norm(), 1e-12);
    EXPECT_LT(traj.evaluate(t, 2).norm(), 1e-10);
  }
}

TEST(BSpline, InteriorKnotWeights) {
  std::mt19937_64 rng(31);
  const auto q = random_points(rng, 8);
  const BSplineTrajectory traj(q, 0.2);
  for (int i = 1; i + 1 < 8; ++i) {
    const double t = (i - 1) * 0.2;
    if (t > traj.duration()) break;
    EXPECT_LT((traj.evaluate(t) - (q[i - 1] + 4 * q[i] + q[i + 1]) / 6.0).norm(), 1e-12);
  }
}

TEST(BSpline, MatchesBasisMatrixOracle) {
  std::mt19937_64 rng(32);
  const auto q = random_points(rng, 10);
  const double dt = 0.15;
  const BSplineTrajectory traj(q, dt);
  std::uniform_real_distribution<double> u(0.0, traj.duration());
  for (int n = 0; n < 200; ++n) {
    const double t = u(rng);
    const int span = std::min(static_cast<int>(t / dt), traj.segment_count() - 1);
    EXPECT_LT((traj.evaluate(t) - oracle::cubic_basis_point(q, span, t / dt - span)).norm(), 1e-12);
  }
}

TEST(BSpline, DerivativeMatchesCentralDifference) {
  std::mt19937_64 rng(33);
  const BSplineTrajectory traj(random_points(rng, 9), 0.1);
  const double h = 1e-5;
  for (double t = 0.05; t < traj.duration() - 0.05; t += 0.037) {
    const Vector3d fd = (traj.evaluate(t + h) - traj.evaluate(t - h)) / (2 * h);
    EXPECT_LT((traj.evaluate(t, 1) - fd).norm(), 1e-6);
    const Vector3d fd2 = (traj.evaluate(t + h, 1) - traj.evaluate(t - h, 1)) / (2 * h);
    EXPECT_LT((traj.evaluate(t, 2) - fd2).norm(), 1e-4);
  }
}

TEST(BSpline, BoundaryPointsReproduceEndState) {
  const Vector3d p(0.1, 0.2, 0.3), v(0.4, -0.1, 0.2), a(-1.0, 0.5, 0.3);
  const double dt = 0.1;
  const auto head = BSplineTrajectory::boundary_points(p, v, a, dt);
  std::vector<Vector3d> ctrl(head.begin(), head.end());
  ctrl.push_back(Vector3d(0.5, 0.5, 0.5));
  const BSplineTrajectory traj(ctrl, dt);
  EXPECT_LT((traj.evaluate(0.0) - p).norm(), 1e-12);
  EXPECT_LT((traj.evaluate(0.0, 1) - v).norm(), 1e-12);
  EXPECT_LT((traj.evaluate(0.0, 2) - a).norm(), 1e-10);
}

TEST(BSpline, OutsideDomainThrows) {
  std::mt19937_64 rng(34);
  const BSplineTrajectory traj(random_points(rng, 5), 0.1);
  EXPECT_THROW(traj.evaluate(-0.01), ftp::OutOfDomain);
  EXPECT_THROW(traj.evaluate(traj.duration() + 0.01), ftp::OutOfDomain);
  EXPECT_THROW(BSplineTrajectory(random_points(rng, 3), 0.1), std::invalid_argument);
}

TEST(BSpline, ConvexHullOfActiveSpan) {
  std::mt19937_64 rng(35);
  for (int n = 0; n < 20; ++n) {
    const auto q = random_points(rng, 8);
    const BSplineTrajectory traj(q, 0.1);
    for (double t = 0.0; t < traj.duration(); t += 0.0097) {
      const int s = std::min(static_cast<int>(t / 0.1), traj.segment_count() - 1);
      const Vector3d p = traj.evaluate(t);
      for (int k = 0; k < 3; ++k) {
        double lo = 1e9, hi = -1e9;
        for (int j = 0; j < 4; ++j) {
          lo = std::min(lo, q[s + j][k]);
          hi = std::max(hi, q[s + j][k]);
        }
        EXPECT_GE(p[k], lo - 1e-12);
        EXPECT_LE(p[k], hi + 1e-12);
      }
    }
  }
}

// --- search -----------------------------------------------------------------

TEST(KinoSearch, FreeSpaceNearlyStraight) {
  const DistanceField f = free_field();
  KinoState s;
  s.position = Vector3d(0.3, -0.3, 0.3);
  const KinoPath path = kino_search(s, Vector3d(0.3, 0.3, 0.3), f, PlannerConfig{});
  EXPECT_FALSE(path.empty());
  EXPECT_LE(path.length(), 1.05 * 0.6);
  EXPECT_LT((path.position(path.duration()) - Vector3d(0.3, 0.3, 0.3)).norm(), 1e-9);
  EXPECT_LT(path.velocity(path.duration()).norm(), 1e-9);
}

TEST(KinoSearch, GoalEqualsStart) {
  KinoState s;
  s.position = Vector3d(0.1, 0.1, 0.1);
  const KinoPath path = kino_search(s, s.position, free_field(), PlannerConfig{});
  EXPECT_TRUE(path.empty());
}

TEST(KinoSearch, CollisionAndBoundsErrors) {
  VoxelGrid g = VoxelGrid::default_workspace();
  rasterize_box(g, Vector3d(0.2, 0.2, 0.2), Vector3d(0.4, 0.4, 0.4));
  const DistanceField f = compute_edf(g);
  KinoState s;
  s.position = Vector3d(-0.3, -0.3, -0.3);
  EXPECT_THROW(kino_search(s, Vector3d(0.3, 0.3, 0.3), f, PlannerConfig{}), ftp::GoalInCollision);
  KinoState inside;
  inside.position = Vector3d(0.3, 0.3, 0.3);
  EXPECT_THROW(kino_search(inside, Vector3d(-0.3, -0.3, -0.3), f, PlannerConfig{}), ftp::StartInCollision);
  EXPECT_THROW(kino_search(s, Vector3d(0.9, 0.0, 0.0), f, PlannerConfig{}), ftp::OutOfBounds);
}

TEST(KinoSearch, WallLeavesOnlyTinyBudget) {
  VoxelGrid g = VoxelGrid::default_workspace();
  rasterize_box(g, Vector3d(-0.6, -0.05, -0.6), Vector3d(0.6, 0.05, 0.6));
  PlannerConfig cfg;
  cfg.node_budget = 500;
  KinoState s;
  s.position = Vector3d(0.0, -0.3, 0.0);
  EXPECT_THROW(kino_search(s, Vector3d(0.0, 0.3, 0.0), compute_edf(g), cfg), ftp::NoPathFound);
}

// --- optimisation -----------------------------------------------------------

TEST(SplineCost, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(36);
  const DistanceField f = field_with_spheres({{Vector3d(0.0, 0.0, 0.0), 0.1}});
  PlannerConfig cfg;
  for (int n = 0; n < 5; ++n) {
    std::vector<Vector3d> q;
    for (int i = 0; i < 12; ++i) q.push_back(Vector3d(-0.3 + 0.05 * i, 0.0, 0.0) + 0.08 * random_points(rng, 1, 1.0)[0]);
    std::vector<Vector3d> grad;
    spline_cost(q, 0.1, f, cfg, &grad);
    const double h = 1e-6;
    for (std::size_t i = 0; i < q.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        auto qp = q, qm = q;
        qp[i][k] += h;
        qm[i][k] -= h;
        const double fd = (spline_cost(qp, 0.1, f, cfg).total - spline_cost(qm, 0.1, f, cfg).total) / (2 * h);
        EXPECT_NEAR(grad[i][k], fd, 1e-5 * std::max(1.0, std::abs(fd))) << "point " << i << " axis " << k;
      }
    }
  }
}

TEST(OptimizeBSpline, CollinearSeedStaysCollinear) {
  std::vector<Vector3d> q;
  for (int i = 0; i < 10; ++i) q.push_back(Vector3d(-0.2 + 0.02 * i, 0.1, 0.1));
  const BSplineTrajectory out = optimize_bspline(q, free_field(), PlannerConfig{});
  for (const auto& p : out.control_points()) {
    EXPECT_NEAR(p.y(), 0.1, 1e-6);
    EXPECT_NEAR(p.z(), 0.1, 1e-6);
  }
}

TEST(OptimizeBSpline, GrazingSeedGainsClearance) {
  PlannerConfig cfg;
  const double r = 0.1;
  const DistanceField f = field_with_spheres({{Vector3d::Zero(), r}});
  // Straight seed passing the sphere with half the safety clearance.
  const double offset = r + 0.5 * cfg.safe_clearance + 0.01;
  std::vector<Vector3d> q;
  for (int i = 0; i < 16; ++i) q.push_back(Vector3d(-0.3 + 0.04 * i, offset, 0.0));
  const BSplineTrajectory seed(q, cfg.knot_interval);
  const double before = check_trajectory(seed, f, cfg).min_clearance;
  OptimizationReport rep;
  const BSplineTrajectory out = optimize_bspline(seed, f, cfg, &rep);
  const double after = check_trajectory(out, f, cfg).min_clearance;
  EXPECT_LT(before, cfg.safe_clearance);
  EXPECT_GT(after, before);
  EXPECT_LE(rep.final_cost, rep.initial_cost);
  for (std::size_t i = 1; i < rep.cost_history.size(); ++i) EXPECT_LE(rep.cost_history[i], rep.cost_history[i - 1]);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(out.control_points()[i], q[i]);
    EXPECT_EQ(out.control_points()[q.size() - 1 - i], q[q.size() - 1 - i]);
  }
}

TEST(OptimizeBSpline, SeedInsideObstacleThrows) {
  const DistanceField f = field_with_spheres({{Vector3d::Zero(), 0.3}});
  std::vector<Vector3d> q(8, Vector3d::Zero());
  PlannerConfig cfg;
  cfg.max_iterations = 1;
  EXPECT_THROW(optimize_bspline(q, f, cfg), ftp::InfeasibleSeed);
}

// --- checking ---------------------------------------------------------------

TEST(CheckTrajectory, FreeAndZeroLength) {
  std::vector<Vector3d> q;
  for (int i = 0; i < 8; ++i) q.push_back(Vector3d(-0.3 + 0.05 * i, 0.0, 0.0));
  const CollisionReport r = check_trajectory(BSplineTrajectory(q, 0.1), free_field(), PlannerConfig{});
  EXPECT_TRUE(r.clean);
  EXPECT_GT(r.min_clearance, 0.0);
  const CollisionReport z =
      check_trajectory(BSplineTrajectory(std::vector<Vector3d>(6, Vector3d(0.1, 0.1, 0.1)), 0.1), free_field(),
                       PlannerConfig{});
  EXPECT_TRUE(z.clean);
}

TEST(CheckTrajectory, EntryTimeIntoBlock) {
  VoxelGrid g = VoxelGrid::default_workspace();
  rasterize_box(g, Vector3d(0.1, -0.1, -0.1), Vector3d(0.3, 0.1, 0.1));
  const DistanceField f = compute_edf(g);
  // Occupied voxels cover x in [0.1, 0.3] exactly (voxel faces at multiples of 0.02).
  const double dt = 0.1, step = 0.03;  // 0.3 m/s along x
  std::vector<Vector3d> q;
  for (int i = 0; i < 20; ++i) q.push_back(Vector3d(-0.3 + step * i, 0.01, 0.01));
  const BSplineTrajectory traj(q, dt);
  const CollisionReport r = check_trajectory(traj, f, PlannerConfig{});
  ASSERT_FALSE(r.clean);
  // x(t) = q[1].x + (t / dt) * step
  const double entry = (0.1 - q[1].x()) / step * dt;
  const double spacing = g.lattice.resolution / (step / dt);
  EXPECT_NEAR(r.collision_time, entry, spacing);
}

TEST(CheckTrajectory, LeavingTheMapIsACollision) {
  std::vector<Vector3d> q;
  for (int i = 0; i < 10; ++i) q.push_back(Vector3d(0.3 + 0.05 * i, 0.0, 0.0));
  EXPECT_FALSE(check_trajectory(BSplineTrajectory(q, 0.1), free_field(), PlannerConfig{}).clean);
}

// --- full pipeline ------------------------------------------------------------

TEST(PlanTrajectory, FreeSpaceEndpointsAndLimits) {
  PlannerConfig cfg;
  PlanStart s;
  s.position = Vector3d(-0.2, -0.2, 0.1);
  const Vector3d goal(0.3, 0.2, 0.3);
  const PlanResult r = plan_trajectory(s, goal, free_field(), cfg);
  EXPECT_LT((r.trajectory.evaluate(0.0) - s.position).norm(), 1e-9);
  EXPECT_LT((r.trajectory.evaluate(r.trajectory.duration()) - goal).norm(), cfg.goal_tolerance);
  EXPECT_LE(r.trajectory.arc_length(), 1.05 * (goal - s.position).norm());
  EXPECT_TRUE(r.dynamically_feasible);
  EXPECT_TRUE(is_dynamically_feasible(r.trajectory, cfg, 1e-6));
}

TEST(PlanTrajectory, GoalInsideObstacle) {
  const DistanceField f = field_with_spheres({{Vector3d(0.3, 0.3, 0.3), 0.1}});
  PlanStart s;
  EXPECT_THROW(plan_trajectory(s, Vector3d(0.3, 0.3, 0.3), f, PlannerConfig{}), ftp::GoalInCollision);
}

TEST(Parameterize, EndStatesMatchPath) {
  KinoState s;
  s.position = Vector3d(-0.2, 0.0, 0.0);
  const KinoPath path = kino_search(s, Vector3d(0.2, 0.1, 0.0), free_field(), PlannerConfig{});
  const BSplineTrajectory traj = parameterize(path, 0.1, Vector3d::Zero(), Vector3d::Zero());
  EXPECT_LT((traj.evaluate(0.0) - s.position).norm(), 1e-12);
  EXPECT_LT(traj.evaluate(0.0, 1).norm(), 1e-12);
  EXPECT_LT((traj.evaluate(traj.duration()) - path.position(path.duration())).norm(), 1e-12);
  EXPECT_NEAR(traj.duration(), path.duration(), 1e-12);
  EXPECT_LE(traj.knot_interval(), 0.1 + 1e-12);
}

// --- waypoints ----------------------------------------------------------------

TEST(EmitWaypoints, CountAndSamples) {
  std::mt19937_64 rng(37);
  const auto q = random_points(rng, 4 + 10);
  const BSplineTrajectory traj(std::vector<Vector3d>(q.begin(), q.begin() + 13), 0.1);  // 10 spans -> 1.0 s
  ASSERT_NEAR(traj.duration(), 1.0, 1e-12);
  const Eigen::Quaterniond a = Eigen::Quaterniond::Identity();
  const Eigen::Quaterniond b(Eigen::AngleAxisd(1.0, Vector3d::UnitZ()));
  const auto w = emit_waypoints(traj, 0.25, a, b);
  ASSERT_EQ(w.size(), 5u);
  for (const auto& p : w) {
    EXPECT_LT((p.pose.position - traj.evaluate(p.time)).norm(), 1e-12);
    EXPECT_LT((p.velocity - traj.evaluate(p.time, 1)).norm(), 1e-12);
  }
  EXPECT_NEAR(w.back().time, 1.0, 1e-12);
  EXPECT_LT(oracle::quat_distance(w.front().pose.orientation, a), 1e-12);
  EXPECT_LT(oracle::quat_distance(w.back().pose.orientation, b), 1e-12);
}

TEST(EmitWaypoints, ConstantTrajectory) {
  const BSplineTrajectory traj(std::vector<Vector3d>(6, Vector3d(0.1, 0.2, 0.3)), 0.1);
  const Eigen::Quaterniond q(Eigen::AngleAxisd(0.3, Vector3d::UnitX()));
  const auto w = emit_waypoints(traj, 0.05, q, Eigen::Quaterniond::Identity());
  for (const auto& p : w) {
    EXPECT_LT((p.pose.position - w.front().pose.position).norm(), 1e-15);
    EXPECT_LT(oracle::quat_distance(p.pose.orientation, w.front().pose.orientation), 1e-15);
  }
}

// --- replanning -----------------------------------------------------------------

TEST(Replan, KeepPeriodicCollisionAndGoal) {
  PlannerConfig cfg;
  cfg.replan_period = 0.5;
  ReplanManager m(cfg);
  const DistanceField free = free_field();
  m.initialize(Vector3d(-0.4, 0.0, 0.1), Vector3d(0.4, 0.0, 0.1), free, 0.0);

  EXPECT_FALSE(m.step(0.2, free).replanned());
  const ReplanOutcome periodic = m.step(0.5, free);
  EXPECT_EQ(periodic.trigger, ReplanTrigger::Periodic);

  // Sphere dropped onto the remaining path.
  const PlanStart before = m.state_at(0.6);
  const DistanceField blocked = field_with_spheres({{Vector3d(0.2, 0.0, 0.1), 0.08}});
  const ReplanOutcome hit = m.step(0.6, blocked);
  ASSERT_TRUE(hit.replanned());
  EXPECT_EQ(hit.trigger, ReplanTrigger::Collision);
  EXPECT_LT((m.trajectory().evaluate(0.0) - before.position).norm(), 1e-6);
  EXPECT_LT((m.trajectory().evaluate(0.0, 1) - before.velocity).norm(), 1e-6);
  EXPECT_TRUE(check_trajectory(m.trajectory(), blocked, cfg).clean);

  m.set_goal(Vector3d(0.0, 0.4, 0.3));
  const ReplanOutcome g = m.step(0.65, blocked);
  EXPECT_EQ(g.trigger, ReplanTrigger::GoalChanged);
  const auto& t = m.trajectory();
  EXPECT_LT((t.evaluate(t.duration()) - Vector3d(0.0, 0.4, 0.3)).norm(), cfg.goal_tolerance);
}

TEST(Replan, FailureKeepsPreviousPlan) {
  ReplanManager m{PlannerConfig{}};
  m.initialize(Vector3d(-0.4, 0.0, 0.1), Vector3d(0.4, 0.0, 0.1), free_field(), 0.0);
  const auto before = m.trajectory().control_points();
  m.set_goal(Vector3d(0.0, 0.0, 0.0));
  const DistanceField f = field_with_spheres({{Vector3d::Zero(), 0.1}});
  EXPECT_THROW(m.step(0.1, f), ftp::GoalInCollision);
  EXPECT_EQ(m.trajectory().control_points(), before);
}

// --- files ------------------------------------------------------------------------

TEST(TrajectoryIo, JsonRoundTripAndCsvHeader) {
  std::mt19937_64 rng(38);
  const BSplineTrajectory traj(random_points(rng, 8), 0.1);
  const auto dir = std::filesystem::temp_directory_path() / "ftp_traj_io";
  const auto w = emit_waypoints(traj, 0.1, Eigen::Quaterniond::Identity(), Eigen::Quaterniond::Identity());
  write_trajectory_json(traj, w, dir / "t.json", "abc");
  const BSplineTrajectory back = read_trajectory_json(dir / "t.json");
  EXPECT_EQ(back.control_points(), traj.control_points());
  EXPECT_EQ(back.knot_interval(), traj.knot_interval());

  write_trajectory_csv(traj, 0.05, dir / "t.csv", "abc");
  std::ifstream in(dir / "t.csv");
  std::string l1, l2;
  std::getline(in, l1);
  std::getline(in, l2);
  EXPECT_EQ(l1, "# config_hash=abc");
  EXPECT_EQ(l2, "t,x,y,z,vx,vy,vz");

  const auto bench = dir / "bench.csv";
  std::filesystem::remove(bench);
  append_benchmark_row(bench, PlannerMetrics{"s", "ours", 0, 0.5, 0.01, true, 0.02}, "abc");
  append_benchmark_row(bench, PlannerMetrics{"s", "ours", 1, 0.6, 0.02, false, 0.0}, "abc");
  std::ifstream b(bench);
  int lines = 0, headers = 0;
  for (std::string line; std::getline(b, line); ++lines) headers += line.rfind("scene,", 0) == 0 ? 1 : 0;
  EXPECT_EQ(lines, 4);
  EXPECT_EQ(headers, 1);
  std::filesystem::remove_all(dir);
}

TEST(Io, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(39);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int n = 0; n < 1000; ++n) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    EXPECT_EQ(std::stod(ftp::io::format_double(v)), v);
  }
}
