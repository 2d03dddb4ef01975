#include "ftp/planner/bspline_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "ftp/errors.hpp"

namespace ftp::planner {

using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

Vector3d clamp_into(const gridmap::Lattice& l, const Vector3d& p) {
  return p.cwiseMax(l.origin).cwiseMin(l.upper_corner());
}

// d/dx of max(0, |x| - limit)^2
double hinge_sq(double x, double limit, double* dx) {
  const double excess = std::abs(x) - limit;
  if (excess <= 0.0) {
    if (dx) *dx = 0.0;
    return 0.0;
  }
  if (dx) *dx = 2.0 * excess * (x > 0.0 ? 1.0 : -1.0);
  return excess * excess;
}

}  // namespace

SplineCostTerms spline_cost(const std::vector<Vector3d>& ctrl, double dt,
                            const gridmap::DistanceField& field, const PlannerConfig& cfg,
                            std::vector<Vector3d>* gradient) {
  const int n = static_cast<int>(ctrl.size());
  SplineCostTerms terms;
  if (gradient) gradient->assign(n, Vector3d::Zero());

  for (int i = 1; i + 1 < n; ++i) {
    const Vector3d acc = ctrl[i + 1] - 2.0 * ctrl[i] + ctrl[i - 1];
    terms.smoothness += acc.squaredNorm();
    if (gradient) {
      const Vector3d g = 2.0 * cfg.lambda_smooth * acc;
      (*gradient)[i + 1] += g;
      (*gradient)[i] -= 2.0 * g;
      (*gradient)[i - 1] += g;
    }
  }

  for (int i = kFixedEndPoints; i < n - kFixedEndPoints; ++i) {
    Vector3d grad_c;
    const double c = gridmap::query_clearance(field, clamp_into(field.lattice, ctrl[i]), grad_c);
    const double gap = cfg.safe_clearance - c;
    if (gap > 0.0) {
      terms.collision += gap * gap;
      if (gradient) (*gradient)[i] += -2.0 * cfg.lambda_collision * gap * grad_c;
    }
  }

  const double v_lim = kFeasibilityMargin * cfg.v_max;
  const double a_lim = kFeasibilityMargin * cfg.a_lim;
  for (int i = 0; i + 1 < n; ++i) {
    const Vector3d v = (ctrl[i + 1] - ctrl[i]) / dt;
    for (int ax = 0; ax < 3; ++ax) {
      double d;
      terms.feasibility += hinge_sq(v[ax], v_lim, gradient ? &d : nullptr);
      if (gradient && d != 0.0) {
        const double g = cfg.lambda_feasible * d / dt;
        (*gradient)[i + 1][ax] += g;
        (*gradient)[i][ax] -= g;
      }
    }
  }
  for (int i = 0; i + 2 < n; ++i) {
    const Vector3d a = (ctrl[i + 2] - 2.0 * ctrl[i + 1] + ctrl[i]) / (dt * dt);
    for (int ax = 0; ax < 3; ++ax) {
      double d;
      terms.feasibility += hinge_sq(a[ax], a_lim, gradient ? &d : nullptr);
      if (gradient && d != 0.0) {
        const double g = cfg.lambda_feasible * d / (dt * dt);
        (*gradient)[i + 2][ax] += g;
        (*gradient)[i + 1][ax] -= 2.0 * g;
        (*gradient)[i][ax] += g;
      }
    }
  }

  terms.total = cfg.lambda_smooth * terms.smoothness + cfg.lambda_collision * terms.collision +
                cfg.lambda_feasible * terms.feasibility;
  return terms;
}

bool is_dynamically_feasible(const BSplineTrajectory& traj, const PlannerConfig& cfg, double tolerance) {
  for (const auto& v : traj.derivative_control_points(1)) {
    if (v.cwiseAbs().maxCoeff() > cfg.v_max + tolerance) return false;
  }
  for (const auto& a : traj.derivative_control_points(2)) {
    if (a.cwiseAbs().maxCoeff() > cfg.a_lim + tolerance) return false;
  }
  return true;
}

namespace {

class FreePointProblem {
 public:
  FreePointProblem(std::vector<Vector3d> ctrl, double dt, const gridmap::DistanceField& field,
                   const PlannerConfig& cfg)
      : ctrl_(std::move(ctrl)), dt_(dt), field_(field), cfg_(cfg) {
    first_ = kFixedEndPoints;
    count_ = std::max(0, static_cast<int>(ctrl_.size()) - 2 * kFixedEndPoints);
  }

  int dimension() const { return 3 * count_; }

  VectorXd initial() const {
    VectorXd x(dimension());
    for (int i = 0; i < count_; ++i) x.segment<3>(3 * i) = ctrl_[first_ + i];
    return x;
  }

  double evaluate(const VectorXd& x, VectorXd* grad) {
    for (int i = 0; i < count_; ++i) ctrl_[first_ + i] = x.segment<3>(3 * i);
    std::vector<Vector3d> g;
    const double f = spline_cost(ctrl_, dt_, field_, cfg_, grad ? &g : nullptr).total;
    if (grad) {
      grad->resize(dimension());
      for (int i = 0; i < count_; ++i) grad->segment<3>(3 * i) = g[first_ + i];
    }
    return f;
  }

  std::vector<Vector3d> points(const VectorXd& x) {
    for (int i = 0; i < count_; ++i) ctrl_[first_ + i] = x.segment<3>(3 * i);
    return ctrl_;
  }

 private:
  std::vector<Vector3d> ctrl_;
  double dt_;
  const gridmap::DistanceField& field_;
  const PlannerConfig& cfg_;
  int first_ = 0;
  int count_ = 0;
};

}  // namespace

BSplineTrajectory optimize_bspline(const BSplineTrajectory& seed, const gridmap::DistanceField& field,
                                   const PlannerConfig& cfg, OptimizationReport* report) {
  cfg.validate();
  FreePointProblem problem(seed.control_points(), seed.knot_interval(), field, cfg);
  OptimizationReport rep;

  VectorXd x = problem.initial();
  VectorXd g;
  double f = problem.evaluate(x, &g);
  rep.initial_cost = f;
  rep.cost_history.push_back(f);

  constexpr int kMemory = 8;
  std::deque<std::pair<VectorXd, VectorXd>> memory;  // (s, y)

  int it = 0;
  while (problem.dimension() > 0 && it < cfg.max_iterations) {
    if (g.lpNorm<Eigen::Infinity>() < cfg.gradient_tolerance) break;

    // Two-loop recursion.
    VectorXd dir = -g;
    std::vector<double> alphas(memory.size());
    for (int m = static_cast<int>(memory.size()) - 1; m >= 0; --m) {
      const auto& [s, y] = memory[m];
      alphas[m] = s.dot(dir) / y.dot(s);
      dir -= alphas[m] * y;
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      dir *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t m = 0; m < memory.size(); ++m) {
      const auto& [s, y] = memory[m];
      const double beta = y.dot(dir) / y.dot(s);
      dir += (alphas[m] - beta) * s;
    }
    if (dir.dot(g) >= 0.0) {
      memory.clear();
      dir = -g;
    }

    // Backtracking (Armijo).
    const double slope = dir.dot(g);
    double step = 1.0;
    VectorXd x_new, g_new;
    double f_new = f;
    bool accepted = false;
    for (int k = 0; k < 50; ++k, step *= 0.5) {
      x_new = x + step * dir;
      f_new = problem.evaluate(x_new, &g_new);
      if (f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted || f_new > f) {
      if (memory.empty()) break;
      memory.clear();
      continue;
    }
    const VectorXd s = x_new - x;
    const VectorXd y = g_new - g;
    if (s.dot(y) > 1e-16) {
      memory.emplace_back(s, y);
      if (memory.size() > kMemory) memory.pop_front();
    }
    x = std::move(x_new);
    g = std::move(g_new);
    f = f_new;
    rep.cost_history.push_back(f);
    ++it;
  }

  rep.iterations = it;
  rep.final_cost = f;
  rep.gradient_inf_norm = problem.dimension() > 0 ? g.lpNorm<Eigen::Infinity>() : 0.0;
  std::vector<Vector3d> pts = problem.points(x);

  for (int i = kFixedEndPoints; i < static_cast<int>(pts.size()) - kFixedEndPoints; ++i) {
    const Vector3d q = clamp_into(field.lattice, pts[i]);
    if (gridmap::query_clearance(field, q) <= 0.0) {
      if (report) *report = rep;
      throw InfeasibleSeed("control point remains in occupied space after optimisation");
    }
  }
  if (report) *report = rep;
  return BSplineTrajectory(std::move(pts), seed.knot_interval());
}

BSplineTrajectory optimize_bspline(const std::vector<Vector3d>& seed, const gridmap::DistanceField& field,
                                   const PlannerConfig& cfg, OptimizationReport* report) {
  if (seed.size() < 4) throw InfeasibleSeed("seed needs at least 4 control points");
  return optimize_bspline(BSplineTrajectory(seed, cfg.knot_interval), field, cfg, report);
}

}  // namespace ftp::planner
