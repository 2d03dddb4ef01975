#include "ftp/planner/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ftp/errors.hpp"

namespace ftp::planner {

using Eigen::Vector3d;

BSplineTrajectory::BSplineTrajectory(std::vector<Vector3d> control_points, double knot_interval)
    : ctrl_(std::move(control_points)), dt_(knot_interval) {
  if (ctrl_.size() < 4) throw std::invalid_argument("cubic B-spline needs at least 4 control points");
  if (!(dt_ > 0.0)) throw std::invalid_argument("knot interval must be positive");
}

std::array<Vector3d, 3> BSplineTrajectory::boundary_points(const Vector3d& p, const Vector3d& v,
                                                           const Vector3d& a, double dt) {
  const Vector3d mid = p - a * (dt * dt / 6.0);
  const Vector3d bend = a * (dt * dt / 2.0);
  return {mid + bend - v * dt, mid, mid + bend + v * dt};
}

Vector3d de_boor(const std::vector<Vector3d>& ctrl, int degree, double dt, double t) {
  const int n = static_cast<int>(ctrl.size()) - 1;
  const int p = degree;
  auto knot = [&](int j) { return (j - p) * dt; };
  int k = p + static_cast<int>(std::floor(t / dt));
  k = std::clamp(k, p, n);

  Vector3d d[8];
  for (int j = 0; j <= p; ++j) d[j] = ctrl[j + k - p];
  for (int r = 1; r <= p; ++r) {
    for (int j = p; j >= r; --j) {
      const int i = j + k - p;
      const double alpha = (t - knot(i)) / (knot(i + p + 1 - r) - knot(i));
      d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
    }
  }
  return d[p];
}

std::vector<Vector3d> BSplineTrajectory::derivative_control_points(int order) const {
  std::vector<Vector3d> pts = ctrl_;
  for (int o = 0; o < order; ++o) {
    std::vector<Vector3d> next(pts.size() - 1);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) next[i] = (pts[i + 1] - pts[i]) / dt_;
    pts = std::move(next);
  }
  return pts;
}

Vector3d BSplineTrajectory::evaluate(double t, int derivative_order) const {
  if (ctrl_.size() < 4) throw OutOfDomain("evaluating an empty trajectory");
  if (derivative_order < 0 || derivative_order > 2) {
    throw std::invalid_argument("derivative order must be 0, 1 or 2");
  }
  const double T = duration();
  const double slack = 1e-12 * std::max(1.0, T);
  if (!(t >= -slack && t <= T + slack)) {
    std::ostringstream msg;
    msg << "t = " << t << " outside [0, " << T << "]";
    throw OutOfDomain(msg.str());
  }
  t = std::clamp(t, 0.0, T);
  // Only the span's four control points matter; differencing them yields the
  // span's derivative control points.
  const int n = static_cast<int>(ctrl_.size()) - 1;
  const int k = std::clamp(kDegree + static_cast<int>(std::floor(t / dt_)), kDegree, n);
  std::vector<Vector3d> local(ctrl_.begin() + (k - kDegree), ctrl_.begin() + k + 1);
  for (int o = 0; o < derivative_order; ++o) {
    for (std::size_t i = 0; i + 1 < local.size(); ++i) local[i] = (local[i + 1] - local[i]) / dt_;
    local.pop_back();
  }
  return de_boor(local, kDegree - derivative_order, dt_, t - (k - kDegree) * dt_);
}

double BSplineTrajectory::arc_length(double step) const {
  const double T = duration();
  const int n = std::max(1, static_cast<int>(std::ceil(T / step)));
  double len = 0.0;
  Vector3d prev = evaluate(0.0);
  for (int i = 1; i <= n; ++i) {
    const Vector3d cur = evaluate(T * i / n);
    len += (cur - prev).norm();
    prev = cur;
  }
  return len;
}

}  // namespace ftp::planner
