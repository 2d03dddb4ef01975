#include "ftp/planner/kino_search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "ftp/errors.hpp"

namespace ftp::planner {

using Eigen::Vector3d;

KinoSegment KinoSegment::primitive(const KinoState& from, const Vector3d& accel, double duration) {
  KinoSegment s;
  s.coeffs.col(0) = from.position;
  s.coeffs.col(1) = from.velocity;
  s.coeffs.col(2) = 0.5 * accel;
  s.duration = duration;
  return s;
}

KinoSegment KinoSegment::hermite(const KinoState& from, const KinoState& to, double duration) {
  const double T = duration;
  const Vector3d delta = to.position - from.position;
  KinoSegment s;
  s.coeffs.col(0) = from.position;
  s.coeffs.col(1) = from.velocity;
  s.coeffs.col(2) = (3.0 * delta - (2.0 * from.velocity + to.velocity) * T) / (T * T);
  s.coeffs.col(3) = (-2.0 * delta + (from.velocity + to.velocity) * T) / (T * T * T);
  s.duration = T;
  s.is_shot = true;
  return s;
}

Vector3d KinoSegment::position(double s) const {
  return coeffs.col(0) + s * (coeffs.col(1) + s * (coeffs.col(2) + s * coeffs.col(3)));
}

Vector3d KinoSegment::velocity(double s) const {
  return coeffs.col(1) + s * (2.0 * coeffs.col(2) + 3.0 * s * coeffs.col(3));
}

Vector3d KinoSegment::acceleration(double s) const {
  return 2.0 * coeffs.col(2) + 6.0 * s * coeffs.col(3);
}

double KinoPath::duration() const {
  double t = 0.0;
  for (const auto& s : segments) t += s.duration;
  return t;
}

std::vector<TimedState> KinoPath::states() const {
  std::vector<TimedState> out;
  out.push_back({start, 0.0});
  double t = 0.0;
  for (const auto& s : segments) {
    t += s.duration;
    out.push_back({{s.position(s.duration), s.velocity(s.duration)}, t});
  }
  return out;
}

namespace {

// Locates the segment containing t; t past the end maps to the final point.
template <typename F>
Vector3d eval_path(const KinoPath& path, double t, const Vector3d& at_start, F&& f) {
  if (path.segments.empty()) return at_start;
  double t0 = 0.0;
  for (std::size_t i = 0; i < path.segments.size(); ++i) {
    const auto& s = path.segments[i];
    if (t <= t0 + s.duration || i + 1 == path.segments.size()) {
      return f(s, std::clamp(t - t0, 0.0, s.duration));
    }
    t0 += s.duration;
  }
  return at_start;
}

}  // namespace

Vector3d KinoPath::position(double t) const {
  return eval_path(*this, t, start.position, [](const KinoSegment& s, double u) { return s.position(u); });
}

Vector3d KinoPath::velocity(double t) const {
  return eval_path(*this, t, start.velocity, [](const KinoSegment& s, double u) { return s.velocity(u); });
}

Vector3d KinoPath::acceleration(double t) const {
  return eval_path(*this, t, Vector3d::Zero(),
                   [](const KinoSegment& s, double u) { return s.acceleration(u); });
}

double KinoPath::length(double step) const {
  double len = 0.0;
  for (const auto& s : segments) {
    const int n = std::max(1, static_cast<int>(std::ceil(s.duration / step)));
    Vector3d prev = s.position(0.0);
    for (int i = 1; i <= n; ++i) {
      const Vector3d cur = s.position(s.duration * i / n);
      len += (cur - prev).norm();
      prev = cur;
    }
  }
  return len;
}

namespace {

struct Node {
  KinoState state;
  double g = 0.0;
  int parent = -1;
  Vector3d accel = Vector3d::Zero();
  std::int64_t cell = 0;
  bool closed = false;
};

struct OpenEntry {
  double f;
  double g;
  std::uint64_t order;
  int node;
  bool operator>(const OpenEntry& o) const {
    if (f != o.f) return f > o.f;
    if (g != o.g) return g > o.g;
    return order > o.order;
  }
};

class Search {
 public:
  Search(const KinoState& start, const Vector3d& goal, const gridmap::DistanceField& field,
         const PlannerConfig& cfg)
      : start_(start), goal_(goal), field_(field), cfg_(cfg) {}

  KinoPath run();

 private:
  double required_clearance(const Vector3d& p) const {
    double req = cfg_.safe_clearance;
    if (start_clearance_ < cfg_.safe_clearance && (p - start_.position).norm() <= cfg_.safe_clearance) {
      req = std::min(req, 0.5 * start_clearance_);
    }
    if (goal_clearance_ < cfg_.safe_clearance && (p - goal_).norm() <= cfg_.safe_clearance) {
      req = std::min(req, 0.5 * goal_clearance_);
    }
    return req;
  }

  bool point_ok(const Vector3d& p) const {
    if (!field_.lattice.contains(p)) return false;
    return gridmap::query_clearance(field_, p) >= required_clearance(p);
  }

  bool segment_ok(const KinoSegment& seg) const {
    // Sample spacing of at most one voxel along the curve.
    const double reach = seg.coeffs.col(1).norm() * seg.duration +
                         seg.coeffs.col(2).norm() * seg.duration * seg.duration +
                         seg.coeffs.col(3).norm() * seg.duration * seg.duration * seg.duration;
    const int n = std::max(2, static_cast<int>(std::ceil(reach / field_.lattice.resolution)));
    for (int i = 1; i <= n; ++i) {
      if (!point_ok(seg.position(seg.duration * i / n))) return false;
    }
    return true;
  }

  std::int64_t cell_of(const Vector3d& p) const {
    const Vector3d rel = (p - field_.lattice.origin) / cfg_.search_resolution;
    const std::int64_t i = static_cast<std::int64_t>(std::floor(rel.x()));
    const std::int64_t j = static_cast<std::int64_t>(std::floor(rel.y()));
    const std::int64_t k = static_cast<std::int64_t>(std::floor(rel.z()));
    return (i * 4096 + j) * 4096 + k;
  }

  bool try_shot(const KinoState& from, KinoSegment& out) const;
  KinoPath build(int node, const KinoSegment* shot) const;

  KinoState start_;
  Vector3d goal_;
  const gridmap::DistanceField& field_;
  const PlannerConfig& cfg_;
  double start_clearance_ = 0.0;
  double goal_clearance_ = 0.0;
  std::vector<Node> nodes_;
};

bool Search::try_shot(const KinoState& from, KinoSegment& out) const {
  const Vector3d delta = goal_ - from.position;
  const double dist = delta.norm();
  double T = std::max(dist / cfg_.v_max, 1e-3);
  const KinoState rest{goal_, Vector3d::Zero()};
  for (int attempt = 0; attempt < 16; ++attempt, T *= 1.15) {
    const KinoSegment seg = KinoSegment::hermite(from, rest, T);
    // Acceleration is affine in time, so its extremes are at the ends.
    const Vector3d a0 = seg.acceleration(0.0), a1 = seg.acceleration(T);
    if (a0.cwiseAbs().maxCoeff() > cfg_.a_lim || a1.cwiseAbs().maxCoeff() > cfg_.a_lim) continue;
    bool fast = false;
    for (int i = 0; i <= 16 && !fast; ++i) {
      fast = seg.velocity(T * i / 16).norm() > cfg_.v_max * (1.0 + 1e-9);
    }
    if (fast) continue;
    if (!segment_ok(seg)) return false;
    out = seg;
    return true;
  }
  return false;
}

KinoPath Search::build(int node, const KinoSegment* shot) const {
  KinoPath path;
  path.start = start_;
  std::vector<KinoSegment> rev;
  for (int n = node; nodes_[n].parent >= 0; n = nodes_[n].parent) {
    rev.push_back(KinoSegment::primitive(nodes_[nodes_[n].parent].state, nodes_[n].accel,
                                         cfg_.primitive_duration));
  }
  path.segments.assign(rev.rbegin(), rev.rend());
  if (shot) path.segments.push_back(*shot);
  return path;
}

KinoPath Search::run() {
  const gridmap::Lattice& lat = field_.lattice;
  if (!lat.contains(start_.position)) throw OutOfBounds("search start outside the map");
  if (!lat.contains(goal_)) throw OutOfBounds("search goal outside the map");
  start_clearance_ = gridmap::query_clearance(field_, start_.position);
  goal_clearance_ = gridmap::query_clearance(field_, goal_);
  if (!(start_clearance_ > 0.0)) throw StartInCollision("search start lies in occupied space");
  if (!(goal_clearance_ > 0.0)) throw GoalInCollision("search goal lies in occupied space");

  if ((goal_ - start_.position).norm() == 0.0 && start_.velocity.squaredNorm() == 0.0) {
    KinoPath p;
    p.start = start_;
    return p;
  }

  const double step_time = cfg_.primitive_duration;
  std::vector<Vector3d> inputs;
  for (int x = -1; x <= 1; ++x)
    for (int y = -1; y <= 1; ++y)
      for (int z = -1; z <= 1; ++z) inputs.emplace_back(x * cfg_.a_lim, y * cfg_.a_lim, z * cfg_.a_lim);

  auto heuristic = [&](const Vector3d& p) {
    return cfg_.time_weight * (goal_ - p).norm() / cfg_.v_max;
  };

  std::priority_queue<OpenEntry, std::vector<OpenEntry>, std::greater<>> open;
  std::unordered_map<std::int64_t, int> best_in_cell;
  std::uint64_t order = 0;

  nodes_.clear();
  nodes_.push_back({start_, 0.0, -1, Vector3d::Zero(), cell_of(start_.position), false});
  best_in_cell[nodes_[0].cell] = 0;
  open.push({heuristic(start_.position), 0.0, order++, 0});

  std::size_t expanded = 0;
  KinoSegment shot;
  while (!open.empty()) {
    const OpenEntry top = open.top();
    open.pop();
    Node& cur = nodes_[top.node];
    if (cur.closed || best_in_cell[cur.cell] != top.node) continue;
    cur.closed = true;
    if (++expanded > static_cast<std::size_t>(cfg_.node_budget)) {
      throw NoPathFound("node budget exhausted");
    }

    const KinoState state = cur.state;
    const double g = cur.g;
    const std::int64_t cell = cur.cell;
    const int idx = top.node;

    if (try_shot(state, shot)) {
      KinoPath p = build(idx, &shot);
      p.expanded_nodes = expanded;
      return p;
    }
    if ((state.position - goal_).norm() <= cfg_.goal_tolerance) {
      KinoPath p = build(idx, nullptr);
      p.expanded_nodes = expanded;
      return p;
    }

    for (const Vector3d& u : inputs) {
      KinoState next;
      next.velocity = state.velocity + u * step_time;
      if (next.velocity.norm() > cfg_.v_max * (1.0 + 1e-9)) continue;
      next.position = state.position + state.velocity * step_time + 0.5 * u * step_time * step_time;
      const std::int64_t next_cell = cell_of(next.position);
      if (next_cell == cell) continue;
      const KinoSegment seg = KinoSegment::primitive(state, u, step_time);
      const double g_next = g + (u.squaredNorm() + cfg_.time_weight) * step_time;

      auto it = best_in_cell.find(next_cell);
      if (it != best_in_cell.end()) {
        const Node& other = nodes_[it->second];
        if (other.closed || other.g <= g_next) continue;
      }
      if (!segment_ok(seg)) continue;

      const int id = static_cast<int>(nodes_.size());
      nodes_.push_back({next, g_next, idx, u, next_cell, false});
      best_in_cell[next_cell] = id;
      open.push({g_next + heuristic(next.position), g_next, order++, id});
    }
  }
  throw NoPathFound("open set exhausted");
}

}  // namespace

KinoPath kino_search(const KinoState& start, const Vector3d& goal, const gridmap::DistanceField& field,
                     const PlannerConfig& cfg) {
  cfg.validate();
  Search search(start, goal, field, cfg);
  return search.run();
}

}  // namespace ftp::planner
