#include "ftp/kinematics.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ftp/errors.hpp"

namespace ftp::kinematics {

DHTable DHTable::ur5e() {
  DHTable t;
  //            alpha       a        d
  t.rows[0] = {M_PI / 2, 0.0, 0.1625};
  t.rows[1] = {0.0, -0.425, 0.0};
  t.rows[2] = {0.0, -0.3922, 0.0};
  t.rows[3] = {M_PI / 2, 0.0, 0.1333};
  t.rows[4] = {-M_PI / 2, 0.0, 0.0997};
  t.rows[5] = {0.0, 0.0, 0.0996};
  return t;
}

DHTable DHTable::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("DH table: ") + e.what());
  }
  if (!j.contains("rows") || !j["rows"].is_array() || j["rows"].size() != kNumJoints) {
    throw ConfigError("DH table: expected \"rows\" with exactly 6 entries");
  }
  DHTable t;
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& r = j["rows"][i];
    DHRow row;
    row.alpha = r.value("alpha", 0.0);
    row.a = r.value("a", 0.0);
    row.d = r.value("d", 0.0);
    row.theta_offset = r.value("theta_offset", 0.0);
    if (r.contains("limits")) {
      row.theta_min = r["limits"].at(0).get<double>();
      row.theta_max = r["limits"].at(1).get<double>();
    }
    if (!(row.theta_min < row.theta_max)) {
      throw ConfigError("DH table: row " + std::to_string(i + 1) + " has empty joint range");
    }
    t.rows[i] = row;
  }
  return t;
}

DHTable DHTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open DH table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

bool DHTable::within_limits(const JointConfig& q) const {
  for (int i = 0; i < kNumJoints; ++i) {
    if (!(q[i] >= rows[i].theta_min && q[i] <= rows[i].theta_max)) return false;
  }
  return true;
}

JointConfig DHTable::clamp(const JointConfig& q) const {
  JointConfig out;
  for (int i = 0; i < kNumJoints; ++i) {
    out[i] = std::clamp(q[i], rows[i].theta_min, rows[i].theta_max);
  }
  return out;
}

Eigen::Quaterniond canonical(const Eigen::Quaterniond& q) {
  if (q.w() < 0.0) return Eigen::Quaterniond(-q.w(), -q.x(), -q.y(), -q.z());
  return q;
}

Pose FrameChain::end_effector() const {
  const Eigen::Matrix4d& T = transforms[kNumJoints];
  Pose p;
  p.position = T.block<3, 1>(0, 3);
  Eigen::Quaterniond q(Eigen::Matrix3d(T.block<3, 3>(0, 0)));
  p.orientation = canonical(q.normalized());
  return p;
}

Eigen::Matrix4d dh_transform(const DHRow& row, double q) {
  const double theta = q + row.theta_offset;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
  Eigen::Matrix4d T;
  T << ct, -st * ca, st * sa, row.a * ct,
       st, ct * ca, -ct * sa, row.a * st,
       0.0, sa, ca, row.d,
       0.0, 0.0, 0.0, 1.0;
  return T;
}

FrameChain forward_kinematics(const DHTable& table, const JointConfig& q) {
  for (int i = 0; i < kNumJoints; ++i) {
    const DHRow& r = table.rows[i];
    if (!(q[i] >= r.theta_min && q[i] <= r.theta_max)) {
      std::ostringstream msg;
      msg << "joint " << (i + 1) << " = " << q[i] << " outside [" << r.theta_min << ", "
          << r.theta_max << "]";
      throw JointLimitViolation(msg.str());
    }
  }
  FrameChain chain;
  chain.transforms[0].setIdentity();
  chain.origins[0].setZero();
  for (int i = 0; i < kNumJoints; ++i) {
    chain.transforms[i + 1] = chain.transforms[i] * dh_transform(table.rows[i], q[i]);
    chain.origins[i + 1] = chain.transforms[i + 1].block<3, 1>(0, 3);
  }
  return chain;
}

LinkSegments link_segments(const FrameChain& chain) {
  LinkSegments segs;
  for (int k = 0; k < kNumLinks; ++k) {
    segs[k] = {chain.origins[k + 1], chain.origins[k + 2]};
  }
  return segs;
}

}  // namespace ftp::kinematics
