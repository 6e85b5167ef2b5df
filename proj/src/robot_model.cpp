#include "bipedkit/robot_model.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>

#include "bipedkit/text_io.hpp"

namespace bipedkit {

// Defined in the configure-time generated standin_robot.cpp.
extern const char* const kStandinRobotText;

namespace {

constexpr std::array<std::string_view, 4> kLegNames = {"FL", "FR", "RL", "RR"};
constexpr std::array<std::string_view, 4> kLegKeys = {"fl", "fr", "rl", "rr"};
constexpr std::array<std::string_view, 3> kJointKinds = {"hip", "thigh", "calf"};

double side_sign(Leg leg) { return is_left(leg) ? 1.0 : -1.0; }

void require_finite(const LegAngles& a) {
  for (double v : a) {
    if (!std::isfinite(v)) throw ValidationError("forward kinematics: non-finite joint angle");
  }
}

}  // namespace

std::string_view leg_name(Leg leg) { return kLegNames[static_cast<std::size_t>(leg)]; }

std::optional<Leg> parse_leg(std::string_view name) {
  for (std::size_t i = 0; i < kLegNames.size(); ++i) {
    if (name == kLegNames[i] || name == kLegKeys[i]) return static_cast<Leg>(i);
  }
  return std::nullopt;
}

std::string_view joint_kind_name(JointKind kind) {
  return kJointKinds[static_cast<std::size_t>(kind)];
}

std::string joint_name(int index) {
  return std::string(kLegNames[static_cast<std::size_t>(index / 3)]) + "_" +
         std::string(kJointKinds[static_cast<std::size_t>(index % 3)]) + "_joint";
}

std::optional<int> parse_joint_name(std::string_view name) {
  for (int i = 0; i < kNumJoints; ++i) {
    if (name == joint_name(i)) return i;
  }
  return std::nullopt;
}

LegAngles JointVector::leg(Leg l) const {
  const int base = static_cast<int>(l) * 3;
  return {(*this)[base], (*this)[base + 1], (*this)[base + 2]};
}

void JointVector::set_leg(Leg l, const LegAngles& angles) {
  const int base = static_cast<int>(l) * 3;
  for (int j = 0; j < 3; ++j) (*this)[base + j] = angles[static_cast<std::size_t>(j)];
}

JointVector JointVector::filled(double v) {
  JointVector q;
  q.values.fill(v);
  return q;
}

void BasePose::validate() const {
  if (std::abs(orientation.norm() - 1.0) > 1e-9) {
    throw ValidationError("base orientation quaternion is not unit-norm");
  }
  if (!position.allFinite()) throw ValidationError("base position is not finite");
}

const JointLimit& RobotModel::limit(int joint) const {
  return legs[static_cast<std::size_t>(joint / 3)].limits[static_cast<std::size_t>(joint % 3)];
}

double RobotModel::torque_limit(int joint) const {
  return legs[static_cast<std::size_t>(joint / 3)].torque_limits[static_cast<std::size_t>(joint % 3)];
}

double RobotModel::chain_length(Leg l) const {
  const auto& g = leg(l);
  return g.hip_length + g.thigh_length + g.calf_length;
}

double RobotModel::workspace_radius(Leg l) const { return chain_length(l) + leg(l).mount.norm(); }

void RobotModel::validate() const {
  for (Leg l : kAllLegs) {
    const auto& g = leg(l);
    const std::string prefix = std::string(leg_name(l)) + ": ";
    if (!(g.hip_length > 0 && g.thigh_length > 0 && g.calf_length > 0)) {
      throw ValidationError(prefix + "link lengths must be strictly positive");
    }
    if (!g.mount.allFinite()) throw ValidationError(prefix + "mount is not finite");
    for (std::size_t j = 0; j < 3; ++j) {
      if (!(g.limits[j].min < g.limits[j].max)) {
        throw ValidationError(prefix + std::string(kJointKinds[j]) + " limit requires min < max");
      }
      if (!(g.torque_limits[j] > 0)) {
        throw ValidationError(prefix + std::string(kJointKinds[j]) + " torque limit must be > 0");
      }
    }
  }
  if (!(masses.base > 0 && masses.hip > 0 && masses.thigh > 0 && masses.calf > 0 &&
        masses.foot > 0)) {
    throw ValidationError("all segment masses must be strictly positive");
  }
  if (!within_limits(*this, nominal_quadrupedal_pose)) {
    throw ValidationError("nominal quadrupedal pose lies outside the joint limits");
  }
}

RobotModel RobotModel::parse(std::string_view text, const std::string& source) {
  KeyValueFile kv = KeyValueFile::parse(text, source);
  RobotModel m;
  m.version = static_cast<int>(kv.number("version"));
  if (m.version != 1) throw ValidationError(source + ": unsupported robot description version");
  m.name = kv.text("name");
  for (Leg l : kAllLegs) {
    const std::string key(kLegKeys[static_cast<std::size_t>(l)]);
    auto& g = m.legs[static_cast<std::size_t>(l)];
    auto mount = kv.list(key + ".mount", 3);
    g.mount = Vec3(mount[0], mount[1], mount[2]);
    g.hip_length = kv.number(key + ".hip.length");
    g.thigh_length = kv.number(key + ".thigh.length");
    g.calf_length = kv.number(key + ".calf.length");
    for (std::size_t j = 0; j < 3; ++j) {
      const std::string jk = key + "." + std::string(kJointKinds[j]);
      auto lim = kv.list(jk + ".limit", 2);
      g.limits[j] = {lim[0], lim[1]};
      g.torque_limits[j] = kv.number(jk + ".torque_limit");
    }
    auto nominal = kv.list(key + ".nominal", 3);
    m.nominal_quadrupedal_pose.set_leg(l, {nominal[0], nominal[1], nominal[2]});
  }
  m.masses.base = kv.number("mass.base");
  m.masses.hip = kv.number("mass.hip");
  m.masses.thigh = kv.number("mass.thigh");
  m.masses.calf = kv.number("mass.calf");
  m.masses.foot = kv.number("mass.foot");
  kv.reject_unused();
  m.validate();
  return m;
}

RobotModel RobotModel::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

const RobotModel& RobotModel::standin() {
  static const RobotModel model = parse(kStandinRobotText, "<built-in standin>");
  return model;
}

std::string RobotModel::serialize() const {
  KeyValueWriter w;
  w.number("version", version);
  w.text("name", name);
  for (Leg l : kAllLegs) {
    const std::string key(kLegKeys[static_cast<std::size_t>(l)]);
    const auto& g = leg(l);
    w.blank();
    w.list(key + ".mount", {g.mount.x(), g.mount.y(), g.mount.z()});
    w.number(key + ".hip.length", g.hip_length);
    w.number(key + ".thigh.length", g.thigh_length);
    w.number(key + ".calf.length", g.calf_length);
    for (std::size_t j = 0; j < 3; ++j) {
      const std::string jk = key + "." + std::string(kJointKinds[j]);
      w.list(jk + ".limit", {g.limits[j].min, g.limits[j].max});
      w.number(jk + ".torque_limit", g.torque_limits[j]);
    }
    auto n = nominal_quadrupedal_pose.leg(l);
    w.list(key + ".nominal", {n[0], n[1], n[2]});
  }
  w.blank();
  w.number("mass.base", masses.base);
  w.number("mass.hip", masses.hip);
  w.number("mass.thigh", masses.thigh);
  w.number("mass.calf", masses.calf);
  w.number("mass.foot", masses.foot);
  return w.str();
}

// ---------------------------------------------------------------------------

Vec3 forward_kinematics_toe(const RobotModel& model, Leg leg, const LegAngles& angles,
                            FkPath path) {
  require_finite(angles);
  const LegGeometry& g = model.leg(leg);
  const Vec3 hip_offset(0.0, side_sign(leg) * g.hip_length, 0.0);
  const Vec3 thigh(0.0, 0.0, -g.thigh_length);
  const Vec3 calf(0.0, 0.0, -g.calf_length);

  if (path == FkPath::Quaternion) {
    const Quat rx(Eigen::AngleAxisd(angles[0], Vec3::UnitX()));
    const Quat ry1(Eigen::AngleAxisd(angles[1], Vec3::UnitY()));
    const Quat ry2(Eigen::AngleAxisd(angles[2], Vec3::UnitY()));
    const Quat r_thigh = rx * ry1;
    const Quat r_calf = r_thigh * ry2;
    return g.mount + rx * hip_offset + r_thigh * thigh + r_calf * calf;
  }

  // Closed-form product of the three rotation matrices.
  const double sh = std::sin(angles[0]), ch = std::cos(angles[0]);
  const double st = std::sin(angles[1]), ct = std::cos(angles[1]);
  const double stk = std::sin(angles[1] + angles[2]), ctk = std::cos(angles[1] + angles[2]);
  const double vx = -g.thigh_length * st - g.calf_length * stk;
  const double vy = hip_offset.y();
  const double vz = -g.thigh_length * ct - g.calf_length * ctk;
  return g.mount + Vec3(vx, ch * vy - sh * vz, sh * vy + ch * vz);
}

Eigen::Matrix3d toe_jacobian(const RobotModel& model, Leg leg, const LegAngles& angles) {
  const LegGeometry& g = model.leg(leg);
  const double sh = std::sin(angles[0]), ch = std::cos(angles[0]);
  const double st = std::sin(angles[1]), ct = std::cos(angles[1]);
  const double stk = std::sin(angles[1] + angles[2]), ctk = std::cos(angles[1] + angles[2]);
  const double vy = side_sign(leg) * g.hip_length;
  const double vz = -g.thigh_length * ct - g.calf_length * ctk;

  auto rotate_x = [&](double x, double y, double z) {
    return Vec3(x, ch * y - sh * z, sh * y + ch * z);
  };
  Eigen::Matrix3d J;
  J.col(0) = Vec3(0.0, -sh * vy - ch * vz, ch * vy - sh * vz);
  J.col(1) = rotate_x(-g.thigh_length * ct - g.calf_length * ctk, 0.0,
                      g.thigh_length * st + g.calf_length * stk);
  J.col(2) = rotate_x(-g.calf_length * ctk, 0.0, g.calf_length * stk);
  return J;
}

bool leg_within_limits(const RobotModel& model, Leg leg, const LegAngles& angles, double margin) {
  const auto& g = model.leg(leg);
  for (std::size_t j = 0; j < 3; ++j) {
    const double v = angles[j];
    if (!(v > g.limits[j].min + margin && v < g.limits[j].max - margin)) return false;
  }
  return true;
}

bool within_limits(const RobotModel& model, const JointVector& q, double margin) {
  for (Leg l : kAllLegs) {
    if (!leg_within_limits(model, l, q.leg(l), margin)) return false;
  }
  return true;
}

ReachableGoal sample_reachable_toe_goal(const RobotModel& model, Leg leg, Rng& rng) {
  const auto& g = model.leg(leg);
  ReachableGoal goal;
  for (std::size_t j = 0; j < 3; ++j) {
    goal.joints[j] = uniform(rng, g.limits[j].min, g.limits[j].max);
  }
  goal.position = forward_kinematics_toe(model, leg, goal.joints);
  return goal;
}

namespace {

struct LmResult {
  LegAngles q;
  double cost;
};

// Box-constrained Levenberg-Marquardt on 0.5 |FK(q) - p|^2.
LmResult refine_in_box(const RobotModel& model, Leg leg, const Vec3& target, LegAngles q) {
  const auto& lim = model.leg(leg).limits;
  auto cost_of = [&](const LegAngles& a) {
    return 0.5 * (forward_kinematics_toe(model, leg, a) - target).squaredNorm();
  };
  double cost = cost_of(q);
  double lambda = 1e-3;
  for (int iter = 0; iter < 200 && cost > 1e-30; ++iter) {
    const Vec3 r = forward_kinematics_toe(model, leg, q) - target;
    const Eigen::Matrix3d J = toe_jacobian(model, leg, q);
    const Vec3 grad = J.transpose() * r;

    // Joints pinned at a bound whose descent direction points outward stay fixed.
    std::array<bool, 3> free{};
    for (std::size_t j = 0; j < 3; ++j) {
      const bool at_lo = q[j] <= lim[j].min && grad(static_cast<int>(j)) > 0;
      const bool at_hi = q[j] >= lim[j].max && grad(static_cast<int>(j)) < 0;
      free[j] = !(at_lo || at_hi);
    }
    Eigen::Matrix3d H = J.transpose() * J;
    Vec3 g = grad;
    for (int j = 0; j < 3; ++j) {
      if (!free[static_cast<std::size_t>(j)]) {
        H.row(j).setZero();
        H.col(j).setZero();
        H(j, j) = 1.0;
        g(j) = 0.0;
      }
    }
    if (g.norm() < 1e-16) break;

    bool improved = false;
    bool converged = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::Matrix3d A = H;
      A.diagonal() += lambda * (H.diagonal().array() + 1e-12).matrix();
      const Vec3 step = -A.ldlt().solve(g);
      LegAngles trial = q;
      for (std::size_t j = 0; j < 3; ++j) {
        trial[j] = clamp(q[j] + step(static_cast<int>(j)), lim[j].min, lim[j].max);
      }
      const double c = cost_of(trial);
      if (c < cost) {
        const double gain = cost - c;
        q = trial;
        cost = c;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        converged = gain < 1e-32;
        break;
      }
      lambda *= 4.0;
    }
    if (!improved || converged) break;
  }
  return {q, cost};
}

}  // namespace

WorkspaceProjection project_to_workspace(const RobotModel& model, Leg leg, const Vec3& point) {
  if (!point.allFinite()) throw ValidationError("workspace projection: non-finite point");
  const auto& lim = model.leg(leg).limits;
  constexpr int kGrid = 12;
  constexpr std::size_t kStarts = 6;

  struct Seed {
    double dist2;
    LegAngles q;
  };
  std::vector<Seed> seeds;
  seeds.reserve(kGrid * kGrid * kGrid);
  for (int a = 0; a < kGrid; ++a) {
    for (int b = 0; b < kGrid; ++b) {
      for (int c = 0; c < kGrid; ++c) {
        LegAngles q{lim[0].min + (a + 0.5) / kGrid * lim[0].span(),
                    lim[1].min + (b + 0.5) / kGrid * lim[1].span(),
                    lim[2].min + (c + 0.5) / kGrid * lim[2].span()};
        seeds.push_back({(forward_kinematics_toe(model, leg, q) - point).squaredNorm(), q});
      }
    }
  }
  std::partial_sort(seeds.begin(), seeds.begin() + kStarts, seeds.end(),
                    [](const Seed& x, const Seed& y) { return x.dist2 < y.dist2; });

  LmResult best{seeds[0].q, std::numeric_limits<double>::infinity()};
  for (std::size_t s = 0; s < kStarts; ++s) {
    LmResult r = refine_in_box(model, leg, point, seeds[s].q);
    if (r.cost < best.cost) best = r;
    if (best.cost < 1e-30) break;
  }
  WorkspaceProjection out;
  out.goal.joints = best.q;
  out.goal.position = forward_kinematics_toe(model, leg, best.q);
  out.distance = (out.goal.position - point).norm();
  return out;
}

}  // namespace bipedkit
