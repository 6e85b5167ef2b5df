#include "bipedkit/planar_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include <Eigen/LU>

#include "bipedkit/rng.hpp"

namespace bipedkit {

namespace {

using Mat7 = Eigen::Matrix<double, kPlanarDof, kPlanarDof>;
using Vec7 = Eigen::Matrix<double, kPlanarDof, 1>;
using Jac = Eigen::Matrix<double, 2, kPlanarDof>;
using Vec2 = Eigen::Vector2d;

// e(a) = (cos a, -sin a) is the base x axis at pitch a; d(a) = (-sin a, -cos a)
// is a leg segment direction at absolute angle a. e' = d and d' = -e.
Vec2 dir_e(double a) { return {std::cos(a), -std::sin(a)}; }
Vec2 dir_d(double a) { return {-std::sin(a), -std::cos(a)}; }

// One summand c * u(psi) of a point position, psi = pitch + selected joints.
struct Term {
  double c = 0.0;
  bool along_e = false;
  std::array<bool, kPlanarJoints> joints{};
};

struct PointDef {
  std::vector<Term> terms;
};

struct PointKin {
  Vec2 p;
  Jac J;
  Vec2 bias;  // J-dot times v
};

struct Body {
  int point;      // index into mass points
  double mass;
  double inertia;  // about the centre of mass (kg m^2)
  std::array<bool, kPlanarJoints> joints{};  // angle = pitch + these joints
};

std::array<bool, kPlanarJoints> sel(std::initializer_list<int> coords) {
  std::array<bool, kPlanarJoints> s{};
  for (int c : coords) s[static_cast<std::size_t>(c - kHindThigh)] = true;
  return s;
}

}  // namespace

struct PlanarModel::Impl {
  std::vector<PointDef> mass_points;
  std::vector<Body> bodies;
  std::array<PointDef, kPlanarContacts> contact_points;
  std::array<double, kPlanarJoints> torque_limits{};
  double kp = 0.0, kd = 0.0;

  mutable std::once_flag rest_once;
  mutable PlanarState rest;

  PointKin kin(const PointDef& def, const PlanarVector& q, const PlanarVector& v) const {
    PointKin k;
    k.p = {q[kPx], q[kPz]};
    k.J.setZero();
    k.J(0, kPx) = 1.0;
    k.J(1, kPz) = 1.0;
    k.bias.setZero();
    for (const Term& t : def.terms) {
      double psi = q[kPitch], rate = v[kPitch];
      for (int j = 0; j < kPlanarJoints; ++j) {
        if (t.joints[static_cast<std::size_t>(j)]) {
          psi += q[static_cast<std::size_t>(kHindThigh + j)];
          rate += v[static_cast<std::size_t>(kHindThigh + j)];
        }
      }
      const Vec2 e = dir_e(psi), d = dir_d(psi);
      const Vec2 u = t.along_e ? e : d;
      const Vec2 du = t.along_e ? d : Vec2(-e);
      k.p += t.c * u;
      k.bias -= t.c * u * rate * rate;
      k.J.col(kPitch) += t.c * du;
      for (int j = 0; j < kPlanarJoints; ++j) {
        if (t.joints[static_cast<std::size_t>(j)]) k.J.col(kHindThigh + j) += t.c * du;
      }
    }
    return k;
  }
};

void PlanarConfig::validate() const {
  if (!(dt > 0 && substeps >= 1)) throw ValidationError("planar: dt > 0 and substeps >= 1 required");
  if (!(kp >= 0 && kd >= 0 && motors_per_joint >= 1)) throw ValidationError("planar: invalid gains");
  if (!(contact_stiffness > 0 && contact_damping >= 0 && friction >= 0)) {
    throw ValidationError("planar: invalid contact parameters");
  }
  if (!(base_half_length > 0 && base_half_height > 0 && stand_height > 0 && init_noise >= 0)) {
    throw ValidationError("planar: invalid body dimensions");
  }
  if (!std::isfinite(gravity)) throw ValidationError("planar: gravity must be finite");
}

nlohmann::json PlanarConfig::to_json() const {
  return {{"dt", dt},
          {"substeps", substeps},
          {"kp", kp},
          {"kd", kd},
          {"motors_per_joint", motors_per_joint},
          {"actuated", actuated},
          {"gravity", gravity},
          {"contact_stiffness", contact_stiffness},
          {"contact_damping", contact_damping},
          {"friction", friction},
          {"base_half_length", base_half_length},
          {"base_half_height", base_half_height},
          {"stand_height", stand_height},
          {"init_noise", init_noise}};
}

PlanarConfig PlanarConfig::from_json(const nlohmann::json& j) {
  PlanarConfig c;
  try {
    c.dt = j.value("dt", c.dt);
    c.substeps = j.value("substeps", c.substeps);
    c.kp = j.value("kp", c.kp);
    c.kd = j.value("kd", c.kd);
    c.motors_per_joint = j.value("motors_per_joint", c.motors_per_joint);
    c.actuated = j.value("actuated", c.actuated);
    c.gravity = j.value("gravity", c.gravity);
    c.contact_stiffness = j.value("contact_stiffness", c.contact_stiffness);
    c.contact_damping = j.value("contact_damping", c.contact_damping);
    c.friction = j.value("friction", c.friction);
    c.base_half_length = j.value("base_half_length", c.base_half_length);
    c.base_half_height = j.value("base_half_height", c.base_half_height);
    c.stand_height = j.value("stand_height", c.stand_height);
    c.init_noise = j.value("init_noise", c.init_noise);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("planar config: ") + e.what());
  }
  c.validate();
  return c;
}

PlanarModel::PlanarModel(const RobotModel& robot, const PlanarConfig& config)
    : robot_(&robot), config_(config) {
  config_.validate();
  auto impl = std::make_shared<Impl>();
  const double n = config_.motors_per_joint;
  const auto& m = robot.masses;
  const double a = config_.base_half_length, b = config_.base_half_height;

  // Base: centre of mass at the origin of the base frame.
  impl->mass_points.push_back({});
  impl->bodies.push_back({0, m.base, m.base * (square(2 * a) + square(2 * b)) / 12.0, {}});

  for (const bool front : {false, true}) {
    const LegGeometry& g = robot.leg(front ? Leg::FL : Leg::RL);
    const int thigh = front ? kFrontThigh : kHindThigh;
    const int calf = front ? kFrontCalf : kHindCalf;
    // Mount offset in the base x-z plane; base z maps to -d(pitch).
    const std::vector<Term> mount = {{g.mount.x(), true, {}}, {-g.mount.z(), false, {}}};
    auto with = [&](std::vector<Term> base, std::initializer_list<Term> extra) {
      base.insert(base.end(), extra);
      return PointDef{base};
    };
    const Term half_thigh{0.5 * g.thigh_length, false, sel({thigh})};
    const Term full_thigh{g.thigh_length, false, sel({thigh})};
    const Term half_calf{0.5 * g.calf_length, false, sel({thigh, calf})};
    const Term full_calf{g.calf_length, false, sel({thigh, calf})};

    const int mount_idx = static_cast<int>(impl->mass_points.size());
    impl->mass_points.push_back(PointDef{mount});
    impl->bodies.push_back({mount_idx, n * m.hip, 0.0, {}});
    impl->mass_points.push_back(with(mount, {half_thigh}));
    impl->bodies.push_back({mount_idx + 1, n * m.thigh, n * m.thigh * square(g.thigh_length) / 12.0,
                            sel({thigh})});
    impl->mass_points.push_back(with(mount, {full_thigh, half_calf}));
    impl->bodies.push_back({mount_idx + 2, n * m.calf, n * m.calf * square(g.calf_length) / 12.0,
                            sel({thigh, calf})});
    impl->mass_points.push_back(with(mount, {full_thigh, full_calf}));
    impl->bodies.push_back({mount_idx + 3, n * m.foot, 0.0, {}});

    impl->contact_points[front ? kFrontToe : kHindToe] = with(mount, {full_thigh, full_calf});
    impl->contact_points[front ? kFrontKnee : kHindKnee] = with(mount, {full_thigh});
    impl->torque_limits[static_cast<std::size_t>(thigh - kHindThigh)] =
        n * robot.torque_limit(joint_index(front ? Leg::FL : Leg::RL, JointKind::Thigh));
    impl->torque_limits[static_cast<std::size_t>(calf - kHindThigh)] =
        n * robot.torque_limit(joint_index(front ? Leg::FL : Leg::RL, JointKind::Calf));
  }
  impl->contact_points[kCornerRearLow] = {{{-a, true, {}}, {b, false, {}}}};
  impl->contact_points[kCornerFrontLow] = {{{a, true, {}}, {b, false, {}}}};
  impl->contact_points[kCornerRearHigh] = {{{-a, true, {}}, {-b, false, {}}}};
  impl->contact_points[kCornerFrontHigh] = {{{a, true, {}}, {-b, false, {}}}};
  impl->kp = config_.actuated ? n * config_.kp : 0.0;
  impl->kd = config_.actuated ? n * config_.kd : 0.0;
  impl_ = std::move(impl);
}

double PlanarModel::total_mass() const {
  double total = 0.0;
  for (const auto& b : impl_->bodies) total += b.mass;
  return total;
}

double PlanarModel::torque_limit(int joint) const {
  return impl_->torque_limits.at(static_cast<std::size_t>(joint));
}

std::array<double, 2> PlanarModel::world_point(const PlanarState& s, int contact) const {
  const auto k = impl_->kin(impl_->contact_points.at(static_cast<std::size_t>(contact)), s.q, s.v);
  return {k.p.x(), k.p.y()};
}

std::array<double, 2> PlanarModel::point_velocity(const PlanarState& s, int contact) const {
  const auto k = impl_->kin(impl_->contact_points.at(static_cast<std::size_t>(contact)), s.q, s.v);
  const Vec2 vel = k.J * Eigen::Map<const Vec7>(s.v.data());
  return {vel.x(), vel.y()};
}

std::array<double, 4> PlanarModel::center_of_mass(const PlanarState& s) const {
  const Eigen::Map<const Vec7> v(s.v.data());
  Vec2 p = Vec2::Zero(), vel = Vec2::Zero();
  double mass = 0.0;
  for (const auto& b : impl_->bodies) {
    const auto k = impl_->kin(impl_->mass_points[static_cast<std::size_t>(b.point)], s.q, s.v);
    p += b.mass * k.p;
    vel += b.mass * (k.J * v);
    mass += b.mass;
  }
  p /= mass;
  vel /= mass;
  return {p.x(), p.y(), vel.x(), vel.y()};
}

double PlanarModel::mechanical_energy(const PlanarState& s) const {
  double e = 0.0;
  const Eigen::Map<const Vec7> v(s.v.data());
  for (const auto& b : impl_->bodies) {
    const auto k = impl_->kin(impl_->mass_points[static_cast<std::size_t>(b.point)], s.q, s.v);
    const Vec2 vel = k.J * v;
    double w = s.v[kPitch];
    for (int j = 0; j < kPlanarJoints; ++j) {
      if (b.joints[static_cast<std::size_t>(j)]) w += s.v[static_cast<std::size_t>(kHindThigh + j)];
    }
    e += 0.5 * b.mass * vel.squaredNorm() + 0.5 * b.inertia * w * w +
         b.mass * config_.gravity * k.p.y();
  }
  return e;
}

bool PlanarState::body_contact() const {
  for (int c = kHindKnee; c < kPlanarContacts; ++c) {
    if (contacts[static_cast<std::size_t>(c)].active) return true;
  }
  return false;
}

namespace {

enum class Mode { Off, Stick, Slide };

void substep(const PlanarModel& model, PlanarState& s, const PlanarAction& target, double h) {
  const auto& impl = model.impl();
  const auto& cfg = model.config();
  const Eigen::Map<const Vec7> v0(s.v.data());

  Mat7 M = Mat7::Zero();
  Vec7 F = Vec7::Zero();
  const Vec2 g(0.0, -cfg.gravity);
  for (const auto& b : impl.bodies) {
    const auto k = impl.kin(impl.mass_points[static_cast<std::size_t>(b.point)], s.q, s.v);
    M.noalias() += b.mass * k.J.transpose() * k.J;
    F.noalias() += b.mass * k.J.transpose() * (g - k.bias);
    if (b.inertia > 0) {
      Vec7 w = Vec7::Zero();
      w[kPitch] = 1.0;
      for (int j = 0; j < kPlanarJoints; ++j) {
        if (b.joints[static_cast<std::size_t>(j)]) w[kHindThigh + j] = 1.0;
      }
      M.noalias() += b.inertia * w * w.transpose();
    }
  }

  std::array<PointKin, kPlanarContacts> ck;
  std::array<Mode, kPlanarContacts> mode{};
  std::array<double, kPlanarContacts> slide_sign{};
  for (int c = 0; c < kPlanarContacts; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    ck[ci] = impl.kin(impl.contact_points[ci], s.q, s.v);
    if (ck[ci].p.y() < 0.0) {
      if (!s.contacts[ci].active) s.contacts[ci].anchor = ck[ci].p.x();
      mode[ci] = Mode::Stick;
    } else {
      mode[ci] = Mode::Off;
    }
  }
  std::array<int, kPlanarJoints> sat{};  // 0 implicit PD, +-1 saturated

  const double k = cfg.contact_stiffness, cd = cfg.contact_damping, mu = cfg.friction;
  const double kn = cd + h * k;
  Vec7 v1;
  std::array<double, kPlanarJoints> tau{};
  std::array<double, kPlanarContacts> normal{}, tangent{};
  for (int pass = 0;; ++pass) {
    Mat7 A = M;
    Vec7 rhs = M * v0 + h * F;
    for (int j = 0; j < kPlanarJoints; ++j) {
      const int c = kHindThigh + j;
      const auto ju = static_cast<std::size_t>(j);
      if (sat[ju] == 0) {
        A(c, c) += h * (impl.kd + h * impl.kp);
        rhs[c] += h * impl.kp * (target[ju] - s.q[static_cast<std::size_t>(c)]);
      } else {
        rhs[c] += h * sat[ju] * impl.torque_limits[ju];
      }
    }
    for (int c = 0; c < kPlanarContacts; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (mode[ci] == Mode::Off) continue;
      const auto Jx = ck[ci].J.row(0).transpose();
      const auto Jz = ck[ci].J.row(1).transpose();
      const double pen = -ck[ci].p.y();
      A.noalias() += h * kn * Jz * Jz.transpose();
      rhs.noalias() += h * k * pen * Jz;
      if (mode[ci] == Mode::Stick) {
        A.noalias() += h * kn * Jx * Jx.transpose();
        rhs.noalias() -= h * k * (ck[ci].p.x() - s.contacts[ci].anchor) * Jx;
      } else {
        A.noalias() += h * slide_sign[ci] * mu * kn * Jx * Jz.transpose();
        rhs.noalias() += h * slide_sign[ci] * mu * k * pen * Jx;
      }
    }
    v1 = A.partialPivLu().solve(rhs);

    bool changed = false;
    for (int j = 0; j < kPlanarJoints; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const int c = kHindThigh + j;
      if (sat[ju] != 0) {
        tau[ju] = sat[ju] * impl.torque_limits[ju];
        continue;
      }
      tau[ju] = impl.kp * (target[ju] - s.q[static_cast<std::size_t>(c)] - h * v1[c]) - impl.kd * v1[c];
      if (std::abs(tau[ju]) > impl.torque_limits[ju]) {
        sat[ju] = tau[ju] > 0 ? 1 : -1;
        changed = true;
      }
    }
    for (int c = 0; c < kPlanarContacts; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      normal[ci] = tangent[ci] = 0.0;
      if (mode[ci] == Mode::Off) continue;
      const double pen = -ck[ci].p.y();
      const double vz = ck[ci].J.row(1).dot(v1), vx = ck[ci].J.row(0).dot(v1);
      const double n = k * pen - kn * vz;
      if (n < 0.0) {
        mode[ci] = Mode::Off;
        changed = true;
        continue;
      }
      normal[ci] = n;
      if (mode[ci] == Mode::Stick) {
        const double t = -k * (ck[ci].p.x() - s.contacts[ci].anchor) - kn * vx;
        if (std::abs(t) > mu * n) {
          mode[ci] = Mode::Slide;
          slide_sign[ci] = t > 0 ? 1.0 : -1.0;
          changed = true;
        }
        tangent[ci] = t;
      } else {
        tangent[ci] = slide_sign[ci] * mu * n;
      }
    }
    if (!changed) break;
  }

  for (int i = 0; i < kPlanarDof; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    s.v[iu] = v1[i];
    s.q[iu] += h * v1[i];
  }
  for (int c = 0; c < kPlanarContacts; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    auto& cs = s.contacts[ci];
    cs.active = mode[ci] != Mode::Off;
    cs.sliding = mode[ci] == Mode::Slide;
    cs.normal = normal[ci];
    cs.tangent = tangent[ci];
    if (mode[ci] == Mode::Slide) {
      // The stick point follows a sliding contact.
      cs.anchor = impl.kin(impl.contact_points[ci], s.q, s.v).p.x();
    }
  }
  s.torques = tau;
}

}  // namespace

PlanarState planar_step(const PlanarModel& model, const PlanarState& state,
                        const PlanarAction& action) {
  PlanarState s = state;
  const auto& cfg = model.config();
  const double h = cfg.dt / cfg.substeps;
  for (int i = 0; i < cfg.substeps; ++i) {
    substep(model, s, action, h);
    for (int d = 0; d < kPlanarDof; ++d) {
      const auto du = static_cast<std::size_t>(d);
      if (!std::isfinite(s.q[du]) || !std::isfinite(s.v[du]) || std::abs(s.q[du]) > 1e3) {
        throw SimulationError("planar simulation blew up",
                              state.step * cfg.dt + (i + 1) * h);
      }
    }
  }
  ++s.step;
  return s;
}

PlanarAction planar_rest_targets(const RobotModel& robot) {
  const auto& nom = robot.nominal_quadrupedal_pose;
  return {nom[joint_index(Leg::RL, JointKind::Thigh)], nom[joint_index(Leg::RL, JointKind::Calf)],
          nom[joint_index(Leg::FL, JointKind::Thigh)], nom[joint_index(Leg::FL, JointKind::Calf)]};
}

const PlanarState& planar_rest_state(const PlanarModel& model) {
  const auto& impl = model.impl();
  std::call_once(impl.rest_once, [&] {
    const PlanarAction targets = planar_rest_targets(model.robot());
    PlanarState s;
    for (int j = 0; j < kPlanarJoints; ++j) {
      s.q[static_cast<std::size_t>(kHindThigh + j)] = targets[static_cast<std::size_t>(j)];
    }
    const double lowest = std::min(model.world_point(s, kHindToe)[1], model.world_point(s, kFrontToe)[1]);
    s.q[kPz] = -lowest;
    // Settle: run until the state stops changing.
    for (int i = 0; i < 20000; ++i) {
      const PlanarState next = planar_step(model, s, targets);
      double change = 0.0;
      for (int d = 0; d < kPlanarDof; ++d) {
        const auto du = static_cast<std::size_t>(d);
        change = std::max({change, std::abs(next.q[du] - s.q[du]), std::abs(next.v[du])});
      }
      s = next;
      if (i > 50 && change < 1e-13) break;
    }
    s.step = 0;
    impl.rest = s;
  });
  return impl.rest;
}

PlanarState mirror(const PlanarState& s) {
  PlanarState m = s;
  auto flip = [](const PlanarVector& a) {
    return PlanarVector{-a[kPx], a[kPz], -a[kPitch], -a[kFrontThigh], -a[kFrontCalf],
                        -a[kHindThigh], -a[kHindCalf]};
  };
  m.q = flip(s.q);
  m.v = flip(s.v);
  auto swap_contact = [&](int a, int b) {
    m.contacts[static_cast<std::size_t>(a)] = s.contacts[static_cast<std::size_t>(b)];
    m.contacts[static_cast<std::size_t>(b)] = s.contacts[static_cast<std::size_t>(a)];
  };
  swap_contact(kHindToe, kFrontToe);
  swap_contact(kHindKnee, kFrontKnee);
  swap_contact(kCornerRearLow, kCornerFrontLow);
  swap_contact(kCornerRearHigh, kCornerFrontHigh);
  for (auto& c : m.contacts) {
    c.anchor = -c.anchor;
    c.tangent = -c.tangent;
  }
  m.torques = mirror(s.torques);
  return m;
}

PlanarAction mirror(const PlanarAction& a) { return {-a[2], -a[3], -a[0], -a[1]}; }

MotionTarget planar_motion_target(const RobotModel& robot) {
  MotionTarget t;
  for (std::size_t side = 0; side < 2; ++side) {
    const Leg leg = kFrontLegs[side];
    t.toe_des[side] = forward_kinematics_toe(robot, leg, robot.nominal_quadrupedal_pose.leg(leg));
  }
  return t;
}

EnvState to_env_state(const PlanarModel& model, const PlanarState& s, const PlanarAction& action,
                      const PlanarAction& prev_action, const MotionTarget& target) {
  EnvState e;
  e.base.position = Vec3(s.q[kPx], 0.0, s.q[kPz]);
  e.base.orientation = Quat(Eigen::AngleAxisd(s.q[kPitch], Vec3::UnitY()));
  e.base_lin_vel = Vec3(s.v[kPx], 0.0, s.v[kPz]);
  e.base_ang_vel = Vec3(0.0, s.v[kPitch], 0.0);
  e.heading = 0.0;
  const double motors = model.config().motors_per_joint;
  auto fill = [&](JointVector& out, const std::array<double, 4>& planar) {
    for (Leg leg : kAllLegs) {
      const bool front = is_front(leg);
      out.set_leg(leg, {0.0, planar[front ? 2 : 0], planar[front ? 3 : 1]});
    }
  };
  fill(e.q, {s.q[kHindThigh], s.q[kHindCalf], s.q[kFrontThigh], s.q[kFrontCalf]});
  fill(e.qd, {s.v[kHindThigh], s.v[kHindCalf], s.v[kFrontThigh], s.v[kFrontCalf]});
  fill(e.torques, {s.torques[0] / motors, s.torques[1] / motors, s.torques[2] / motors,
                   s.torques[3] / motors});
  fill(e.action, action);
  fill(e.prev_action, prev_action);
  for (std::size_t f = 0; f < 4; ++f) {
    const bool front = f < 2;
    const int c = front ? kFrontToe : kHindToe;
    e.foot_contacts[f] = s.foot_contact(front);
    e.foot_heights[f] = model.world_point(s, c)[1];
    const auto vel = model.point_velocity(s, c);
    e.foot_velocities[f] = Vec3(vel[0], 0.0, vel[1]);
  }
  e.non_foot_collision = s.body_contact();
  e.step = s.step;
  e.target = target;
  return e;
}

PlanarPolicy PlanarPolicy::zeros(int knots, double schedule_time) {
  PlanarPolicy p;
  p.knots = knots;
  p.schedule_time = schedule_time;
  p.params.assign(static_cast<std::size_t>(dimension(knots)), 0.0);
  p.validate();
  return p;
}

void PlanarPolicy::validate() const {
  if (knots < 2) throw ValidationError("planar policy: at least two knots");
  if (!(schedule_time > 0 && target_margin >= 0)) {
    throw ValidationError("planar policy: schedule time > 0 and margin >= 0 required");
  }
  if (params.size() != static_cast<std::size_t>(dimension(knots))) {
    throw ValidationError("planar policy: expected " + std::to_string(dimension(knots)) +
                          " parameters, got " + std::to_string(params.size()));
  }
}

std::array<double, kPolicyFeatures> policy_features(const PlanarModel& model,
                                                   const PlanarState& s) {
  // Scales map a typical excursion near the standing pose to unit size.
  constexpr double kHeightScale = 0.1, kPitchScale = 0.5, kPitchRateScale = 2.0;
  constexpr double kComOffsetScale = 0.05, kComVelocityScale = 0.25;
  const auto com = model.center_of_mass(s);
  std::array<double, kPolicyFeatures> f = {
      (s.q[kPz] - model.config().stand_height) / kHeightScale,
      (s.q[kPitch] + kPi / 2) / kPitchScale,
      s.v[kPitch] / kPitchRateScale,
      (com[0] - model.world_point(s, kHindToe)[0]) / kComOffsetScale,
      com[2] / kComVelocityScale};
  for (double& x : f) x = std::clamp(x, -1.0, 1.0);
  return f;
}

PlanarAction PlanarPolicy::act(const PlanarModel& model, const PlanarState& s) const {
  const auto rest = planar_rest_targets(model.robot());
  const double t = s.step * model.config().dt;
  const double span = schedule_time / (knots - 1);
  const double x = std::min(t / span, static_cast<double>(knots - 1));
  const int seg = std::min(static_cast<int>(x), knots - 2);
  const double u = x - seg;
  const auto fb = policy_features(model, s);
  const std::array<std::pair<Leg, JointKind>, 4> joints = {
      {{Leg::RL, JointKind::Thigh}, {Leg::RL, JointKind::Calf}, {Leg::FL, JointKind::Thigh},
       {Leg::FL, JointKind::Calf}}};
  PlanarAction out{};
  for (int j = 0; j < kPlanarJoints; ++j) {
    auto knot = [&](int k) {
      k = std::clamp(k, 0, knots - 1);
      return params[static_cast<std::size_t>(k * kPlanarJoints + j)];
    };
    const double p0 = knot(seg - 1), p1 = knot(seg), p2 = knot(seg + 1), p3 = knot(seg + 2);
    const double spline =
        0.5 * (2 * p1 + (-p0 + p2) * u + (2 * p0 - 5 * p1 + 4 * p2 - p3) * u * u +
               (-p0 + 3 * p1 - 3 * p2 + p3) * u * u * u);
    double target = rest[static_cast<std::size_t>(j)] + spline;
    for (int k = 0; k < kPolicyFeatures; ++k) {
      target += params[static_cast<std::size_t>(knots * kPlanarJoints + j * kPolicyFeatures + k)] *
                fb[static_cast<std::size_t>(k)];
    }
    const auto& lim = model.robot().limit(joint_index(joints[static_cast<std::size_t>(j)].first,
                                                      joints[static_cast<std::size_t>(j)].second));
    out[static_cast<std::size_t>(j)] =
        clamp(target, lim.min + target_margin, lim.max - target_margin);
  }
  return out;
}

nlohmann::json PlanarPolicy::to_json() const {
  return {{"format_version", kFormatVersion},
          {"knots", knots},
          {"schedule_time", schedule_time},
          {"target_margin", target_margin},
          {"params", params}};
}

PlanarPolicy PlanarPolicy::from_json(const nlohmann::json& j) {
  PlanarPolicy p;
  try {
    p.knots = j.at("knots").get<int>();
    p.schedule_time = j.at("schedule_time").get<double>();
    p.target_margin = j.value("target_margin", p.target_margin);
    p.params = j.at("params").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("planar policy: ") + e.what());
  }
  p.validate();
  return p;
}

RolloutResult rollout(const PlanarModel& model, const PlanarPolicy& policy,
                      const RewardConfig& reward, std::uint64_t seed,
                      const RolloutOptions& options) {
  policy.validate();
  PlanarState s = planar_rest_state(model);
  if (model.config().init_noise > 0) {
    Rng rng(derive_seed(seed, "planar.reset"));
    for (int j = kHindThigh; j <= kFrontCalf; ++j) {
      s.q[static_cast<std::size_t>(j)] += model.config().init_noise * standard_normal(rng);
    }
  }
  const MotionTarget target = planar_motion_target(model.robot());
  PlanarAction prev = planar_rest_targets(model.robot());
  RolloutResult r;
  double weight = 1.0;
  while (true) {
    const PlanarAction a = policy.act(model, s);
    s = planar_step(model, s, a);
    const EnvState e = to_env_state(model, s, a, prev, target);
    const RewardBreakdown b = total_reward(e, reward, model.robot());
    r.undiscounted += b.total;
    r.discounted += weight * b.total;
    weight *= options.discount;
    ++r.steps;
    if (options.record) {
      r.trajectory.push_back(s);
      r.actions.push_back(a);
      r.breakdowns.push_back(b);
    }
    prev = a;
    const auto verdict = check_termination(e, reward, model.robot());
    if (verdict.done) {
      r.reason = verdict.reason;
      r.final_height = e.base.position.z();
      r.final_tilt = upright_tilt(e.base);
      break;
    }
  }
  r.final_state = s;
  return r;
}

std::vector<PlanarState> replay_actions(const PlanarModel& model, const PlanarState& start,
                                        const std::vector<PlanarAction>& actions) {
  std::vector<PlanarState> out;
  out.reserve(actions.size());
  PlanarState s = start;
  for (const auto& a : actions) {
    s = planar_step(model, s, a);
    out.push_back(s);
  }
  return out;
}

CsvTable trajectory_table(const PlanarModel& model, const RolloutResult& r) {
  CsvTable t;
  t.header = {"t",           "x",           "z",           "pitch",      "hind_thigh",
              "hind_calf",   "front_thigh", "front_calf",  "vx",         "vz",
              "pitch_rate",  "hind_thigh_rate", "hind_calf_rate", "front_thigh_rate",
              "front_calf_rate", "hind_contact", "front_contact", "body_contact", "reward"};
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
    const auto& s = r.trajectory[i];
    std::vector<double> row = {s.step * model.config().dt};
    row.insert(row.end(), s.q.begin(), s.q.end());
    row.insert(row.end(), s.v.begin(), s.v.end());
    row.push_back(s.foot_contact(false) ? 1.0 : 0.0);
    row.push_back(s.foot_contact(true) ? 1.0 : 0.0);
    row.push_back(s.body_contact() ? 1.0 : 0.0);
    row.push_back(i < r.breakdowns.size() ? r.breakdowns[i].total : 0.0);
    t.rows.push_back(std::move(row));
  }
  return t;
}

PlanarTrainResult planar_train(const PlanarModel& model, const RewardConfig& reward,
                               const PlanarTrainConfig& config) {
  if (config.episodes < 1) throw ValidationError("planar train: episodes must be >= 1");
  planar_rest_state(model);
  const PlanarPolicy shape = PlanarPolicy::zeros(config.knots, config.schedule_time);
  auto objective = [&](const std::vector<double>& x) {
    PlanarPolicy p = shape;
    p.params = x;
    double total = 0.0;
    for (int e = 0; e < config.episodes; ++e) {
      try {
        const auto r = rollout(model, p, reward,
                               derive_seed(config.cem.seed, static_cast<std::uint64_t>(e)));
        total += config.discounted ? r.discounted : r.undiscounted;
      } catch (const SimulationError&) {
        return -std::numeric_limits<double>::infinity();
      }
    }
    return total / config.episodes;
  };
  PlanarTrainResult out;
  out.cem = cem_optimize(objective, shape.params, config.cem);
  out.policy = shape;
  out.policy.params = out.cem.best_params;
  RolloutOptions record;
  record.record = true;
  out.evaluation = rollout(model, out.policy, reward, derive_seed(config.cem.seed, std::uint64_t{0}),
                           record);
  return out;
}

bool stood_up(const RolloutResult& r, const RewardConfig& reward, double fraction,
              double max_tilt) {
  return r.final_height >= fraction * reward.target_height && r.final_tilt <= max_tilt;
}

}  // namespace bipedkit
