#include "bipedkit/motor_plant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bipedkit {

void SimParams::validate() const {
  if (!(joint_friction >= 0)) throw ValidationError("sim params: friction must be >= 0");
  if (!(joint_damping >= 0)) throw ValidationError("sim params: damping must be >= 0");
  if (!(delay >= 0)) throw ValidationError("sim params: delay must be >= 0");
  if (!(pd_scale > 0)) throw ValidationError("sim params: pd_scale must be > 0");
  for (double s : mass_scales) {
    if (!(s > 0)) throw ValidationError("sim params: mass scales must be > 0");
  }
}

namespace {

CsvTable joint_table(double period, const std::vector<JointVector>& rows) {
  CsvTable t;
  t.header.push_back("t");
  for (int j = 0; j < kNumJoints; ++j) t.header.push_back(joint_name(j));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<double> row{static_cast<double>(i) * period};
    row.insert(row.end(), rows[i].values.begin(), rows[i].values.end());
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<JointVector> joint_rows(const CsvTable& t, double& period) {
  const std::size_t tc = t.column("t");
  std::array<std::size_t, kNumJoints> cols{};
  for (int j = 0; j < kNumJoints; ++j) cols[static_cast<std::size_t>(j)] = t.column(joint_name(j));
  if (t.rows.size() < 2) throw InputError("joint table needs at least two rows");
  period = t.rows[1][tc] - t.rows[0][tc];
  if (!(period > 0)) throw InputError("joint table: time column must increase");
  std::vector<JointVector> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double expect = static_cast<double>(i) * period;
    if (std::abs(t.rows[i][tc] - expect) > 1e-9) {
      throw ParseError("joint table: non-uniform time column", static_cast<int>(i) + 2,
                       static_cast<int>(tc) + 1);
    }
    JointVector q;
    for (int j = 0; j < kNumJoints; ++j) q[j] = t.rows[i][cols[static_cast<std::size_t>(j)]];
    out.push_back(q);
  }
  return out;
}

// Geometry of one leg at a frozen configuration, in the base frame.
struct LegFrame {
  std::array<Vec3, 3> axis_point, axis_dir;
  std::array<Vec3, 4> mass_point;  // hip link, thigh, calf, foot
};

LegFrame leg_frame(const RobotModel& model, Leg leg, const LegAngles& q) {
  const auto& g = model.leg(leg);
  const double side = is_left(leg) ? 1.0 : -1.0;
  const Eigen::Matrix3d rx = Eigen::AngleAxisd(q[0], Vec3::UnitX()).toRotationMatrix();
  const Eigen::Matrix3d r1 = rx * Eigen::AngleAxisd(q[1], Vec3::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d r2 = r1 * Eigen::AngleAxisd(q[2], Vec3::UnitY()).toRotationMatrix();
  const Vec3 p1 = g.mount + rx * Vec3(0, side * g.hip_length, 0);
  const Vec3 p2 = p1 + r1 * Vec3(0, 0, -g.thigh_length);
  const Vec3 toe = p2 + r2 * Vec3(0, 0, -g.calf_length);
  LegFrame f;
  f.axis_point = {g.mount, p1, p2};
  f.axis_dir = {Vec3::UnitX(), rx * Vec3::UnitY(), rx * Vec3::UnitY()};
  f.mass_point = {g.mount + rx * Vec3(0, 0.5 * side * g.hip_length, 0),
                  p1 + r1 * Vec3(0, 0, -0.5 * g.thigh_length),
                  p2 + r2 * Vec3(0, 0, -0.5 * g.calf_length), toe};
  return f;
}

std::array<double, 4> scaled_masses(const RobotModel& model, const SimParams& xi) {
  return {model.masses.hip * xi.mass_scales[0], model.masses.thigh * xi.mass_scales[1],
          model.masses.calf * xi.mass_scales[2], model.masses.foot * xi.mass_scales[3]};
}

// One backward-Euler velocity solve for a single joint.
struct JointStep {
  double inertia, h, kp, kd, damping, friction, v_eps, torque_limit, lo, hi, k_stop;

  double pd(double q0, double r, double v) const {
    return clamp(kp * (r - q0 - h * v) - kd * v, -torque_limit, torque_limit);
  }

  // Left-hand side of the implicit equation; strictly increasing in v.
  double lhs(double q0, double r, double v) const {
    const double q1 = q0 + h * v;
    return (inertia / h + damping) * v + friction * clamp(v / v_eps, -1.0, 1.0) - pd(q0, r, v) +
           k_stop * (std::max(0.0, q1 - hi) - std::max(0.0, lo - q1));
  }

  double solve(double q0, double v0, double r, double tau_g) const {
    const double y_base = inertia / h * v0 + tau_g;
    if (!std::isfinite(y_base + kp * (r - q0))) return std::numeric_limits<double>::quiet_NaN();
    // Fast path: friction saturated or linear, PD unclamped, no stop contact.
    {
      const double D = inertia / h + damping + kp * h + kd;
      const double y = y_base + kp * (r - q0);
      double v;
      if (std::abs(y) <= D * v_eps + friction) {
        v = y / (D + friction / v_eps);
      } else {
        v = (y - std::copysign(friction, y)) / D;
      }
      const double q1 = q0 + h * v;
      const double u = kp * (r - q0 - h * v) - kd * v;
      if (std::abs(u) <= torque_limit && q1 >= lo && q1 <= hi) return v;
    }
    std::array<double, 6> bp = {-v_eps,
                                v_eps,
                                (kp * (r - q0) - torque_limit) / (kp * h + kd),
                                (kp * (r - q0) + torque_limit) / (kp * h + kd),
                                (lo - q0) / h,
                                (hi - q0) / h};
    std::sort(bp.begin(), bp.end());
    std::array<double, 6> f{};
    for (std::size_t i = 0; i < bp.size(); ++i) f[i] = lhs(q0, r, bp[i]);
    const double y = y_base;
    if (y <= f[0]) {
      const double slope = f[0] - lhs(q0, r, bp[0] - 1.0);
      return bp[0] - (f[0] - y) / slope;
    }
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
      if (y <= f[i + 1]) {
        if (f[i + 1] == f[i]) return bp[i];
        return bp[i] + (y - f[i]) * (bp[i + 1] - bp[i]) / (f[i + 1] - f[i]);
      }
    }
    const double slope = lhs(q0, r, bp[5] + 1.0) - f[5];
    return bp[5] + (y - f[5]) / slope;
  }
};

}  // namespace

CsvTable ActionSequence::to_table() const { return joint_table(period, targets); }
ActionSequence ActionSequence::from_table(const CsvTable& table) {
  ActionSequence a;
  a.targets = joint_rows(table, a.period);
  return a;
}

CsvTable JointTrace::to_table() const { return joint_table(period, q); }
JointTrace JointTrace::from_table(const CsvTable& table) {
  JointTrace tr;
  tr.q = joint_rows(table, tr.period);
  return tr;
}

std::array<double, kNumJoints> effective_inertia(const RobotModel& model, const SimParams& xi,
                                                 const JointVector& frozen_q,
                                                 double rotor_inertia) {
  const auto m = scaled_masses(model, xi);
  std::array<double, kNumJoints> out{};
  for (Leg leg : kAllLegs) {
    const LegFrame f = leg_frame(model, leg, frozen_q.leg(leg));
    for (std::size_t j = 0; j < 3; ++j) {
      double sum = 0.0;
      // Joint j moves every mass from segment j onwards (the hip link rides on the hip joint).
      for (std::size_t k = j; k < 4; ++k) {
        const Vec3 r = f.mass_point[k] - f.axis_point[j];
        const Vec3 perp = r - r.dot(f.axis_dir[j]) * f.axis_dir[j];
        sum += m[k] * perp.squaredNorm();
      }
      out[static_cast<std::size_t>(joint_index(leg, static_cast<JointKind>(j)))] =
          sum + rotor_inertia;
    }
  }
  return out;
}

GravityModel gravity_model(const RobotModel& model, const SimParams& xi,
                           const JointVector& frozen_q) {
  const auto m = scaled_masses(model, xi);
  GravityModel g;
  for (Leg leg : kAllLegs) {
    const LegFrame f = leg_frame(model, leg, frozen_q.leg(leg));
    for (std::size_t j = 0; j < 3; ++j) {
      const int idx = joint_index(leg, static_cast<JointKind>(j));
      const double theta0 = frozen_q[idx];
      const Vec3& u = f.axis_dir[j];
      // tau(theta) = A sin(theta - theta0) + B cos(theta - theta0)
      double A = 0.0, B = 0.0;
      for (std::size_t k = j; k < 4; ++k) {
        const Vec3 r = f.mass_point[k] - f.axis_point[j];
        const Vec3 perp = r - r.dot(u) * u;
        A += m[k] * kGravity * perp.z();
        B -= m[k] * kGravity * u.cross(perp).z();
      }
      g.sin_coeff[static_cast<std::size_t>(idx)] = A * std::cos(theta0) + B * std::sin(theta0);
      g.cos_coeff[static_cast<std::size_t>(idx)] = -A * std::sin(theta0) + B * std::cos(theta0);
    }
  }
  return g;
}

int delay_steps(double delay, double internal_dt) {
  return static_cast<int>(std::ceil(delay / internal_dt - 1e-9));
}

JointTrace simulate_open_loop(const RobotModel& model, const SimParams& xi,
                              const ActionSequence& actions, const PlantConfig& cfg,
                              PlantLog* log) {
  xi.validate();
  if (actions.targets.empty()) throw InputError("simulate_open_loop: empty action sequence");
  if (!(cfg.internal_dt > 0) || cfg.decimation < 1) {
    throw InputError("simulate_open_loop: invalid internal step or decimation");
  }
  const double ratio = actions.period / cfg.internal_dt;
  const long per_action = std::lround(ratio);
  if (per_action < 1 || std::abs(ratio - static_cast<double>(per_action)) > 1e-9) {
    throw InputError("simulate_open_loop: control period must be a multiple of the internal step");
  }
  const long total_steps = per_action * static_cast<long>(actions.targets.size());
  const int lag = delay_steps(xi.delay, cfg.internal_dt);

  const JointVector frozen = cfg.frozen_q.value_or(model.nominal_quadrupedal_pose);
  const auto inertia = effective_inertia(model, xi, frozen, cfg.rotor_inertia);
  GravityModel grav;
  if (cfg.gravity) grav = gravity_model(model, xi, frozen);

  std::array<JointStep, kNumJoints> joints{};
  for (int j = 0; j < kNumJoints; ++j) {
    const auto& lim = model.limit(j);
    joints[static_cast<std::size_t>(j)] = {inertia[static_cast<std::size_t>(j)],
                                           cfg.internal_dt,
                                           cfg.kp * xi.pd_scale,
                                           cfg.kd * xi.pd_scale,
                                           xi.joint_damping,
                                           xi.joint_friction,
                                           cfg.v_eps,
                                           model.torque_limit(j),
                                           lim.min,
                                           lim.max,
                                           cfg.limit_stiffness};
  }

  const JointVector initial = cfg.initial_q.value_or(actions.targets.front());
  JointVector q = initial, v;
  JointTrace trace;
  trace.period = cfg.internal_dt * cfg.decimation;
  trace.q.reserve(static_cast<std::size_t>(total_steps / cfg.decimation + 1));
  if (log) *log = PlantLog{};

  for (long k = 0; k < total_steps; ++k) {
    if (k % cfg.decimation == 0) {
      for (int j = 0; j < kNumJoints; ++j) {
        if (!std::isfinite(q[j]) || std::abs(q[j]) > 1e3) {
          throw SimulationError("plant blow-up on joint " + joint_name(j),
                                static_cast<double>(k) * cfg.internal_dt);
        }
      }
      trace.q.push_back(q);
    }
    const long m = k - lag;
    const JointVector& target =
        m < 0 ? initial : actions.targets[static_cast<std::size_t>(m / per_action)];
    if (log) {
      log->q.push_back(q);
      log->v.push_back(v);
      log->target.push_back(target);
    }
    JointVector tau;
    for (int j = 0; j < kNumJoints; ++j) {
      JointStep js = joints[static_cast<std::size_t>(j)];
      if (q[j] > js.hi || q[j] < js.lo) js.damping += cfg.limit_damping;
      const double vn = js.solve(q[j], v[j], target[j], grav.torque(j, q[j]));
      if (log) tau[j] = js.pd(q[j], target[j], vn);
      q[j] += js.h * vn;
      v[j] = vn;
    }
    if (log) log->torque.push_back(tau);
  }
  return trace;
}

}  // namespace bipedkit
