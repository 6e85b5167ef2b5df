#include "bipedkit/observation.hpp"

#include <algorithm>

namespace bipedkit {

namespace {

constexpr double kTimeEps = 1e-9;

void check_unit(const Vec3& v, const char* what) {
  if (std::abs(v.norm() - 1.0) > 1e-9) {
    throw ValidationError(std::string("frame snapshot: ") + what + " encoding is not unit-norm");
  }
}

}  // namespace

OrientationEncoding encode_orientation(const Quat& orientation) {
  if (std::abs(orientation.norm() - 1.0) > 1e-9) {
    throw ValidationError("encode_orientation: quaternion is not unit-norm");
  }
  const Quat to_base = orientation.conjugate();
  return {to_base * Vec3(0.0, 0.0, -1.0), to_base * Vec3(1.0, 0.0, 0.0)};
}

void FrameSnapshot::validate() const {
  check_unit(orientation.gravity, "gravity");
  check_unit(orientation.forward, "forward");
}

FrameSnapshot make_snapshot(double t, const JointVector& q, const Quat& orientation,
                            const JointVector& last_action, const MotionTarget& target) {
  FrameSnapshot f;
  f.t = t;
  f.joint_positions = q;
  f.orientation = encode_orientation(orientation);
  f.last_action = last_action;
  f.desired_lin_vel = {target.v_x, target.v_y};
  f.desired_yaw_rate = target.yaw_rate_obs;
  f.desired_front_toes = target.toe_des;
  return f;
}

void append_frame(std::vector<double>& out, const FrameSnapshot& f) {
  out.insert(out.end(), f.joint_positions.values.begin(), f.joint_positions.values.end());
  for (int i = 0; i < 3; ++i) out.push_back(f.orientation.gravity(i));
  for (int i = 0; i < 3; ++i) out.push_back(f.orientation.forward(i));
  out.insert(out.end(), f.last_action.values.begin(), f.last_action.values.end());
  out.push_back(f.desired_lin_vel[0]);
  out.push_back(f.desired_lin_vel[1]);
  out.push_back(f.desired_yaw_rate);
  for (const auto& toe : f.desired_front_toes) {
    for (int i = 0; i < 3; ++i) out.push_back(toe(i));
  }
}

std::vector<double> build_observation(const std::vector<FrameSnapshot>& history) {
  if (history.empty()) throw InputError("build_observation: empty history");
  const double now = history.back().t;
  if (now - history.front().t < -kFrameOffsets[0] - kTimeEps) {
    throw InputError("build_observation: history spans less than 0.04 s");
  }
  std::vector<double> out;
  out.reserve(kObservationLength);
  for (double offset : kFrameOffsets) {
    const double want = now + offset;
    std::size_t best = 0;
    double best_gap = std::abs(history[0].t - want);
    for (std::size_t i = 1; i < history.size(); ++i) {
      const double gap = std::abs(history[i].t - want);
      if (gap <= best_gap) {
        best = i;
        best_gap = gap;
      }
    }
    history[best].validate();
    append_frame(out, history[best]);
  }
  return out;
}

std::vector<std::string> observation_field_names() {
  std::vector<std::string> names;
  names.reserve(kObservationLength);
  const char* axes = "xyz";
  for (std::size_t f = 0; f < kWindowFrames; ++f) {
    const std::string p = "f" + std::to_string(f) + ".";
    for (int j = 0; j < kNumJoints; ++j) names.push_back(p + "q." + joint_name(j));
    for (int i = 0; i < 3; ++i) names.push_back(p + "gravity." + axes[i]);
    for (int i = 0; i < 3; ++i) names.push_back(p + "forward." + axes[i]);
    for (int j = 0; j < kNumJoints; ++j) names.push_back(p + "action." + joint_name(j));
    names.push_back(p + "cmd.v_x");
    names.push_back(p + "cmd.v_y");
    names.push_back(p + "cmd.yaw_rate");
    for (const char* leg : {"FL", "FR"}) {
      for (int i = 0; i < 3; ++i) names.push_back(p + "toe." + leg + "." + axes[i]);
    }
  }
  return names;
}

void ObservationHistory::push(const FrameSnapshot& frame) {
  if (!frames_.empty() && !(frame.t > frames_.back().t)) {
    throw InputError("observation history: timestamps must be strictly increasing");
  }
  frames_.push_back(frame);
  // Keep one snapshot older than the window so nearest selection stays exact.
  while (frames_.size() > 2 && frames_[1].t <= frame.t + kFrameOffsets[0] - kTimeEps) {
    frames_.pop_front();
  }
}

bool ObservationHistory::ready() const {
  return !frames_.empty() && frames_.back().t - frames_.front().t >= -kFrameOffsets[0] - kTimeEps;
}

std::vector<double> ObservationHistory::build() const {
  return build_observation(std::vector<FrameSnapshot>(frames_.begin(), frames_.end()));
}

JointVector pd_torque(const RobotModel& model, const JointVector& q, const JointVector& qd,
                      const JointVector& target, double kp, double kd) {
  JointVector tau;
  for (int j = 0; j < kNumJoints; ++j) {
    const double limit = model.torque_limit(j);
    tau[j] = clamp(kp * (target[j] - q[j]) - kd * qd[j], -limit, limit);
  }
  return tau;
}

}  // namespace bipedkit
