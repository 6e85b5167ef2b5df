#pragma once

#include <array>
#include <deque>
#include <string>
#include <vector>

#include "bipedkit/motion_target.hpp"
#include "bipedkit/robot_model.hpp"

namespace bipedkit {

/// World (0,0,-1) and (1,0,0) expressed in the base frame.
struct OrientationEncoding {
  Vec3 gravity = Vec3(0.0, 0.0, -1.0);
  Vec3 forward = Vec3(1.0, 0.0, 0.0);
};

/// `orientation` is the base attitude (base -> world), so the projection
/// applies its inverse. Throws ValidationError for a non-unit quaternion.
OrientationEncoding encode_orientation(const Quat& orientation);

struct FrameSnapshot {
  double t = 0.0;
  JointVector joint_positions;
  OrientationEncoding orientation;
  JointVector last_action;
  std::array<double, 2> desired_lin_vel{};
  double desired_yaw_rate = 0.0;
  std::array<Vec3, 2> desired_front_toes{Vec3::Zero(), Vec3::Zero()};

  void validate() const;
};

FrameSnapshot make_snapshot(double t, const JointVector& q, const Quat& orientation,
                            const JointVector& last_action, const MotionTarget& target);

// Per-frame layout, in order:
//   [0, 12)   joint positions, leg-major FL FR RL RR x (hip, thigh, calf)
//   [12, 15)  gravity projection
//   [15, 18)  forward projection
//   [18, 30)  last action
//   [30, 32)  desired linear velocity (x, y)
//   [32]      desired yaw rate
//   [33, 39)  desired toes FL xyz, FR xyz
// The window concatenates frames at t-0.04, t-0.02 and t, oldest first.
inline constexpr std::size_t kFrameLength = 39;
inline constexpr std::size_t kWindowFrames = 3;
inline constexpr std::size_t kObservationLength = kFrameLength * kWindowFrames;
inline constexpr std::array<double, kWindowFrames> kFrameOffsets = {-0.04, -0.02, 0.0};

void append_frame(std::vector<double>& out, const FrameSnapshot& frame);

/// Flattened window from a time-ordered history; the newest snapshot is t.
/// Past frames use the snapshot nearest to each offset (ties go to the later
/// one). Throws InputError when the history covers less than 40 ms.
std::vector<double> build_observation(const std::vector<FrameSnapshot>& history);

/// Names of the 117 observation entries, e.g. "f0.q.FL_hip_joint".
std::vector<std::string> observation_field_names();

/// Rolling buffer that keeps just enough history for the window.
class ObservationHistory {
 public:
  void push(const FrameSnapshot& frame);
  bool ready() const;
  std::vector<double> build() const;
  std::size_t size() const { return frames_.size(); }

 private:
  std::deque<FrameSnapshot> frames_;
};

inline constexpr double kDefaultKp = 30.0;
inline constexpr double kDefaultKd = 3.0;
inline constexpr double kControlPeriod = 0.02;

/// tau = kp (target - q) - kd qd, clamped to the model torque limits.
JointVector pd_torque(const RobotModel& model, const JointVector& q, const JointVector& qd,
                      const JointVector& target, double kp = kDefaultKp, double kd = kDefaultKd);

}  // namespace bipedkit
