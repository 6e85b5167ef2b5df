#pragma once

#include <array>
#include <vector>

#include "bipedkit/motion_target.hpp"
#include "bipedkit/robot_model.hpp"

namespace bipedkit {

struct CurriculumConfig {
  double vel_resample_period = 10.0;      // s
  double heading_resample_period = 10.0;  // s
  double hand_goal_period = 3.0;          // s
  std::vector<double> vel_bins = {-0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3};
  std::vector<double> vel_bin_weights;    // empty: uniform
  double heading_offset_min = -kPi / 2;
  double heading_offset_max = kPi / 2;
  double yaw_rate_gain = 1.0;  // 1/s
  double yaw_rate_max = 1.0;   // rad/s
  // Phase offsets of each resampling clock (s); all aligned by default.
  double vel_phase = 0.0;
  double heading_phase = 0.0;
  double hand_phase = 0.0;
  // Interpolated toe segments must stay inside the reachable workspace; this
  // many evenly spaced checkpoints are verified per candidate segment.
  int segment_checkpoints = 32;

  void validate() const;
};

double sample_velocity(Rng& rng, const CurriculumConfig& config);

/// wrap(current + U[offset_min, offset_max]).
double sample_heading(double current_heading, Rng& rng, const CurriculumConfig& config);

/// gain * wrap(heading_des - current), clamped to +-yaw_rate_max.
double yaw_rate_observation(double current_heading, double heading_des,
                            const CurriculumConfig& config);

/// Affine blend; throws InputError unless 0 <= t <= duration.
std::array<Vec3, 2> interpolate_toe_targets(const std::array<Vec3, 2>& prev_goal,
                                            const std::array<Vec3, 2>& next_goal, double t,
                                            double duration);

/// True when `point` lies in the leg's reachable workspace within `tol`.
bool toe_reachable(const RobotModel& model, Leg leg, const Vec3& point, double tol = 1e-9);

struct ResampleEvent {
  enum class Kind { Velocity, Heading, ToeGoal };
  Kind kind;
  double t;
  double value;   // v_x, heading_des or 0 for toe goals
  double offset;  // heading offset relative to the current heading
};

/// Stateful curriculum for one environment instance.
///
/// Each component is resampled when its clock crosses a period boundary
/// (t = 0 counts as a boundary). Toe goals keep a previous and a next goal
/// and the emitted target slides linearly from one to the other over the
/// segment. Independent random streams are derived from the seed per
/// component.
class CurriculumGenerator {
 public:
  CurriculumGenerator(const RobotModel& model, CurriculumConfig config, std::uint64_t seed);

  /// Advance to time t (non-decreasing) given the robot's current heading.
  MotionTarget step(double t, double current_heading);

  const std::vector<ResampleEvent>& events() const { return events_; }
  std::size_t count(ResampleEvent::Kind kind) const;
  /// Joint triples producing the current previous / next toe goals.
  const std::array<ReachableGoal, 2>& prev_goals() const { return prev_; }
  const std::array<ReachableGoal, 2>& next_goals() const { return next_; }

 private:
  ReachableGoal draw_goal(std::size_t side, const Vec3& from);

  const RobotModel& model_;
  CurriculumConfig config_;
  Rng vel_rng_, heading_rng_;
  std::array<Rng, 2> toe_rng_;
  long vel_index_ = -1, heading_index_ = -1, hand_index_ = -1;
  double last_t_ = -1.0;
  double v_x_ = 0.0, heading_des_ = 0.0;
  std::array<ReachableGoal, 2> prev_{}, next_{};
  std::vector<ResampleEvent> events_;
};

/// Offline curriculum track sampled every dt. The robot heading is assumed
/// to follow the yaw-rate observation exactly (integrated each step).
TargetTrack generate_curriculum(const RobotModel& model, const CurriculumConfig& config,
                                std::uint64_t seed, double duration, double dt = 0.02);

CurriculumConfig load_curriculum_config(const std::filesystem::path& path);

}  // namespace bipedkit
