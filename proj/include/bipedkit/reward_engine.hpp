#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "bipedkit/motion_target.hpp"
#include "bipedkit/robot_model.hpp"
#include "bipedkit/text_io.hpp"

namespace bipedkit {

/// Instantaneous state consumed by rewards and termination.
struct EnvState {
  BasePose base;
  Vec3 base_lin_vel = Vec3::Zero();  // world frame (m/s)
  Vec3 base_ang_vel = Vec3::Zero();  // world frame (rad/s)
  double heading = 0.0;              // yaw (rad)
  JointVector q, qd, torques;
  std::array<bool, 4> foot_contacts{};
  std::array<double, 4> foot_heights{};
  std::array<Vec3, 4> foot_velocities{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  bool non_foot_collision = false;  // base or limb links touching the ground
  JointVector action, prev_action;
  int step = 0;
  MotionTarget target;
};

enum class ScaleMode { Dynamic, ConstantOne };
enum class Shaping { Quadratic, Hinge };

struct RewardConfig {
  // Tracking terms, ordered base_v, heading, hand.
  std::array<double, 3> alpha = {0.25, 0.2, 0.7};
  std::array<double, 3> sigma = {0.25, 0.3, 0.04};

  double height_weight = 1.0;
  double pitch_weight = 1.0;
  double collision_weight = 1.0;
  double target_height = 0.38;  // H_up (m)
  double upright_band = 0.15;   // tilt of the base x axis from world up (rad)

  ScaleMode scale_mode = ScaleMode::Dynamic;
  double scale_height_mid = 0.7;     // fraction of H_up
  double scale_height_width = 0.05;  // fraction of H_up
  double scale_pitch_mid = 0.6;      // rad of tilt
  double scale_pitch_width = 0.1;    // rad

  double joint_motion_weight = 1e-4;
  Shaping joint_motion_shaping = Shaping::Quadratic;
  double joint_motion_threshold = 5.0;  // rad/s, hinge only
  double limit_weight = 0.1;
  double limit_soft_fraction = 0.9;     // of the half range
  double torque_weight = 1e-4;
  Shaping torque_shaping = Shaping::Quadratic;
  double torque_threshold_fraction = 0.8;  // of the torque limit, hinge only
  double action_rate_weight = 0.01;
  double gait_weight = 10.0;
  double gait_period = 0.6;     // s
  double swing_height = 0.05;   // m
  double control_dt = 0.02;     // s per step
  double slip_weight = 0.1;

  double sitdown_belly_weight = 1.0;
  double sitdown_pose_weight = 1.0;
  double sitdown_pose_sigma = 0.5;  // rad^2

  int collision_grace_steps = 30;
  int max_steps = 1000;
  double limit_margin = 0.0;

  void validate() const;
  static RewardConfig parse(std::string_view text, const std::string& source = "<memory>");
  static RewardConfig load(const std::filesystem::path& path);
  std::string serialize() const;
};

struct RewardBreakdown {
  double height = 0, pitch = 0, collision = 0;
  double track_base_v = 0, track_heading = 0, track_hand = 0;
  double reg_joint_motion = 0, reg_limit = 0, reg_torque = 0, reg_action_rate = 0, reg_gait = 0,
         reg_slip = 0;
  std::array<double, 3> c{};  // scale per tracking term
  std::array<double, 3> e{};  // tracking errors
  double total = 0;

  /// Sum of the twelve reward terms.
  double sum_of_terms() const;
  static std::vector<std::string> column_names();
  std::vector<double> values() const;
};

enum class TerminationReason { None, Collision, JointLimit, Timeout };
std::string_view termination_name(TerminationReason r);

struct TerminationVerdict {
  bool done = false;
  TerminationReason reason = TerminationReason::None;
};

struct StandTerms {
  double height = 0, pitch = 0, collision = 0;
};
struct TrackingTerms {
  std::array<double, 3> terms{}, c{}, e{};
};
struct RegTerms {
  double joint_motion = 0, limit = 0, torque = 0, action_rate = 0, gait = 0, slip = 0;
};

/// Angle between the base x axis and world up (rad); 0 when standing upright.
double upright_tilt(const BasePose& base);

/// Clipped-linear height term, cosine-window pitch term, indicator collision term.
StandTerms stand_reward(const EnvState& s, const RewardConfig& cfg);

/// Shared standing-quality scale in [0, 1]: product of a height logistic and a
/// tilt logistic, each normalised to 1 at the edge of the upright set.
double dynamic_scale(const EnvState& s, const RewardConfig& cfg);

/// Tracking errors (planar velocity in the heading frame, wrapped yaw, front
/// toe positions from FK of q).
std::array<double, 3> tracking_errors(const EnvState& s, const RewardConfig& cfg,
                                      const RobotModel& model);
TrackingTerms tracking_reward(const EnvState& s, const RewardConfig& cfg, const RobotModel& model);

/// Rear-foot swing height reference at a given step; RL leads RR by half a period.
std::array<double, 2> gait_reference(int step, const RewardConfig& cfg);

RegTerms regularization_reward(const EnvState& s, const RewardConfig& cfg,
                               const RobotModel& model);
RewardBreakdown total_reward(const EnvState& s, const RewardConfig& cfg, const RobotModel& model);
double sitdown_reward(const EnvState& s, const RewardConfig& cfg, const RobotModel& model);

/// collision (after the grace steps) > joint_limit > timeout.
TerminationVerdict check_termination(const EnvState& s, const RewardConfig& cfg,
                                     const RobotModel& model);

/// CSV codec used by reward-audit. Missing columns keep the EnvState default
/// (identity attitude, zeros elsewhere).
std::vector<std::string> env_state_columns();
std::vector<double> env_state_row(const EnvState& s);
EnvState env_state_from_row(const CsvTable& table, std::size_t row);

}  // namespace bipedkit
