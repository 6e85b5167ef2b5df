#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bipedkit/motion_target.hpp"
#include "bipedkit/robot_model.hpp"

namespace bipedkit {

/// One pose-estimator sample. Landmarks are in any fixed world frame (m).
struct SkeletonFrame {
  double t = 0.0;
  std::map<std::string, Vec3> landmarks;
};

/// Landmarks every frame must carry.
inline constexpr std::array<const char*, 6> kRequiredLandmarks = {
    "left_shoulder", "right_shoulder", "left_wrist", "right_wrist", "left_hip", "right_hip"};

/// JSON lines, one frame per line: {"t": 0.0, "landmarks": {"left_wrist": [x, y, z], ...}}.
/// Timestamps must increase strictly; errors carry the line number.
std::vector<SkeletonFrame> parse_skeleton_jsonl(std::string_view text,
                                                const std::string& source = "<memory>");
std::vector<SkeletonFrame> load_skeleton_jsonl(const std::filesystem::path& path);

struct RetargetConfig {
  std::optional<double> scale;  // unset: estimated from the clip
  double sample_period = 0.1;   // s

  static RetargetConfig boxing() { return {std::nullopt, 0.1}; }
  static RetargetConfig ballet() { return {std::nullopt, 0.5}; }
  void validate() const;
};

/// Human body frame: origin at the mid-shoulder point, y from the right to
/// the left shoulder, z along the hip-to-shoulder direction made orthogonal
/// to y, x = y cross z (the chest normal).
struct BodyFrame {
  Vec3 origin = Vec3::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();  // columns x, y, z in world coordinates
};
BodyFrame body_frame(const SkeletonFrame& frame);

/// Left and right wrist positions in the body frame. Throws InputError naming
/// a missing landmark or a degenerate shoulder/hip geometry.
std::array<Vec3, 2> wrist_relative(const SkeletonFrame& frame);

/// Front-mount centre: the midpoint of the FL and FR hip mounts.
Vec3 retarget_reference(const RobotModel& model);

/// Body-frame vector to robot base frame for a robot standing on its hind
/// legs: robot x = human up, robot y = human left, robot z = -human forward.
Vec3 human_to_robot_axes(const Vec3& p_human);

/// Nearest reachable point; points already within 1e-8 m of the workspace are
/// returned unchanged, which makes the operation idempotent.
Vec3 clamp_to_workspace(const RobotModel& model, Leg leg, const Vec3& p);

/// reference + scale * axes(p_human), clamped to the leg's workspace.
Vec3 scale_to_robot(const Vec3& p_human, double scale, const RobotModel& model, Leg leg);

/// Front chain length over the longest shoulder-to-wrist distance in the clip.
double estimate_scale(const std::vector<SkeletonFrame>& frames, const RobotModel& model);

/// Samples at t = k * period for every k with t <= last timestamp (time
/// measured from the first frame), interpolating wrist vectors linearly.
/// Velocity and heading are held at zero; human left drives FL.
TargetTrack build_track(const std::vector<SkeletonFrame>& frames, const RetargetConfig& cfg,
                        const RobotModel& model);

}  // namespace bipedkit
