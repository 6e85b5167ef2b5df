#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "bipedkit/common.hpp"
#include "bipedkit/rng.hpp"

namespace bipedkit {

enum class Leg { FL = 0, FR = 1, RL = 2, RR = 3 };
enum class JointKind { Hip = 0, Thigh = 1, Calf = 2 };

inline constexpr int kNumLegs = 4;
inline constexpr int kNumJoints = 12;
inline constexpr std::array<Leg, 4> kAllLegs = {Leg::FL, Leg::FR, Leg::RL, Leg::RR};
inline constexpr std::array<Leg, 2> kFrontLegs = {Leg::FL, Leg::FR};

std::string_view leg_name(Leg leg);  // "FL"
std::optional<Leg> parse_leg(std::string_view name);
std::string_view joint_kind_name(JointKind kind);  // "hip"

inline constexpr int joint_index(Leg leg, JointKind kind) {
  return static_cast<int>(leg) * 3 + static_cast<int>(kind);
}
inline constexpr bool is_left(Leg leg) { return leg == Leg::FL || leg == Leg::RL; }
inline constexpr bool is_front(Leg leg) { return leg == Leg::FL || leg == Leg::FR; }

/// "FL_hip_joint", the naming used in prompts and rules.
std::string joint_name(int index);
std::optional<int> parse_joint_name(std::string_view name);

/// Hip, thigh, calf angles of one leg (rad).
using LegAngles = std::array<double, 3>;

/// Twelve joint values in leg-major order FL, FR, RL, RR x (hip, thigh, calf).
struct JointVector {
  std::array<double, kNumJoints> values{};

  double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }

  LegAngles leg(Leg l) const;
  void set_leg(Leg l, const LegAngles& angles);

  static JointVector filled(double v);
  bool operator==(const JointVector&) const = default;
};

struct JointLimit {
  double min = 0.0;
  double max = 0.0;
  double center() const { return 0.5 * (min + max); }
  double span() const { return max - min; }
};

struct LegGeometry {
  Vec3 mount = Vec3::Zero();  // hip joint position in the base frame (m)
  double hip_length = 0.0;    // lateral offset from hip axis to thigh axis (m)
  double thigh_length = 0.0;
  double calf_length = 0.0;
  std::array<JointLimit, 3> limits{};
  std::array<double, 3> torque_limits{};
};

struct SegmentMasses {
  double base = 0.0;
  double hip = 0.0;
  double thigh = 0.0;
  double calf = 0.0;
  double foot = 0.0;
};

struct BasePose {
  Vec3 position = Vec3::Zero();
  // Attitude of the base: rotates base-frame vectors into the world frame.
  Quat orientation = Quat::Identity();

  /// Throws ValidationError when |q| deviates from 1 by more than 1e-9.
  void validate() const;
};

/// Kinematic, limit and mass description of the 12-DOF quadruped.
///
/// Leg chain: hip abduction about x at `mount`, lateral offset of
/// `hip_length` (+y on left legs, -y on right legs), thigh pitch about y,
/// `thigh_length` straight down, calf pitch about y, `calf_length` straight
/// down to the toe. All-zero angles put the leg straight down.
struct RobotModel {
  std::string name;
  int version = 1;
  std::array<LegGeometry, kNumLegs> legs{};
  SegmentMasses masses;
  JointVector nominal_quadrupedal_pose;

  const LegGeometry& leg(Leg l) const { return legs[static_cast<std::size_t>(l)]; }
  const JointLimit& limit(int joint) const;
  double torque_limit(int joint) const;

  /// Hip offset + thigh + calf.
  double chain_length(Leg l) const;
  /// Radius of a base-frame sphere around the origin containing every toe position.
  double workspace_radius(Leg l) const;

  /// Throws ValidationError naming the first broken invariant.
  void validate() const;

  static RobotModel parse(std::string_view text, const std::string& source = "<memory>");
  static RobotModel load(const std::filesystem::path& path);
  /// Built-in stand-in geometry (identical to assets/robot/standin.robot).
  static const RobotModel& standin();
  std::string serialize() const;
};

enum class FkPath { Matrix, Quaternion };

/// Toe position of `leg` in the base frame. Throws ValidationError on
/// non-finite angles.
Vec3 forward_kinematics_toe(const RobotModel& model, Leg leg, const LegAngles& angles,
                            FkPath path = FkPath::Matrix);

/// d(toe)/d(angles), columns hip, thigh, calf.
Eigen::Matrix3d toe_jacobian(const RobotModel& model, Leg leg, const LegAngles& angles);

/// True iff every joint lies strictly inside [min + margin, max - margin].
bool within_limits(const RobotModel& model, const JointVector& q, double margin = 0.0);
bool leg_within_limits(const RobotModel& model, Leg leg, const LegAngles& angles,
                       double margin = 0.0);

/// A toe position together with the joint triple that produces it.
struct ReachableGoal {
  Vec3 position = Vec3::Zero();
  LegAngles joints{};
};

/// FK image of a joint triple drawn uniformly from the leg's limit box.
ReachableGoal sample_reachable_toe_goal(const RobotModel& model, Leg leg, Rng& rng);

/// Nearest point of the leg's reachable workspace to `point`.
struct WorkspaceProjection {
  ReachableGoal goal;
  double distance = 0.0;  // |goal.position - point|
};

/// Multi-start box-constrained Levenberg-Marquardt over the joint box,
/// seeded from a deterministic grid of FK samples.
WorkspaceProjection project_to_workspace(const RobotModel& model, Leg leg, const Vec3& point);

}  // namespace bipedkit
