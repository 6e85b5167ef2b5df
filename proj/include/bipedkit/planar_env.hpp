#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "bipedkit/cem.hpp"
#include "bipedkit/reward_engine.hpp"
#include "bipedkit/robot_model.hpp"

namespace bipedkit {

/// Generalised coordinates of the sagittal model: base x, z, pitch, then the
/// hind thigh, hind calf, front thigh and front calf joints. Pitch rotates
/// about the base y axis; -pi/2 points the base x axis straight up.
inline constexpr int kPlanarDof = 7;
inline constexpr int kPlanarJoints = 4;
enum PlanarCoord { kPx = 0, kPz, kPitch, kHindThigh, kHindCalf, kFrontThigh, kFrontCalf };

/// Contact points: the two lumped toes, then knees and base corners.
inline constexpr int kPlanarContacts = 8;
enum PlanarContact { kHindToe = 0, kFrontToe, kHindKnee, kFrontKnee, kCornerRearLow,
                     kCornerFrontLow, kCornerRearHigh, kCornerFrontHigh };

using PlanarVector = std::array<double, kPlanarDof>;
using PlanarAction = std::array<double, kPlanarJoints>;  // joint position targets (rad)

struct PlanarContactState {
  bool active = false;
  double anchor = 0.0;   // world x of the stick point (m)
  double normal = 0.0;   // last applied normal force (N)
  double tangent = 0.0;  // last applied tangential force (N)
  bool sliding = false;
  bool operator==(const PlanarContactState&) const = default;
};

struct PlanarState {
  PlanarVector q{};
  PlanarVector v{};
  std::array<PlanarContactState, kPlanarContacts> contacts{};
  PlanarAction torques{};  // applied per lumped joint in the last substep (N m)
  int step = 0;

  bool foot_contact(bool front) const { return contacts[front ? kFrontToe : kHindToe].active; }
  /// Any contact point other than the two toes touching the ground.
  bool body_contact() const;
  bool operator==(const PlanarState&) const = default;
};

/// Two robot legs per side of the sagittal plane are lumped into one chain:
/// masses, gains and torque limits are doubled, and one contact point stands
/// for the paired toes.
struct PlanarConfig {
  double dt = 0.02;  // control period (s)
  int substeps = 5;
  double kp = 30.0, kd = 3.0;  // per motor
  int motors_per_joint = 2;
  bool actuated = true;
  double gravity = kGravity;
  double contact_stiffness = 5000.0;  // N/m per contact point
  double contact_damping = 50.0;      // N s/m
  double friction = 1.0;              // Coulomb coefficient
  double base_half_length = 0.22;     // corner offsets along base x (m)
  double base_half_height = 0.05;     // corner offsets along base z (m)
  double stand_height = 0.38;         // base height the feedback policy regulates to (m)
  double init_noise = 0.0;            // std of joint-angle perturbation at reset (rad)

  void validate() const;
  nlohmann::json to_json() const;
  static PlanarConfig from_json(const nlohmann::json& j);
};

/// Link geometry and inertia derived from the robot description.
class PlanarModel {
 public:
  PlanarModel(const RobotModel& robot, const PlanarConfig& config);

  const RobotModel& robot() const { return *robot_; }
  const PlanarConfig& config() const { return config_; }
  double total_mass() const;
  double torque_limit(int joint) const;  // lumped (N m)
  std::array<double, 2> world_point(const PlanarState& s, int contact) const;
  std::array<double, 2> point_velocity(const PlanarState& s, int contact) const;

  /// Whole-body centre of mass {x, z} and its velocity {vx, vz}.
  std::array<double, 4> center_of_mass(const PlanarState& s) const;

  /// Kinetic plus gravitational energy (J), with the ground at z = 0.
  double mechanical_energy(const PlanarState& s) const;

  struct Impl;
  const Impl& impl() const { return *impl_; }

 private:
  const RobotModel* robot_;
  PlanarConfig config_;
  std::shared_ptr<const Impl> impl_;
};

/// Advance one control period with the action held. Semi-implicit Euler with
/// the PD, contact spring-dampers and stick friction treated implicitly in
/// velocity. Normal forces are never negative and |tangent| <= mu * normal.
/// Throws SimulationError on non-finite state.
PlanarState planar_step(const PlanarModel& model, const PlanarState& state,
                        const PlanarAction& action);

/// Lying pose on four feet at the nominal joint angles, settled to a static
/// equilibrium under its own PD targets. Cached per model.
const PlanarState& planar_rest_state(const PlanarModel& model);
PlanarAction planar_rest_targets(const RobotModel& robot);

/// x -> -x reflection, which swaps the front and hind chains. Exact for a
/// robot whose front and hind legs share geometry and masses.
PlanarState mirror(const PlanarState& s);
PlanarAction mirror(const PlanarAction& a);

/// View of a planar state through the 12-joint reward interface.
EnvState to_env_state(const PlanarModel& model, const PlanarState& s, const PlanarAction& action,
                      const PlanarAction& prev_action, const MotionTarget& target);

/// Front toe targets at the resting arm pose, zero velocity and heading.
MotionTarget planar_motion_target(const RobotModel& robot);

/// Feedback signals: z - stand_height, pitch + pi/2, pitch rate, horizontal
/// offset of the centre of mass from the hind toe, and its horizontal velocity.
/// Each is divided by a fixed scale and clipped to [-1, 1], so the gains stay
/// meaningful far from the standing pose.
inline constexpr int kPolicyFeatures = 5;
std::array<double, kPolicyFeatures> policy_features(const PlanarModel& model,
                                                   const PlanarState& s);

/// Joint targets = rest pose + cubic (Catmull-Rom) schedule over `knots`
/// equally spaced times in [0, schedule_time], held afterwards, plus linear
/// feedback on policy_features. Targets are clamped to the joint limits
/// shrunk by `target_margin`.
struct PlanarPolicy {
  int knots = 5;
  double schedule_time = 1.0;  // s
  double target_margin = 0.05;  // rad
  std::vector<double> params;  // knots x 4 offsets, then 4 x kPolicyFeatures gains

  static int dimension(int knots) {
    return knots * kPlanarJoints + kPlanarJoints * kPolicyFeatures;
  }
  static PlanarPolicy zeros(int knots = 5, double schedule_time = 1.0);
  void validate() const;
  PlanarAction act(const PlanarModel& model, const PlanarState& s) const;
  nlohmann::json to_json() const;
  static PlanarPolicy from_json(const nlohmann::json& j);
};

struct RolloutResult {
  double undiscounted = 0.0;
  double discounted = 0.0;
  int steps = 0;
  TerminationReason reason = TerminationReason::None;
  PlanarState final_state;
  double final_height = 0.0;  // base z (m)
  double final_tilt = 0.0;    // angle of the base x axis from world up (rad)
  std::vector<PlanarState> trajectory;       // states after each step, when recorded
  std::vector<PlanarAction> actions;         // when recorded
  std::vector<RewardBreakdown> breakdowns;   // when recorded
};

struct RolloutOptions {
  double discount = 0.99;
  bool record = false;
};

/// Runs from the rest state (perturbed by init_noise drawn from `seed`) until
/// check_termination fires; at least one step always runs.
RolloutResult rollout(const PlanarModel& model, const PlanarPolicy& policy,
                      const RewardConfig& reward, std::uint64_t seed,
                      const RolloutOptions& options = {});

/// Replays a fixed action sequence (no termination), for ablation checks.
std::vector<PlanarState> replay_actions(const PlanarModel& model, const PlanarState& start,
                                        const std::vector<PlanarAction>& actions);

/// trajectory CSV: t, the seven coordinates and rates, contact flags, reward total.
CsvTable trajectory_table(const PlanarModel& model, const RolloutResult& r);

struct PlanarTrainConfig {
  CemConfig cem;
  int knots = 5;
  double schedule_time = 1.0;
  int episodes = 1;  // rollouts averaged per objective evaluation
  bool discounted = false;
};

struct PlanarTrainResult {
  PlanarPolicy policy;
  CemResult cem;
  RolloutResult evaluation;  // best policy, episode seed 0
};

PlanarTrainResult planar_train(const PlanarModel& model, const RewardConfig& reward,
                               const PlanarTrainConfig& config);

/// True when the evaluation ends with z >= fraction * H_up and tilt <= max_tilt.
bool stood_up(const RolloutResult& r, const RewardConfig& reward, double fraction = 0.8,
              double max_tilt = 0.2);

}  // namespace bipedkit
