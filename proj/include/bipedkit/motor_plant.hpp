#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "bipedkit/robot_model.hpp"
#include "bipedkit/text_io.hpp"

namespace bipedkit {

/// Calibratable plant parameters.
struct SimParams {
  double joint_friction = 0.0;  // Coulomb magnitude (N m)
  double joint_damping = 0.0;   // viscous (N m s / rad)
  std::array<double, 4> mass_scales{1.0, 1.0, 1.0, 1.0};  // hip, thigh, calf, foot
  double delay = 0.0;     // s
  double pd_scale = 1.0;  // multiplies kp and kd

  void validate() const;
  bool operator==(const SimParams&) const = default;
};

struct PlantConfig {
  double kp = 30.0;
  double kd = 3.0;
  double internal_dt = 1e-3;
  int decimation = 5;  // internal steps per output sample (200 Hz)
  double v_eps = 1e-3;
  bool gravity = true;
  double limit_stiffness = 200.0;  // N m / rad beyond a joint limit
  double limit_damping = 2.0;      // N m s / rad while beyond a joint limit
  double rotor_inertia = 0.003;    // reflected actuator inertia per joint (kg m^2)
  std::optional<JointVector> frozen_q;   // inertia/gravity configuration; default nominal pose
  std::optional<JointVector> initial_q;  // default: first action
};

/// PD targets at a fixed control period.
struct ActionSequence {
  double period = 0.02;
  std::vector<JointVector> targets;

  double duration() const { return period * static_cast<double>(targets.size()); }
  CsvTable to_table() const;
  static ActionSequence from_table(const CsvTable& table);
};

/// Joint positions at a fixed sample period.
struct JointTrace {
  double period = 0.005;
  std::vector<JointVector> q;

  CsvTable to_table() const;
  static JointTrace from_table(const CsvTable& table);
};

/// Per-internal-step record: state at the start of the step, the delayed
/// target in force during it and the PD torque it produced.
struct PlantLog {
  std::vector<JointVector> q, v, target, torque;
};

/// Diagonal inertia about each joint axis at `frozen_q`: point masses at
/// segment midpoints (hip link, thigh, calf) and at the toe (foot), summed
/// with the parallel-axis rule, plus the rotor constant.
std::array<double, kNumJoints> effective_inertia(const RobotModel& model, const SimParams& xi,
                                                 const JointVector& frozen_q,
                                                 double rotor_inertia);

/// Gravity torque on joint j as a function of its own angle, other joints
/// frozen: tau_g(q) = cos_coeff[j] cos q + sin_coeff[j] sin q.
struct GravityModel {
  std::array<double, kNumJoints> cos_coeff{}, sin_coeff{};
  double torque(int joint, double q) const {
    return cos_coeff[static_cast<std::size_t>(joint)] * std::cos(q) +
           sin_coeff[static_cast<std::size_t>(joint)] * std::sin(q);
  }
};
GravityModel gravity_model(const RobotModel& model, const SimParams& xi,
                           const JointVector& frozen_q);

/// Internal steps between a target change and its first effect.
int delay_steps(double delay, double internal_dt);

/// Fixed-base open-loop replay. Per joint:
///   I q'' = clamp(kp (r - q) - kd q') - b q' - f sat(q'/v_eps) + tau_g(q) + tau_stop(q, q')
/// with r the delayed, zero-order-held target. Backward Euler in every term
/// except gravity and the stop damper (which switches on from the state at
/// the start of the step); the friction/clamp/stop-spring nonlinearities are
/// solved exactly as a monotone piecewise-linear equation in the new velocity.
/// Throws SimulationError on blow-up.
JointTrace simulate_open_loop(const RobotModel& model, const SimParams& xi,
                              const ActionSequence& actions, const PlantConfig& cfg = {},
                              PlantLog* log = nullptr);

}  // namespace bipedkit
