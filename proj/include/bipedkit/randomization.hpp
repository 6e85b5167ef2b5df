#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "bipedkit/calibration.hpp"

namespace bipedkit {

enum class RandParam {
  JointFriction,
  JointDamping,
  RigidFriction,
  Restitution,
  BaseMassOffset,
  HipMassOffset,
  ThighMassOffset,
  CalfMassOffset,
  FootMassOffset,
  ComDisplacement,  // per axis (m)
  PdFraction,       // shared multiplier on kp and kd
  Delay,
};
inline constexpr std::array<RandParam, 12> kAllRandParams = {
    RandParam::JointFriction,   RandParam::JointDamping,   RandParam::RigidFriction,
    RandParam::Restitution,     RandParam::BaseMassOffset, RandParam::HipMassOffset,
    RandParam::ThighMassOffset, RandParam::CalfMassOffset, RandParam::FootMassOffset,
    RandParam::ComDisplacement, RandParam::PdFraction,     RandParam::Delay};

std::string_view rand_param_key(RandParam p);  // "mass_offset.hip"
std::optional<RandParam> parse_rand_param(std::string_view key);

/// Per-row uniform ranges. A table read from a file may be partial; sampling
/// requires every row.
struct RandomizationTable {
  std::map<RandParam, ParamRange> ranges;

  /// The published ranges.
  static RandomizationTable defaults();

  /// lo <= hi, restitution within [0, 1], friction/damping/delay >= 0, PD fraction > 0.
  void validate() const;
  /// validate() plus presence of all twelve rows.
  void validate_complete() const;

  static RandomizationTable parse(std::string_view text, const std::string& source = "<memory>");
  static RandomizationTable load(const std::filesystem::path& path);
  std::string serialize() const;
  bool operator==(const RandomizationTable&) const = default;
};

/// One episode's physical parameters.
struct EnvParams {
  double joint_friction = 0.0;
  double joint_damping = 0.0;
  double rigid_friction = 1.0;
  double restitution = 0.0;
  std::array<double, 5> mass_offsets{};  // base, hip, thigh, calf, foot (kg)
  Vec3 com_displacement = Vec3::Zero();
  double pd_fraction = 1.0;
  double delay = 0.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

/// Independent uniform draw per row from a stream derived from `seed`.
EnvParams sample_env_params(const RandomizationTable& table, std::uint64_t seed);

/// Plant parameters implied by an episode draw (segment mass offsets become scales).
SimParams to_sim_params(const EnvParams& p, const RobotModel& model);

/// Rows searched by the calibration sweep take the report's recommended
/// range; every other row comes from `defaults`. A searched mass scale
/// [s_lo, s_hi] becomes offsets [(s_lo - 1) m, (s_hi - 1) m] for each limb segment.
RandomizationTable table_from_report(const CalibrationReport& report,
                                     const RandomizationTable& defaults,
                                     const RobotModel& model);
RandomizationTable table_from_report(const std::optional<CalibrationReport>& report,
                                     const RandomizationTable& defaults,
                                     const RobotModel& model);

}  // namespace bipedkit
