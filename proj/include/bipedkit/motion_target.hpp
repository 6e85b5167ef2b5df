#pragma once

#include <array>
#include <filesystem>
#include <string_view>
#include <vector>

#include "bipedkit/common.hpp"
#include "bipedkit/text_io.hpp"

namespace bipedkit {

/// Command interface between a motion generator and the policy.
struct MotionTarget {
  double v_x = 0.0;           // m/s, base heading frame
  double v_y = 0.0;           // m/s
  double heading_des = 0.0;   // absolute yaw (rad)
  double yaw_rate_obs = 0.0;  // rad/s
  std::array<Vec3, 2> toe_des{Vec3::Zero(), Vec3::Zero()};  // FL, FR in the base frame

  bool operator==(const MotionTarget&) const = default;
};

struct TargetRow {
  double t = 0.0;
  MotionTarget target;
  int source = -1;  // key-frame or sample id, -1 when not applicable
};

/// Time-stamped MotionTargets shared by curriculum, retarget and instruct.
///
/// CSV columns: t, v_x, v_y, heading_des, yaw_rate_obs, fl_x, fl_y, fl_z,
/// fr_x, fr_y, fr_z, source.
struct TargetTrack {
  std::vector<TargetRow> rows;

  CsvTable to_table() const;
  std::string to_csv() const;
  static TargetTrack from_table(const CsvTable& table);
  static TargetTrack parse(std::string_view text);
  static TargetTrack load(const std::filesystem::path& path);
};

std::vector<std::string> target_track_columns();

}  // namespace bipedkit
