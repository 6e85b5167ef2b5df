#include "bipedkit/reward_engine.hpp"

#include <functional>

namespace bipedkit {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string_view scale_mode_name(ScaleMode m) {
  return m == ScaleMode::Dynamic ? "dynamic" : "constant_one";
}
std::string_view shaping_name(Shaping s) { return s == Shaping::Quadratic ? "quadratic" : "hinge"; }

Shaping parse_shaping(const std::string& v, const std::string& key) {
  if (v == "quadratic") return Shaping::Quadratic;
  if (v == "hinge") return Shaping::Hinge;
  throw ValidationError(key + ": expected quadratic or hinge, got '" + v + "'");
}

// Numeric fields of RewardConfig by config-file key, in serialization order.
struct NumericField {
  const char* key;
  double RewardConfig::*member;
};

constexpr NumericField kNumericFields[] = {
    {"stand.height.weight", &RewardConfig::height_weight},
    {"stand.pitch.weight", &RewardConfig::pitch_weight},
    {"stand.collision.weight", &RewardConfig::collision_weight},
    {"stand.target_height", &RewardConfig::target_height},
    {"stand.upright_band", &RewardConfig::upright_band},
    {"scale.height.mid", &RewardConfig::scale_height_mid},
    {"scale.height.width", &RewardConfig::scale_height_width},
    {"scale.pitch.mid", &RewardConfig::scale_pitch_mid},
    {"scale.pitch.width", &RewardConfig::scale_pitch_width},
    {"reg.joint_motion.weight", &RewardConfig::joint_motion_weight},
    {"reg.joint_motion.threshold", &RewardConfig::joint_motion_threshold},
    {"reg.limit.weight", &RewardConfig::limit_weight},
    {"reg.limit.soft_fraction", &RewardConfig::limit_soft_fraction},
    {"reg.torque.weight", &RewardConfig::torque_weight},
    {"reg.torque.threshold_fraction", &RewardConfig::torque_threshold_fraction},
    {"reg.action_rate.weight", &RewardConfig::action_rate_weight},
    {"reg.gait.weight", &RewardConfig::gait_weight},
    {"reg.gait.period", &RewardConfig::gait_period},
    {"reg.gait.swing_height", &RewardConfig::swing_height},
    {"reg.gait.control_dt", &RewardConfig::control_dt},
    {"reg.slip.weight", &RewardConfig::slip_weight},
    {"sitdown.belly.weight", &RewardConfig::sitdown_belly_weight},
    {"sitdown.pose.weight", &RewardConfig::sitdown_pose_weight},
    {"sitdown.pose.sigma", &RewardConfig::sitdown_pose_sigma},
    {"termination.limit_margin", &RewardConfig::limit_margin},
};

Vec3 toe_target(const MotionTarget& t, std::size_t side) { return t.toe_des[side]; }

}  // namespace

void RewardConfig::validate() const {
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(sigma[i] > 0)) throw ValidationError("reward config: every sigma must be > 0");
    if (!std::isfinite(alpha[i])) throw ValidationError("reward config: alpha must be finite");
  }
  for (const auto& f : kNumericFields) {
    if (!std::isfinite(this->*f.member)) {
      throw ValidationError(std::string("reward config: ") + f.key + " must be finite");
    }
  }
  if (!(target_height > 0)) throw ValidationError("reward config: target height must be > 0");
  if (!(upright_band >= 0)) throw ValidationError("reward config: upright band must be >= 0");
  if (!(scale_height_width > 0 && scale_pitch_width > 0)) {
    throw ValidationError("reward config: scale widths must be > 0");
  }
  if (!(gait_period > 0 && control_dt > 0)) {
    throw ValidationError("reward config: gait period and control dt must be > 0");
  }
  if (!(swing_height >= 0)) throw ValidationError("reward config: swing height must be >= 0");
  if (!(sitdown_pose_sigma > 0)) throw ValidationError("reward config: pose sigma must be > 0");
  if (collision_grace_steps < 0 || max_steps < 1) {
    throw ValidationError("reward config: grace steps >= 0 and max steps >= 1 required");
  }
}

RewardConfig RewardConfig::parse(std::string_view text, const std::string& source) {
  auto kv = KeyValueFile::parse(text, source);
  RewardConfig c;
  if (kv.has("version") && kv.number("version") != 1) {
    throw ValidationError(source + ": unsupported reward config version");
  }
  if (kv.has("alpha")) {
    auto a = kv.list("alpha", 3);
    c.alpha = {a[0], a[1], a[2]};
  }
  if (kv.has("sigma")) {
    auto s = kv.list("sigma", 3);
    c.sigma = {s[0], s[1], s[2]};
  }
  for (const auto& f : kNumericFields) c.*f.member = kv.number_or(f.key, c.*f.member);
  const std::string mode = kv.text_or("scale.mode", "dynamic");
  if (mode == "dynamic") {
    c.scale_mode = ScaleMode::Dynamic;
  } else if (mode == "constant_one") {
    c.scale_mode = ScaleMode::ConstantOne;
  } else {
    throw ValidationError(source + ": scale.mode must be dynamic or constant_one");
  }
  c.joint_motion_shaping =
      parse_shaping(kv.text_or("reg.joint_motion.shaping", "quadratic"), "reg.joint_motion.shaping");
  c.torque_shaping =
      parse_shaping(kv.text_or("reg.torque.shaping", "quadratic"), "reg.torque.shaping");
  c.collision_grace_steps = static_cast<int>(
      kv.number_or("termination.collision_grace_steps", c.collision_grace_steps));
  c.max_steps = static_cast<int>(kv.number_or("termination.max_steps", c.max_steps));
  kv.reject_unused();
  c.validate();
  return c;
}

RewardConfig RewardConfig::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

std::string RewardConfig::serialize() const {
  KeyValueWriter w;
  w.number("version", 1);
  w.list("alpha", {alpha[0], alpha[1], alpha[2]});
  w.list("sigma", {sigma[0], sigma[1], sigma[2]});
  w.text("scale.mode", scale_mode_name(scale_mode));
  w.text("reg.joint_motion.shaping", shaping_name(joint_motion_shaping));
  w.text("reg.torque.shaping", shaping_name(torque_shaping));
  for (const auto& f : kNumericFields) w.number(f.key, this->*f.member);
  w.number("termination.collision_grace_steps", collision_grace_steps);
  w.number("termination.max_steps", max_steps);
  return w.str();
}

// ---------------------------------------------------------------------------

double RewardBreakdown::sum_of_terms() const {
  return height + pitch + collision + track_base_v + track_heading + track_hand +
         reg_joint_motion + reg_limit + reg_torque + reg_action_rate + reg_gait + reg_slip;
}

std::vector<std::string> RewardBreakdown::column_names() {
  return {"height",          "pitch",      "collision",  "track_base_v", "track_heading",
          "track_hand",      "reg_joint_motion", "reg_limit", "reg_torque", "reg_action_rate",
          "reg_gait",        "reg_slip",   "c_base_v",   "c_heading",    "c_hand",
          "e_base_v",        "e_heading",  "e_hand",     "total"};
}

std::vector<double> RewardBreakdown::values() const {
  return {height,          pitch,     collision,  track_base_v, track_heading, track_hand,
          reg_joint_motion, reg_limit, reg_torque, reg_action_rate, reg_gait,   reg_slip,
          c[0],            c[1],      c[2],       e[0],         e[1],          e[2],
          total};
}

std::string_view termination_name(TerminationReason r) {
  switch (r) {
    case TerminationReason::None: return "none";
    case TerminationReason::Collision: return "collision";
    case TerminationReason::JointLimit: return "joint_limit";
    case TerminationReason::Timeout: return "timeout";
  }
  return "none";
}

double upright_tilt(const BasePose& base) {
  const Vec3 x_world = base.orientation * Vec3::UnitX();
  return std::acos(clamp(x_world.z() / x_world.norm(), -1.0, 1.0));
}

StandTerms stand_reward(const EnvState& s, const RewardConfig& cfg) {
  StandTerms out;
  out.height = cfg.height_weight * clamp(s.base.position.z() / cfg.target_height, 0.0, 1.0);
  const double tilt = upright_tilt(s.base);
  if (tilt <= cfg.upright_band) {
    out.pitch = cfg.pitch_weight;
  } else {
    const double u = (tilt - cfg.upright_band) / (kPi - cfg.upright_band);
    out.pitch = cfg.pitch_weight * 0.5 * (1.0 + std::cos(kPi * std::min(u, 1.0)));
  }
  const bool illegal = s.non_foot_collision || s.foot_contacts[0] || s.foot_contacts[1];
  out.collision = illegal ? -cfg.collision_weight : 0.0;
  return out;
}

double dynamic_scale(const EnvState& s, const RewardConfig& cfg) {
  if (cfg.scale_mode == ScaleMode::ConstantOne) return 1.0;
  const double H = cfg.target_height;
  const double z = s.base.position.z();
  double h = 1.0;
  if (z < H) {
    const double mid = cfg.scale_height_mid * H, width = cfg.scale_height_width * H;
    h = logistic((z - mid) / width) / logistic((H - mid) / width);
  }
  const double tilt = upright_tilt(s.base);
  double p = 1.0;
  if (tilt > cfg.upright_band) {
    p = logistic((cfg.scale_pitch_mid - tilt) / cfg.scale_pitch_width) /
        logistic((cfg.scale_pitch_mid - cfg.upright_band) / cfg.scale_pitch_width);
  }
  return clamp(h * p, 0.0, 1.0);
}

std::array<double, 3> tracking_errors(const EnvState& s, const RewardConfig&,
                                      const RobotModel& model) {
  const double ch = std::cos(s.heading), sh = std::sin(s.heading);
  const double vx = ch * s.base_lin_vel.x() + sh * s.base_lin_vel.y();
  const double vy = -sh * s.base_lin_vel.x() + ch * s.base_lin_vel.y();
  const double e_v = square(vx - s.target.v_x) + square(vy - s.target.v_y);
  const double e_heading = square(wrap_angle(s.target.heading_des - s.heading));
  double e_hand = 0.0;
  for (std::size_t side = 0; side < 2; ++side) {
    const Leg leg = kFrontLegs[side];
    const Vec3 toe = forward_kinematics_toe(model, leg, s.q.leg(leg));
    e_hand += (toe - toe_target(s.target, side)).squaredNorm();
  }
  return {e_v, e_heading, e_hand};
}

TrackingTerms tracking_reward(const EnvState& s, const RewardConfig& cfg,
                              const RobotModel& model) {
  TrackingTerms out;
  out.e = tracking_errors(s, cfg, model);
  const double c = dynamic_scale(s, cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    out.c[i] = c;
    out.terms[i] = cfg.alpha[i] * c * std::exp(-out.e[i] / cfg.sigma[i]);
  }
  return out;
}

std::array<double, 2> gait_reference(int step, const RewardConfig& cfg) {
  const double cycles = step * cfg.control_dt / cfg.gait_period;
  const double phase = cycles - std::floor(cycles);
  std::array<double, 2> ref{};
  for (std::size_t i = 0; i < 2; ++i) {
    double p = phase + 0.5 * static_cast<double>(i);
    p -= std::floor(p);
    // First half of each foot's cycle is swing, second half stance.
    ref[i] = p < 0.5 ? cfg.swing_height * square(std::sin(kPi * p / 0.5)) : 0.0;
  }
  return ref;
}

RegTerms regularization_reward(const EnvState& s, const RewardConfig& cfg,
                               const RobotModel& model) {
  RegTerms r;
  double motion = 0.0, limit = 0.0, torque = 0.0, rate = 0.0;
  for (int j = 0; j < kNumJoints; ++j) {
    const double v = std::abs(s.qd[j]);
    motion += cfg.joint_motion_shaping == Shaping::Quadratic
                  ? v * v
                  : std::max(0.0, v - cfg.joint_motion_threshold);
    const auto& lim = model.limit(j);
    const double reach = std::abs(s.q[j] - lim.center()) / (0.5 * lim.span());
    limit += std::max(0.0, reach - cfg.limit_soft_fraction);
    const double tau = std::abs(s.torques[j]);
    torque += cfg.torque_shaping == Shaping::Quadratic
                  ? tau * tau
                  : std::max(0.0, tau - cfg.torque_threshold_fraction * model.torque_limit(j));
    rate += square(s.action[j] - s.prev_action[j]);
  }
  r.joint_motion = -cfg.joint_motion_weight * motion;
  r.limit = -cfg.limit_weight * limit;
  r.torque = -cfg.torque_weight * torque;
  r.action_rate = -cfg.action_rate_weight * rate;

  const auto ref = gait_reference(s.step, cfg);
  r.gait = -cfg.gait_weight * (square(s.foot_heights[2] - ref[0]) + square(s.foot_heights[3] - ref[1]));

  double slip = 0.0;
  for (std::size_t f = 0; f < 4; ++f) {
    if (s.foot_contacts[f]) slip += square(s.foot_velocities[f].x()) + square(s.foot_velocities[f].y());
  }
  r.slip = -cfg.slip_weight * slip;
  return r;
}

RewardBreakdown total_reward(const EnvState& s, const RewardConfig& cfg, const RobotModel& model) {
  RewardBreakdown b;
  const auto stand = stand_reward(s, cfg);
  b.height = stand.height;
  b.pitch = stand.pitch;
  b.collision = stand.collision;
  const auto track = tracking_reward(s, cfg, model);
  b.track_base_v = track.terms[0];
  b.track_heading = track.terms[1];
  b.track_hand = track.terms[2];
  b.c = track.c;
  b.e = track.e;
  const auto reg = regularization_reward(s, cfg, model);
  b.reg_joint_motion = reg.joint_motion;
  b.reg_limit = reg.limit;
  b.reg_torque = reg.torque;
  b.reg_action_rate = reg.action_rate;
  b.reg_gait = reg.gait;
  b.reg_slip = reg.slip;
  b.total = b.sum_of_terms();
  return b;
}

double sitdown_reward(const EnvState& s, const RewardConfig& cfg, const RobotModel& model) {
  // Belly normal is base -z; alignment with world -z equals the zz entry.
  const double align = (s.base.orientation * Vec3::UnitZ()).z();
  double dist2 = 0.0;
  for (int j = 0; j < kNumJoints; ++j) dist2 += square(s.q[j] - model.nominal_quadrupedal_pose[j]);
  return cfg.sitdown_belly_weight * 0.5 * (align + 1.0) +
         cfg.sitdown_pose_weight * std::exp(-dist2 / cfg.sitdown_pose_sigma);
}

TerminationVerdict check_termination(const EnvState& s, const RewardConfig& cfg,
                                     const RobotModel& model) {
  if (s.non_foot_collision && s.step > cfg.collision_grace_steps) {
    return {true, TerminationReason::Collision};
  }
  if (!within_limits(model, s.q, cfg.limit_margin)) return {true, TerminationReason::JointLimit};
  if (s.step >= cfg.max_steps) return {true, TerminationReason::Timeout};
  return {};
}

// ---------------------------------------------------------------------------

namespace {

using Getter = std::function<double(const EnvState&)>;
using Setter = std::function<void(EnvState&, double)>;

struct Column {
  std::string name;
  Getter get;
  Setter set;
};

const std::vector<Column>& state_columns() {
  static const std::vector<Column> cols = [] {
    std::vector<Column> c;
    const char* axes = "xyz";
    for (int i = 0; i < 3; ++i) {
      c.push_back({std::string("base.") + axes[i], [i](const EnvState& s) { return s.base.position(i); },
                   [i](EnvState& s, double v) { s.base.position(i) = v; }});
    }
    c.push_back({"base.qw", [](const EnvState& s) { return s.base.orientation.w(); },
                 [](EnvState& s, double v) { s.base.orientation.w() = v; }});
    c.push_back({"base.qx", [](const EnvState& s) { return s.base.orientation.x(); },
                 [](EnvState& s, double v) { s.base.orientation.x() = v; }});
    c.push_back({"base.qy", [](const EnvState& s) { return s.base.orientation.y(); },
                 [](EnvState& s, double v) { s.base.orientation.y() = v; }});
    c.push_back({"base.qz", [](const EnvState& s) { return s.base.orientation.z(); },
                 [](EnvState& s, double v) { s.base.orientation.z() = v; }});
    for (int i = 0; i < 3; ++i) {
      c.push_back({std::string("vel.") + axes[i], [i](const EnvState& s) { return s.base_lin_vel(i); },
                   [i](EnvState& s, double v) { s.base_lin_vel(i) = v; }});
    }
    for (int i = 0; i < 3; ++i) {
      c.push_back({std::string("angvel.") + axes[i],
                   [i](const EnvState& s) { return s.base_ang_vel(i); },
                   [i](EnvState& s, double v) { s.base_ang_vel(i) = v; }});
    }
    c.push_back({"heading", [](const EnvState& s) { return s.heading; },
                 [](EnvState& s, double v) { s.heading = v; }});
    auto joints = [&c](const std::string& prefix, JointVector EnvState::*m) {
      for (int j = 0; j < kNumJoints; ++j) {
        c.push_back({prefix + joint_name(j), [j, m](const EnvState& s) { return (s.*m)[j]; },
                     [j, m](EnvState& s, double v) { (s.*m)[j] = v; }});
      }
    };
    joints("q.", &EnvState::q);
    joints("qd.", &EnvState::qd);
    joints("tau.", &EnvState::torques);
    for (std::size_t f = 0; f < 4; ++f) {
      const std::string leg(leg_name(static_cast<Leg>(f)));
      c.push_back({"contact." + leg, [f](const EnvState& s) { return s.foot_contacts[f] ? 1.0 : 0.0; },
                   [f](EnvState& s, double v) { s.foot_contacts[f] = v != 0.0; }});
    }
    for (std::size_t f = 0; f < 4; ++f) {
      const std::string leg(leg_name(static_cast<Leg>(f)));
      c.push_back({"foot_height." + leg, [f](const EnvState& s) { return s.foot_heights[f]; },
                   [f](EnvState& s, double v) { s.foot_heights[f] = v; }});
    }
    for (std::size_t f = 0; f < 4; ++f) {
      const std::string leg(leg_name(static_cast<Leg>(f)));
      for (int i = 0; i < 3; ++i) {
        c.push_back({"foot_vel." + leg + "." + axes[i],
                     [f, i](const EnvState& s) { return s.foot_velocities[f](i); },
                     [f, i](EnvState& s, double v) { s.foot_velocities[f](i) = v; }});
      }
    }
    c.push_back({"non_foot_collision",
                 [](const EnvState& s) { return s.non_foot_collision ? 1.0 : 0.0; },
                 [](EnvState& s, double v) { s.non_foot_collision = v != 0.0; }});
    joints("action.", &EnvState::action);
    joints("prev_action.", &EnvState::prev_action);
    c.push_back({"step", [](const EnvState& s) { return static_cast<double>(s.step); },
                 [](EnvState& s, double v) { s.step = static_cast<int>(v); }});
    c.push_back({"target.v_x", [](const EnvState& s) { return s.target.v_x; },
                 [](EnvState& s, double v) { s.target.v_x = v; }});
    c.push_back({"target.v_y", [](const EnvState& s) { return s.target.v_y; },
                 [](EnvState& s, double v) { s.target.v_y = v; }});
    c.push_back({"target.heading_des", [](const EnvState& s) { return s.target.heading_des; },
                 [](EnvState& s, double v) { s.target.heading_des = v; }});
    c.push_back({"target.yaw_rate_obs", [](const EnvState& s) { return s.target.yaw_rate_obs; },
                 [](EnvState& s, double v) { s.target.yaw_rate_obs = v; }});
    for (std::size_t side = 0; side < 2; ++side) {
      const std::string leg = side == 0 ? "fl" : "fr";
      for (int i = 0; i < 3; ++i) {
        c.push_back({"target." + leg + "_" + axes[i],
                     [side, i](const EnvState& s) { return s.target.toe_des[side](i); },
                     [side, i](EnvState& s, double v) { s.target.toe_des[side](i) = v; }});
      }
    }
    return c;
  }();
  return cols;
}

}  // namespace

std::vector<std::string> env_state_columns() {
  std::vector<std::string> names;
  for (const auto& c : state_columns()) names.push_back(c.name);
  return names;
}

std::vector<double> env_state_row(const EnvState& s) {
  std::vector<double> row;
  for (const auto& c : state_columns()) row.push_back(c.get(s));
  return row;
}

EnvState env_state_from_row(const CsvTable& table, std::size_t row) {
  EnvState s;
  for (const auto& c : state_columns()) {
    if (auto idx = table.find_column(c.name)) c.set(s, table.rows.at(row)[*idx]);
  }
  for (const auto& name : table.header) {
    bool known = false;
    for (const auto& c : state_columns()) known = known || c.name == name;
    if (!known) throw ParseError("unknown state column '" + name + "'", 1, 1);
  }
  s.base.validate();
  if (s.step < 0) throw ValidationError("state row " + std::to_string(row + 1) + ": negative step");
  return s;
}

}  // namespace bipedkit
