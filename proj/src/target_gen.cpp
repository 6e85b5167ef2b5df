#include "bipedkit/target_gen.hpp"

#include <climits>
#include <cmath>

namespace bipedkit {

namespace {

constexpr long kNoIndex = LONG_MIN;

long period_index(double t, double phase, double period) {
  return static_cast<long>(std::floor((t - phase) / period + 1e-9));
}

}  // namespace

void CurriculumConfig::validate() const {
  if (!(vel_resample_period > 0 && heading_resample_period > 0 && hand_goal_period > 0)) {
    throw ValidationError("curriculum: periods must be positive");
  }
  if (vel_bins.empty()) throw ValidationError("curriculum: no velocity bins");
  for (std::size_t i = 0; i < vel_bins.size(); ++i) {
    if (std::abs(vel_bins[i] + vel_bins[vel_bins.size() - 1 - i]) > 1e-12) {
      throw ValidationError("curriculum: velocity bins must be symmetric about 0");
    }
  }
  if (!vel_bin_weights.empty()) {
    if (vel_bin_weights.size() != vel_bins.size()) {
      throw ValidationError("curriculum: one weight per velocity bin required");
    }
    double total = 0.0;
    for (double w : vel_bin_weights) {
      if (!(w >= 0)) throw ValidationError("curriculum: bin weights must be non-negative");
      total += w;
    }
    if (!(total > 0)) throw ValidationError("curriculum: bin weights sum to zero");
  }
  if (!(heading_offset_min <= heading_offset_max)) {
    throw ValidationError("curriculum: heading offset range is inverted");
  }
  if (!(yaw_rate_gain >= 0 && yaw_rate_max > 0)) {
    throw ValidationError("curriculum: yaw-rate gain must be >= 0 and max rate > 0");
  }
  if (segment_checkpoints < 0) throw ValidationError("curriculum: negative checkpoint count");
}

double sample_velocity(Rng& rng, const CurriculumConfig& config) {
  if (config.vel_bin_weights.empty()) {
    return config.vel_bins[uniform_index(rng, config.vel_bins.size())];
  }
  double total = 0.0;
  for (double w : config.vel_bin_weights) total += w;
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < config.vel_bins.size(); ++i) {
    u -= config.vel_bin_weights[i];
    if (u < 0) return config.vel_bins[i];
  }
  return config.vel_bins.back();
}

double sample_heading(double current_heading, Rng& rng, const CurriculumConfig& config) {
  return wrap_angle(current_heading +
                    uniform(rng, config.heading_offset_min, config.heading_offset_max));
}

double yaw_rate_observation(double current_heading, double heading_des,
                            const CurriculumConfig& config) {
  const double rate = config.yaw_rate_gain * wrap_angle(heading_des - current_heading);
  return clamp(rate, -config.yaw_rate_max, config.yaw_rate_max);
}

std::array<Vec3, 2> interpolate_toe_targets(const std::array<Vec3, 2>& prev_goal,
                                            const std::array<Vec3, 2>& next_goal, double t,
                                            double duration) {
  if (!(duration > 0) || !(t >= 0.0 && t <= duration)) {
    throw InputError("interpolate_toe_targets: t outside [0, duration]");
  }
  if (t == duration) return next_goal;
  const double s = t / duration;
  return {prev_goal[0] + s * (next_goal[0] - prev_goal[0]),
          prev_goal[1] + s * (next_goal[1] - prev_goal[1])};
}

bool toe_reachable(const RobotModel& model, Leg leg, const Vec3& point, double tol) {
  return project_to_workspace(model, leg, point).distance <= tol;
}

CurriculumGenerator::CurriculumGenerator(const RobotModel& model, CurriculumConfig config,
                                         std::uint64_t seed)
    : model_(model),
      config_(std::move(config)),
      vel_rng_(derive_seed(seed, "curriculum.velocity")),
      heading_rng_(derive_seed(seed, "curriculum.heading")),
      toe_rng_{Rng(derive_seed(seed, "curriculum.toe.FL")),
               Rng(derive_seed(seed, "curriculum.toe.FR"))} {
  config_.validate();
  vel_index_ = heading_index_ = hand_index_ = kNoIndex;
  for (std::size_t s = 0; s < 2; ++s) {
    next_[s] = sample_reachable_toe_goal(model_, kFrontLegs[s], toe_rng_[s]);
    prev_[s] = next_[s];
  }
}

ReachableGoal CurriculumGenerator::draw_goal(std::size_t side, const Vec3& from) {
  const Leg leg = kFrontLegs[side];
  const int checks = config_.segment_checkpoints;
  for (int attempt = 0; attempt < 64; ++attempt) {
    ReachableGoal goal = sample_reachable_toe_goal(model_, leg, toe_rng_[side]);
    bool ok = true;
    for (int c = 1; c < checks && ok; ++c) {
      const double s = static_cast<double>(c) / checks;
      ok = toe_reachable(model_, leg, from + s * (goal.position - from), 1e-9);
    }
    if (ok) return goal;
  }
  // Degenerate segment: hold the previous goal.
  return next_[side];
}

MotionTarget CurriculumGenerator::step(double t, double current_heading) {
  if (t < last_t_) throw InputError("curriculum: clock must be non-decreasing");
  last_t_ = t;

  const long vi = period_index(t, config_.vel_phase, config_.vel_resample_period);
  if (vi >= 0 && vi != vel_index_) {
    vel_index_ = vi;
    v_x_ = sample_velocity(vel_rng_, config_);
    events_.push_back({ResampleEvent::Kind::Velocity, t, v_x_, 0.0});
  }

  const long hi = period_index(t, config_.heading_phase, config_.heading_resample_period);
  if (heading_index_ == kNoIndex && hi < 0) heading_des_ = current_heading;
  if (hi >= 0 && hi != heading_index_) {
    heading_index_ = hi;
    heading_des_ = sample_heading(current_heading, heading_rng_, config_);
    events_.push_back({ResampleEvent::Kind::Heading, t, heading_des_,
                       wrap_angle(heading_des_ - current_heading)});
  }

  const long ti = period_index(t, config_.hand_phase, config_.hand_goal_period);
  if (ti >= 0 && ti != hand_index_) {
    hand_index_ = ti;
    for (std::size_t s = 0; s < 2; ++s) {
      prev_[s] = next_[s];
      next_[s] = draw_goal(s, prev_[s].position);
    }
    events_.push_back({ResampleEvent::Kind::ToeGoal, t, 0.0, 0.0});
  }

  MotionTarget target;
  target.v_x = v_x_;
  target.v_y = 0.0;
  target.heading_des = heading_des_;
  target.yaw_rate_obs = yaw_rate_observation(current_heading, heading_des_, config_);
  if (hand_index_ == kNoIndex) {
    target.toe_des = {next_[0].position, next_[1].position};
  } else {
    const double start = config_.hand_phase + hand_index_ * config_.hand_goal_period;
    const double u = clamp(t - start, 0.0, config_.hand_goal_period);
    target.toe_des = interpolate_toe_targets({prev_[0].position, prev_[1].position},
                                             {next_[0].position, next_[1].position}, u,
                                             config_.hand_goal_period);
  }
  return target;
}

std::size_t CurriculumGenerator::count(ResampleEvent::Kind kind) const {
  std::size_t n = 0;
  for (const auto& e : events_) n += e.kind == kind;
  return n;
}

TargetTrack generate_curriculum(const RobotModel& model, const CurriculumConfig& config,
                                std::uint64_t seed, double duration, double dt) {
  if (!(duration > 0 && dt > 0)) throw InputError("curriculum: duration and dt must be positive");
  CurriculumGenerator gen(model, config, seed);
  TargetTrack track;
  double heading = 0.0;
  const auto steps = static_cast<long>(std::floor(duration / dt + 1e-9));
  for (long k = 0; k < steps; ++k) {
    const double t = k * dt;
    TargetRow row;
    row.t = t;
    row.target = gen.step(t, heading);
    row.source = static_cast<int>(gen.count(ResampleEvent::Kind::ToeGoal)) - 1;
    track.rows.push_back(row);
    heading = wrap_angle(heading + row.target.yaw_rate_obs * dt);
  }
  return track;
}

CurriculumConfig load_curriculum_config(const std::filesystem::path& path) {
  auto kv = KeyValueFile::load(path);
  CurriculumConfig c;
  c.vel_resample_period = kv.number_or("vel_resample_period", c.vel_resample_period);
  c.heading_resample_period = kv.number_or("heading_resample_period", c.heading_resample_period);
  c.hand_goal_period = kv.number_or("hand_goal_period", c.hand_goal_period);
  if (kv.has("vel_bins")) c.vel_bins = kv.list("vel_bins");
  if (kv.has("vel_bin_weights")) c.vel_bin_weights = kv.list("vel_bin_weights");
  if (kv.has("heading_offset_range")) {
    auto r = kv.list("heading_offset_range", 2);
    c.heading_offset_min = r[0];
    c.heading_offset_max = r[1];
  }
  c.yaw_rate_gain = kv.number_or("yaw_rate_gain", c.yaw_rate_gain);
  c.yaw_rate_max = kv.number_or("yaw_rate_max", c.yaw_rate_max);
  c.vel_phase = kv.number_or("vel_phase", c.vel_phase);
  c.heading_phase = kv.number_or("heading_phase", c.heading_phase);
  c.hand_phase = kv.number_or("hand_phase", c.hand_phase);
  c.segment_checkpoints =
      static_cast<int>(kv.number_or("segment_checkpoints", c.segment_checkpoints));
  kv.reject_unused();
  c.validate();
  return c;
}

}  // namespace bipedkit
