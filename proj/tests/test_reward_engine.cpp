#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "bipedkit/reward_engine.hpp"
#include "support/random_states.hpp"

using namespace bipedkit;

namespace {

const RobotModel& model() { return RobotModel::standin(); }

EnvState quiet_state() {
  EnvState s;
  s.q = model().nominal_quadrupedal_pose;
  s.action = s.prev_action = s.q;
  return s;
}

EnvState lying_state(const RewardConfig& cfg) {
  EnvState s = quiet_state();
  s.base.position.z() = 0.1 * cfg.target_height;
  return s;
}

// Scoring oracle for the sit-down preset, written from the formula.
double sitdown_oracle(const EnvState& s, const RewardConfig& cfg) {
  const Eigen::Matrix3d R = s.base.orientation.toRotationMatrix();
  double d2 = 0;
  for (int j = 0; j < 12; ++j) {
    const double d = s.q[j] - model().nominal_quadrupedal_pose[j];
    d2 += d * d;
  }
  return cfg.sitdown_belly_weight * (R(2, 2) + 1) / 2 +
         cfg.sitdown_pose_weight * std::exp(-d2 / cfg.sitdown_pose_sigma);
}

}  // namespace

TEST_CASE("reward config file round-trips and rejects bad values") {
  RewardConfig cfg;
  cfg.scale_mode = ScaleMode::ConstantOne;
  cfg.gait_weight = 0.0;
  const auto back = RewardConfig::parse(cfg.serialize());
  CHECK(back.serialize() == cfg.serialize());

  const auto shipped = RewardConfig::load(std::string(BIPEDKIT_ASSET_DIR) + "/config/reward.cfg");
  CHECK(shipped.serialize() == RewardConfig{}.serialize());

  CHECK_THROWS_AS(RewardConfig::parse("sigma = [0.25, 0, 0.04]\n"), ValidationError);
  CHECK_THROWS_AS(RewardConfig::parse("scale.mode = sometimes\n"), ValidationError);
  CHECK_THROWS_AS(RewardConfig::parse("bogus.key = 1\n"), ParseError);
  CHECK(RewardConfig{}.swing_height == 0.05);
}

TEST_CASE("stand reward") {
  RewardConfig cfg;
  Rng rng(1);
  SUBCASE("upright at H_up is maximal") {
    EnvState s = support::upright_state(rng, model(), cfg.target_height, 0.0);
    s.foot_contacts = {false, false, true, true};
    s.non_foot_collision = false;
    const auto t = stand_reward(s, cfg);
    CHECK(t.height == cfg.height_weight);
    CHECK(t.pitch == cfg.pitch_weight);
    CHECK(t.collision == 0.0);
  }
  SUBCASE("lying pose is low") {
    const auto t = stand_reward(lying_state(cfg), cfg);
    CHECK(t.height <= 0.2 * cfg.height_weight);
  }
  SUBCASE("front toe contact is penalised") {
    EnvState s = quiet_state();
    s.foot_contacts = {true, false, true, true};
    CHECK(stand_reward(s, cfg).collision == -cfg.collision_weight);
    s.foot_contacts = {false, false, true, true};
    CHECK(stand_reward(s, cfg).collision == 0.0);
    s.non_foot_collision = true;
    CHECK(stand_reward(s, cfg).collision == -cfg.collision_weight);
  }
  SUBCASE("height term is monotone and saturates") {
    EnvState s = quiet_state();
    double prev = -1;
    for (int i = 0; i <= 100; ++i) {
      s.base.position.z() = 0.006 * i;
      const double h = stand_reward(s, cfg).height;
      CHECK(h >= prev);
      prev = h;
    }
    CHECK(prev == cfg.height_weight);
  }
}

TEST_CASE("dynamic scale") {
  RewardConfig cfg;
  Rng rng(2);
  CHECK(dynamic_scale(lying_state(cfg), cfg) <= 0.05);
  for (int i = 0; i < 200; ++i) {
    const double z = uniform(rng, cfg.target_height, 0.6);
    const double tilt = uniform(rng, 0.0, cfg.upright_band);
    CHECK(dynamic_scale(support::upright_state(rng, model(), z, tilt), cfg) == 1.0);
  }
  CHECK(dynamic_scale(support::upright_state(rng, model(), 0.99 * cfg.target_height, 0.0), cfg) <
        1.0);
  CHECK(dynamic_scale(support::upright_state(rng, model(), cfg.target_height, 0.2), cfg) < 1.0);

  RewardConfig constant = cfg;
  constant.scale_mode = ScaleMode::ConstantOne;
  for (int i = 0; i < 100; ++i) {
    CHECK(dynamic_scale(support::random_state(rng, model()), constant) == 1.0);
  }

  // Dominance: higher (capped) and more upright never lowers c.
  for (int i = 0; i < 2000; ++i) {
    const double za = uniform(rng, 0, 0.5), zb = uniform(rng, 0, 0.5);
    const double ta = uniform(rng, 0, kPi), tb = uniform(rng, 0, kPi);
    const EnvState a = support::upright_state(rng, model(), za, ta);
    const EnvState b = support::upright_state(rng, model(), zb, tb);
    const bool dominates = std::min(za, cfg.target_height) >= std::min(zb, cfg.target_height) &&
                           upright_tilt(a.base) <= upright_tilt(b.base);
    if (dominates) CHECK(dynamic_scale(a, cfg) >= dynamic_scale(b, cfg));
  }
}

TEST_CASE("tracking reward") {
  RewardConfig cfg;
  cfg.scale_mode = ScaleMode::ConstantOne;
  EnvState s = quiet_state();
  s.target.toe_des = {forward_kinematics_toe(model(), Leg::FL, s.q.leg(Leg::FL)),
                      forward_kinematics_toe(model(), Leg::FR, s.q.leg(Leg::FR))};
  auto t = tracking_reward(s, cfg, model());
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(t.e[i] == 0.0);
    CHECK(t.terms[i] == cfg.alpha[i]);
  }

  // e = sigma gives alpha / e.
  s.target.v_x = std::sqrt(cfg.sigma[0]);
  s.target.heading_des = std::sqrt(cfg.sigma[1]);
  s.target.toe_des[0].x() += std::sqrt(cfg.sigma[2]);
  t = tracking_reward(s, cfg, model());
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(t.e[i] == doctest::Approx(cfg.sigma[i]).epsilon(1e-12));
    CHECK(t.terms[i] == doctest::Approx(cfg.alpha[i] / std::exp(1.0)).epsilon(1e-12));
  }

  SUBCASE("velocity error is measured in the heading frame") {
    EnvState r = quiet_state();
    r.heading = kPi / 2;
    r.base_lin_vel = Vec3(0.0, 0.2, 0.0);  // moving forward along world +y
    r.target.v_x = 0.2;
    CHECK(tracking_errors(r, cfg, model())[0] == doctest::Approx(0.0).epsilon(1e-15));
  }

  SUBCASE("lying robot tracking perfectly is suppressed") {
    RewardConfig dyn;
    EnvState lie = lying_state(dyn);
    lie.target.toe_des = s.target.toe_des;
    lie.target.toe_des[0] = forward_kinematics_toe(model(), Leg::FL, lie.q.leg(Leg::FL));
    lie.target.v_x = 0;
    lie.target.heading_des = 0;
    const auto lt = tracking_reward(lie, dyn, model());
    for (std::size_t i = 0; i < 3; ++i) CHECK(lt.terms[i] <= 0.05 * dyn.alpha[i]);
  }
}

TEST_CASE("regularization") {
  RewardConfig cfg;
  EnvState s = quiet_state();
  s.step = 7;
  const auto ref = gait_reference(s.step, cfg);
  s.foot_heights[2] = ref[0];
  s.foot_heights[3] = ref[1];
  auto r = regularization_reward(s, cfg, model());
  CHECK(r.joint_motion == 0.0);
  CHECK(r.limit == 0.0);
  CHECK(r.torque == 0.0);
  CHECK(r.action_rate == 0.0);
  CHECK(r.gait == 0.0);
  CHECK(r.slip == 0.0);

  SUBCASE("slip") {
    s.foot_contacts[2] = true;
    s.foot_velocities[2] = Vec3(0.2, 0.0, 0.0);
    CHECK(regularization_reward(s, cfg, model()).slip ==
          doctest::Approx(-cfg.slip_weight * 0.04).epsilon(1e-12));
    s.foot_contacts[2] = false;
    CHECK(regularization_reward(s, cfg, model()).slip == 0.0);
  }
  SUBCASE("rear feet glued mid-swing") {
    // A quarter period in: RL is at the top of its swing.
    cfg.gait_period = 0.4;
    s.step = 5;
    s.foot_heights[2] = s.foot_heights[3] = 0.0;
    const auto g = gait_reference(s.step, cfg);
    CHECK(g[0] == doctest::Approx(cfg.swing_height));
    CHECK(g[1] == 0.0);
    CHECK(regularization_reward(s, cfg, model()).gait < 0.0);
  }
  SUBCASE("action rate") {
    s.action[4] += 0.3;
    CHECK(regularization_reward(s, cfg, model()).action_rate ==
          doctest::Approx(-cfg.action_rate_weight * 0.09));
  }
  SUBCASE("hinge shaping ignores small motions") {
    RewardConfig h = cfg;
    h.joint_motion_shaping = Shaping::Hinge;
    h.torque_shaping = Shaping::Hinge;
    s.qd[0] = 1.0;
    s.torques[0] = 2.0;
    r = regularization_reward(s, h, model());
    CHECK(r.joint_motion == 0.0);
    CHECK(r.torque == 0.0);
    s.qd[0] = h.joint_motion_threshold + 1.0;
    CHECK(regularization_reward(s, h, model()).joint_motion == doctest::Approx(-h.joint_motion_weight));
  }
  SUBCASE("every term is non-positive") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
      const auto t = regularization_reward(support::random_state(rng, model()), cfg, model());
      CHECK(t.joint_motion <= 0);
      CHECK(t.limit <= 0);
      CHECK(t.torque <= 0);
      CHECK(t.action_rate <= 0);
      CHECK(t.gait <= 0);
      CHECK(t.slip <= 0);
    }
  }
}

TEST_CASE("total reward and invariants on random states") {
  RewardConfig cfg;
  Rng rng(4);
  std::vector<double> tracking, tracking_scaled;
  RewardConfig scaled = cfg;
  for (auto& a : scaled.alpha) a *= 3.7;
  for (int i = 0; i < 10000; ++i) {
    const EnvState s = support::random_state(rng, model());
    const auto b = total_reward(s, cfg, model());
    CHECK(std::abs(b.total - b.sum_of_terms()) <= 1e-12);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(b.c[k] >= 0.0);
      CHECK(b.c[k] <= 1.0);
    }
    CHECK(b.track_base_v >= 0.0);
    CHECK(b.track_base_v <= cfg.alpha[0]);
    CHECK(b.track_hand <= cfg.alpha[2]);
    const auto bs = total_reward(s, scaled, model());
    CHECK(bs.track_hand == doctest::Approx(3.7 * b.track_hand).epsilon(1e-12));
    tracking.push_back(b.track_base_v + b.track_heading + b.track_hand);
    tracking_scaled.push_back(bs.track_base_v + bs.track_heading + bs.track_hand);
  }
  std::vector<std::size_t> oa(tracking.size()), ob(tracking.size());
  std::iota(oa.begin(), oa.end(), 0);
  std::iota(ob.begin(), ob.end(), 0);
  std::stable_sort(oa.begin(), oa.end(), [&](auto x, auto y) { return tracking[x] < tracking[y]; });
  std::stable_sort(ob.begin(), ob.end(),
                   [&](auto x, auto y) { return tracking_scaled[x] < tracking_scaled[y]; });
  CHECK(oa == ob);
}

TEST_CASE("sit-down preset") {
  RewardConfig cfg;
  EnvState stance = quiet_state();
  const double best = sitdown_reward(stance, cfg, model());
  CHECK(best == doctest::Approx(cfg.sitdown_belly_weight + cfg.sitdown_pose_weight));

  Rng rng(5);
  EnvState upright = support::upright_state(rng, model(), cfg.target_height, 0.0);
  upright.q = model().nominal_quadrupedal_pose;
  CHECK(sitdown_reward(upright, cfg, model()) < best);

  std::vector<EnvState> poses;
  for (int i = 0; i < 10; ++i) poses.push_back(support::random_state(rng, model()));
  std::vector<std::size_t> a(10), b(10);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 0);
  std::sort(a.begin(), a.end(), [&](auto x, auto y) {
    return sitdown_reward(poses[x], cfg, model()) < sitdown_reward(poses[y], cfg, model());
  });
  std::sort(b.begin(), b.end(),
            [&](auto x, auto y) { return sitdown_oracle(poses[x], cfg) < sitdown_oracle(poses[y], cfg); });
  CHECK(a == b);
}

TEST_CASE("termination") {
  RewardConfig cfg;
  EnvState s = quiet_state();
  s.non_foot_collision = true;
  s.step = 10;
  CHECK_FALSE(check_termination(s, cfg, model()).done);
  s.step = 30;
  CHECK_FALSE(check_termination(s, cfg, model()).done);
  s.step = 31;
  auto v = check_termination(s, cfg, model());
  CHECK(v.done);
  CHECK(v.reason == TerminationReason::Collision);

  EnvState clean = quiet_state();
  clean.step = 999;
  CHECK_FALSE(check_termination(clean, cfg, model()).done);
  for (int step : {1000, 1001, 5000}) {
    clean.step = step;
    v = check_termination(clean, cfg, model());
    CHECK(v.done);
    CHECK(v.reason == TerminationReason::Timeout);
  }

  EnvState lim = quiet_state();
  lim.q[7] = model().limit(7).max;
  lim.step = 5;
  v = check_termination(lim, cfg, model());
  CHECK(v.reason == TerminationReason::JointLimit);
  lim.non_foot_collision = true;
  lim.step = 1000;
  CHECK(check_termination(lim, cfg, model()).reason == TerminationReason::Collision);
  lim.non_foot_collision = false;
  CHECK(check_termination(lim, cfg, model()).reason == TerminationReason::JointLimit);
}

TEST_CASE("state CSV codec round-trips") {
  Rng rng(6);
  CsvTable t;
  t.header = env_state_columns();
  std::vector<EnvState> states;
  for (int i = 0; i < 20; ++i) {
    states.push_back(support::random_state(rng, model()));
    t.rows.push_back(env_state_row(states.back()));
  }
  const auto parsed = parse_csv(to_csv(t));
  for (std::size_t i = 0; i < states.size(); ++i) {
    const EnvState back = env_state_from_row(parsed, i);
    CHECK(env_state_row(back) == env_state_row(states[i]));
  }
  CsvTable partial;
  partial.header = {"base.z", "step"};
  partial.rows = {{0.3, 12}};
  const EnvState p = env_state_from_row(partial, 0);
  CHECK(p.base.position.z() == 0.3);
  CHECK(p.step == 12);
  partial.header[1] = "stepp";
  CHECK_THROWS_AS(env_state_from_row(partial, 0), ParseError);
}
