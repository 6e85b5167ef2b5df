// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only N]... [--record-only]
//
// Exit status is the number of failed criteria unless --record-only is given,
// in which case it is 0 whenever every criterion ran to a verdict.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bipedkit/calibration.hpp"
#include "bipedkit/instruct.hpp"
#include "bipedkit/parallel.hpp"
#include "bipedkit/planar_env.hpp"
#include "bipedkit/retarget.hpp"
#include "bipedkit/reward_engine.hpp"
#include "bipedkit/target_gen.hpp"
#include "oracles/fk_oracle.hpp"
#include "support/random_states.hpp"

using namespace bipedkit;

namespace {

const RobotModel& model() { return RobotModel::standin(); }
const std::filesystem::path kAssets = BIPEDKIT_ASSET_DIR;
const std::filesystem::path kTestData = BIPEDKIT_TEST_DATA;

/// Counts failed checks and keeps the first few messages.
class Checks {
 public:
  void require(bool ok, const std::string& what) {
    ++total_;
    if (ok) return;
    ++failed_;
    if (messages_.size() < 3) messages_.push_back(what);
  }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::ostringstream s;
    s << total_ - failed_ << "/" << total_ << " checks";
    for (const auto& m : messages_) s << "; " << m;
    return s.str();
  }

 private:
  long total_ = 0, failed_ = 0;
  std::vector<std::string> messages_;
};

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::array<double, 3> arr(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

SimParams hidden_truth() {
  SimParams xi;
  xi.joint_friction = 0.055;
  xi.joint_damping = 0.04;
  xi.delay = 0.015;
  return xi;
}

const CalibrationDataset& calibration_dataset() {
  static const CalibrationDataset data =
      synthesize_dataset(model(), hidden_truth(), ProbeConfig{}, 0.002, 7);
  return data;
}

// ---------------------------------------------------------------------------

Verdict calibration_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& data = calibration_dataset();
  SweepConfig cfg;
  cfg.candidates = 2048;
  cfg.workers = default_workers();
  const auto report = sweep(model(), data, cfg);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double at_truth = discrepancy(model(), hidden_truth(), data);
  const bool pass = report.best_error <= 1.05 * at_truth &&
                    std::abs(report.best.joint_friction - 0.055) <= 0.02 &&
                    std::abs(report.best.delay - 0.015) <= 0.005 && secs <= 300;
  return {pass, fmt("best/truth error %.4f, friction %.4f, delay %.4f s, %.0f s", report.best_error / at_truth,
                    report.best.joint_friction, report.best.delay, secs)};
}

Verdict friction_profile_shape() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto grid = parse_grid("0:0.2:0.01");
  const auto prof = error_profile(model(), calibration_dataset(), CalibParam::JointFriction, grid,
                                  hidden_truth(), {}, default_workers());
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto best = static_cast<std::size_t>(
      std::min_element(prof.begin(), prof.end(),
                       [](const auto& a, const auto& b) { return a.error < b.error; }) -
      prof.begin());
  bool quasi_convex = true;
  for (std::size_t i = 0; i + 1 < prof.size(); ++i) {
    if (i < best && prof[i].error < prof[i + 1].error) quasi_convex = false;
    if (i >= best && prof[i].error > prof[i + 1].error) quasi_convex = false;
  }
  const double lo = prof.front().error / prof[best].error;
  const double hi = prof.back().error / prof[best].error;
  const bool pass = quasi_convex && lo >= 2.0 && hi >= 2.0 && secs <= 120;
  return {pass, fmt("min at %.2f, quasi-convex %.0f, endpoint ratios %.3f and %.3f", prof[best].value,
                    quasi_convex ? 1.0 : 0.0, lo, hi) +
                    fmt(", %.0f s", secs)};
}

Verdict reward_invariants() {
  Checks c;
  const RewardConfig cfg;
  RewardConfig scaled = cfg;
  for (auto& a : scaled.alpha) a *= 2.5;
  Rng rng(derive_seed(2026, "acceptance.reward"));
  std::vector<double> tracking, tracking_scaled;
  int on_upright_set = 0;
  for (int i = 0; i < 10000; ++i) {
    EnvState s = support::random_state(rng, model());
    // A quarter of the states are drawn near or on the upright set.
    if (i % 4 == 0) {
      s = support::upright_state(rng, model(), uniform(rng, 0.9, 1.2) * cfg.target_height,
                                 uniform(rng, 0.0, 1.5 * cfg.upright_band));
    }
    const auto b = total_reward(s, cfg, model());
    const double parts = b.height + b.pitch + b.collision + b.track_base_v + b.track_heading +
                         b.track_hand + b.reg_joint_motion + b.reg_limit + b.reg_torque +
                         b.reg_action_rate + b.reg_gait + b.reg_slip;
    c.require(std::abs(b.total - parts) <= 1e-12, "total != sum of parts");

    const Vec3 x_axis = s.base.orientation.toRotationMatrix().col(0);
    const double tilt = std::acos(std::clamp(x_axis.z(), -1.0, 1.0));
    const bool upright = s.base.position.z() >= cfg.target_height && tilt <= cfg.upright_band;
    on_upright_set += upright;
    const double scale = dynamic_scale(s, cfg);
    c.require(scale >= 0.0 && scale <= 1.0, "c outside [0, 1]");
    c.require((scale == 1.0) == upright, "c == 1 disagrees with the upright set");

    const auto t = tracking_reward(s, cfg, model());
    for (std::size_t k = 0; k < 3; ++k) {
      c.require(t.c[k] == scale, "per-term c differs");
      c.require(t.terms[k] >= 0.0 && t.terms[k] <= cfg.alpha[k], "tracking term outside [0, alpha]");
    }

    // Push each tracking error up with c unchanged.
    EnvState worse = s;
    const double ch = std::cos(s.heading), sh = std::sin(s.heading);
    const double vx = ch * s.base_lin_vel.x() + sh * s.base_lin_vel.y();
    worse.target.v_x += (s.target.v_x >= vx ? 0.1 : -0.1);
    const double d = wrap_angle(s.target.heading_des - s.heading);
    const bool heading_room = std::abs(d) < kPi - 0.2;
    if (heading_room) worse.target.heading_des += (d >= 0 ? 0.1 : -0.1);
    const auto o = oracle::toe(model(), Leg::FL, s.q.leg(Leg::FL));
    const Vec3 toe(o[0], o[1], o[2]);
    Vec3 away = s.target.toe_des[0] - toe;
    away = away.norm() > 1e-9 ? away.normalized() : Vec3::UnitX();
    worse.target.toe_des[0] += 0.02 * away;
    const auto tw = tracking_reward(worse, cfg, model());
    c.require(tw.c[0] == scale, "c moved with the target");
    for (std::size_t k = 0; k < 3; ++k) {
      if (k == 1 && !heading_room) continue;
      c.require(tw.e[k] > t.e[k], "perturbation did not raise the error");
      if (scale > 0.0) c.require(tw.terms[k] < t.terms[k], "tracking term not decreasing in e");
    }

    const auto bs = total_reward(s, scaled, model());
    tracking.push_back(b.track_base_v + b.track_heading + b.track_hand);
    tracking_scaled.push_back(bs.track_base_v + bs.track_heading + bs.track_hand);
  }
  bool ordering = true;
  for (std::size_t i = 0; i + 1 < tracking.size(); ++i) {
    for (std::size_t j : {i + 1, (i * 7919) % tracking.size()}) {
      const double a = tracking[i] - tracking[j], b = tracking_scaled[i] - tracking_scaled[j];
      if (std::abs(a) > 1e-12 && a * b <= 0.0) ordering = false;
    }
  }
  c.require(ordering, "rescaling alpha changed the ordering");
  c.require(on_upright_set > 100, "too few upright states sampled");
  return {c.ok(), c.summary()};
}

Verdict termination_table() {
  Checks c;
  const RewardConfig cfg;
  const int grace = cfg.collision_grace_steps, horizon = cfg.max_steps;
  const std::vector<int> steps = {0, 1, grace - 1, grace, grace + 1, grace + 2, horizon - 1,
                                  horizon, horizon + 1};
  // Joint conditions: inside, exactly at a limit, beyond a limit, on either end.
  const int j = joint_index(Leg::RL, JointKind::Calf);
  const auto& lim = model().limit(j);
  const std::vector<std::pair<std::string, double>> joints = {
      {"inside", 0.5 * (lim.min + lim.max)}, {"at max", lim.max}, {"at min", lim.min},
      {"beyond max", lim.max + 0.1},         {"beyond min", lim.min - 0.1}};
  long cases = 0;
  for (int step : steps) {
    for (bool collision : {false, true}) {
      for (const auto& [label, value] : joints) {
        EnvState s;
        s.q = model().nominal_quadrupedal_pose;
        s.q[j] = value;
        s.step = step;
        s.non_foot_collision = collision;
        TerminationReason expected = TerminationReason::None;
        if (collision && step > grace) {
          expected = TerminationReason::Collision;
        } else if (label != "inside") {
          expected = TerminationReason::JointLimit;
        } else if (step >= horizon) {
          expected = TerminationReason::Timeout;
        }
        const auto v = check_termination(s, cfg, model());
        c.require(v.done == (expected != TerminationReason::None) && v.reason == expected,
                  "step " + std::to_string(step) + (collision ? " collision " : " ") + label +
                      ": got " + std::string(termination_name(v.reason)));
        ++cases;
      }
    }
  }
  // The named rows of the table.
  EnvState s;
  s.q = model().nominal_quadrupedal_pose;
  s.non_foot_collision = true;
  s.step = 30;
  c.require(!check_termination(s, cfg, model()).done, "collision at step 30 ended the episode");
  s.step = 31;
  c.require(check_termination(s, cfg, model()).reason == TerminationReason::Collision,
            "collision at step 31 not reported");
  s.non_foot_collision = false;
  s.step = 1000;
  c.require(check_termination(s, cfg, model()).reason == TerminationReason::Timeout,
            "step 1000 not a timeout");
  return {c.ok(), std::to_string(cases) + " constructed cases, " + c.summary()};
}

Verdict kinematics_oracle() {
  Checks c;
  Rng rng(derive_seed(2026, "acceptance.fk"));
  double worst = 0.0, worst_preimage = 0.0;
  for (Leg leg : kFrontLegs) {
    const auto& lim = model().leg(leg).limits;
    for (int i = 0; i < 1000; ++i) {
      LegAngles q;
      for (std::size_t k = 0; k < 3; ++k) q[k] = uniform(rng, lim[k].min, lim[k].max);
      const auto o = oracle::toe(model(), leg, q);
      worst = std::max(worst, oracle::dist(arr(forward_kinematics_toe(model(), leg, q)), o));
    }
    for (int i = 0; i < 200; ++i) {
      const auto goal = sample_reachable_toe_goal(model(), leg, rng);
      const double r = oracle::preimage_residual(model(), leg, arr(goal.position),
                                                 static_cast<unsigned>(1000 + i));
      worst_preimage = std::max(worst_preimage, r);
    }
  }
  c.require(worst <= 1e-9, "FK differs from the oracle");
  c.require(worst_preimage <= 1e-6, "sampled goal without a recovered preimage");
  return {c.ok(), fmt("max FK gap %.2e m, max preimage residual %.2e m", worst, worst_preimage)};
}

Verdict curriculum_conformance() {
  Checks c;
  const CurriculumConfig cfg;
  CurriculumGenerator gen(model(), cfg, derive_seed(2026, "acceptance.curriculum"));
  const double dt = 0.02;
  const int n = 3000;  // 60 s
  double heading = 0.0;
  std::vector<MotionTarget> out;
  std::vector<std::array<ReachableGoal, 2>> prev, next;
  for (int k = 0; k < n; ++k) {
    out.push_back(gen.step(k * dt, heading));
    prev.push_back(gen.prev_goals());
    next.push_back(gen.next_goals());
    heading = wrap_angle(heading + out.back().yaw_rate_obs * dt);
  }
  c.require(gen.count(ResampleEvent::Kind::Velocity) == 6, "velocity resamples != 6");
  c.require(gen.count(ResampleEvent::Kind::Heading) == 6, "heading resamples != 6");
  c.require(gen.count(ResampleEvent::Kind::ToeGoal) == 20, "toe-goal segments != 20");
  for (const auto& e : gen.events()) {
    if (e.kind == ResampleEvent::Kind::Velocity) {
      c.require(std::abs(e.value * 10 - std::round(e.value * 10)) < 1e-9, "v_x off the 0.1 grid");
      c.require(std::abs(e.value) <= 0.3 + 1e-12, "v_x outside [-0.3, 0.3]");
    }
    if (e.kind == ResampleEvent::Kind::Heading) {
      c.require(std::abs(e.offset) <= kPi / 2, "heading offset outside [-pi/2, pi/2]");
    }
  }
  const int seg = 150;  // 3 s
  for (int k = 0; k < n; ++k) {
    const int start = (k / seg) * seg;
    const double u = static_cast<double>(k - start) * dt / 3.0;
    for (std::size_t s = 0; s < 2; ++s) {
      const Vec3 a = prev[static_cast<std::size_t>(k)][s].position;
      const Vec3 b = next[static_cast<std::size_t>(k)][s].position;
      const Vec3& got = out[static_cast<std::size_t>(k)].toe_des[s];
      c.require((got - (a + u * (b - a))).norm() <= 1e-12, "toe target not affine in its segment");
      if (k == start) c.require(got == a, "segment does not start exactly at its goal");
      if (k > 0 && k == start) {
        c.require(a == next[static_cast<std::size_t>(k - 1)][s].position,
                  "segment does not end exactly at the next goal");
      }
      const auto& w = next[static_cast<std::size_t>(k)][s];
      c.require(oracle::dist(oracle::toe(model(), kFrontLegs[s], w.joints), arr(w.position)) < 1e-9,
                "goal witness does not reach its goal");
    }
  }
  const std::array<Vec3, 2> a = {prev.front()[0].position, prev.front()[1].position};
  const std::array<Vec3, 2> b = {next.front()[0].position, next.front()[1].position};
  const auto ends = interpolate_toe_targets(a, b, 3.0, 3.0);
  c.require(ends == b && interpolate_toe_targets(a, b, 0.0, 3.0) == a,
            "interpolation end point not exact");
  return {c.ok(), c.summary()};
}

Verdict plant_physics() {
  Checks c;
  const auto& m = model();

  // Step response against the overdamped second-order solution.
  {
    PlantConfig cfg;
    cfg.gravity = false;
    cfg.initial_q = m.nominal_quadrupedal_pose;
    const double step = 0.2;
    JointVector target = m.nominal_quadrupedal_pose;
    for (int j = 0; j < kNumJoints; ++j) target[j] += step;
    ActionSequence actions;
    actions.targets.assign(75, target);
    const JointTrace tr = simulate_open_loop(m, SimParams{}, actions, cfg);
    const auto inertia = effective_inertia(m, SimParams{}, m.nominal_quadrupedal_pose, cfg.rotor_inertia);
    double worst_dev = 0.0, worst_settle = 0.0;
    for (int j = 0; j < kNumJoints; ++j) {
      const double I = inertia[static_cast<std::size_t>(j)];
      const double disc = cfg.kd * cfg.kd - 4 * I * cfg.kp;
      c.require(disc > 0, "joint not overdamped");
      if (disc <= 0) continue;
      const double s1 = (-cfg.kd + std::sqrt(disc)) / (2 * I);
      const double s2 = (-cfg.kd - std::sqrt(disc)) / (2 * I);
      double settle_sim = 0.0, settle_ref = 0.0;
      for (std::size_t i = 0; i < tr.q.size(); ++i) {
        const double t = static_cast<double>(i) * tr.period;
        const double x = tr.q[i][j] - m.nominal_quadrupedal_pose[j];
        const double ref = step * (1 + (s2 * std::exp(s1 * t) - s1 * std::exp(s2 * t)) / (s1 - s2));
        worst_dev = std::max(worst_dev, std::abs(x - ref) / step);
        if (std::abs(x - step) > 0.02 * step) settle_sim = t + tr.period;
        if (std::abs(ref - step) > 0.02 * step) settle_ref = t + tr.period;
      }
      const double gap = std::abs(settle_sim - settle_ref);
      worst_settle = std::max(worst_settle, gap / settle_ref);
      c.require(gap <= 0.02 * settle_ref + tr.period, "settling time differs from the oracle");
    }
    c.require(worst_dev <= 0.02, "step response leaves the 2% envelope");
    c.require(worst_settle <= 1.0, "settling time off by more than 100%");
  }

  // Energy with frozen targets, gravity off, friction and damping on.
  {
    PlantConfig cfg;
    cfg.gravity = false;
    JointVector target = m.nominal_quadrupedal_pose, start = target;
    Rng rng(derive_seed(2026, "acceptance.energy"));
    for (int j = 0; j < kNumJoints; ++j) start[j] += uniform(rng, -0.5, 0.5);
    cfg.initial_q = start;
    SimParams xi;
    xi.joint_friction = 0.03;
    xi.joint_damping = 0.02;
    ActionSequence actions;
    actions.targets.assign(60, target);
    PlantLog log;
    simulate_open_loop(m, xi, actions, cfg, &log);
    const auto inertia = effective_inertia(m, xi, m.nominal_quadrupedal_pose, cfg.rotor_inertia);
    auto energy = [&](std::size_t k) {
      double e = 0.0;
      for (int j = 0; j < kNumJoints; ++j) {
        const double q = log.q[k][j], v = log.v[k][j], err = target[j] - q;
        const double tau_max = m.torque_limit(j), kp = cfg.kp * xi.pd_scale;
        const double spring = std::abs(kp * err) <= tau_max
                                  ? 0.5 * kp * err * err
                                  : tau_max * std::abs(err) - tau_max * tau_max / (2 * kp);
        const double pen = std::max(0.0, q - m.limit(j).max) + std::max(0.0, m.limit(j).min - q);
        e += 0.5 * inertia[static_cast<std::size_t>(j)] * v * v + spring +
             0.5 * cfg.limit_stiffness * pen * pen;
      }
      return e;
    };
    int increases = 0;
    for (std::size_t k = 1; k < log.q.size(); ++k) {
      const double before = energy(k - 1);
      if (energy(k) > before + 1e-12 * std::max(1.0, before)) ++increases;
    }
    c.require(increases == 0, std::to_string(increases) + " energy increases");
  }

  // A target change at t lands at the first internal step at or after t + delay.
  {
    PlantConfig cfg;
    const int j = joint_index(Leg::RL, JointKind::Thigh);
    JointVector a = m.nominal_quadrupedal_pose, b = a;
    b[j] += 0.1;
    ActionSequence actions;
    actions.targets.assign(20, a);
    for (std::size_t i = 10; i < 20; ++i) actions.targets[i] = b;
    for (double delay : {0.0, 0.004, 0.015, 0.0155, 0.03}) {
      SimParams xi;
      xi.delay = delay;
      PlantLog log;
      simulate_open_loop(m, xi, actions, cfg, &log);
      std::size_t first = log.target.size();
      for (std::size_t k = 0; k < log.target.size() && first == log.target.size(); ++k) {
        if (log.target[k][j] != a[j]) first = k;
      }
      const double t_change = 10 * actions.period + delay;
      const double t_effect = static_cast<double>(first) * cfg.internal_dt;
      c.require(t_effect >= t_change - 1e-9 && t_effect < t_change + cfg.internal_dt,
                fmt("delay %.4f took effect at %.4f", delay, t_effect));
    }
  }
  return {c.ok(), c.summary()};
}

Verdict planar_standup() {
  const auto t0 = std::chrono::steady_clock::now();
  const RewardConfig reward = RewardConfig::load(kAssets / "config" / "planar_reward.cfg");
  RewardConfig ablated = reward;
  ablated.scale_mode = ScaleMode::ConstantOne;
  const PlanarModel env(model(), PlanarConfig{});
  int stood = 0;
  std::string dynamic_heights, constant_heights;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PlanarTrainConfig cfg;
    cfg.cem.population = 64;
    cfg.cem.iterations = 200;
    cfg.cem.seed = seed;
    cfg.cem.workers = default_workers();
    const auto dyn = planar_train(env, reward, cfg);
    const auto con = planar_train(env, ablated, cfg);
    stood += stood_up(dyn.evaluation, reward);
    dynamic_heights += fmt(" %.3f/%.2f", dyn.evaluation.final_height, dyn.evaluation.final_tilt);
    constant_heights += fmt(" %.3f/%.2f", con.evaluation.final_height, con.evaluation.final_tilt);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {stood >= 1 && secs <= 900,
          std::to_string(stood) + "/5 seeds stood; height/tilt dynamic" + dynamic_heights +
              "; constant-scale" + constant_heights + fmt("; %.0f s", secs)};
}

Verdict instruction_pipeline() {
  Checks c;
  const RuleSet rules = RuleSet::load(kAssets / "instruct" / "rules.json", model());
  const PromptSet prompts = PromptSet::builtin();
  for (const std::string instruction :
       {"wave left hand", "step forward, then stop to wave left hand upward and downward"}) {
    MockBackend first(kAssets / "transcripts", instruction);
    MockBackend second(kAssets / "transcripts", instruction);
    const auto a = run_instruct(instruction, first, prompts, rules, model());
    const auto b = run_instruct(instruction, second, prompts, rules, model());
    c.require(a.track.to_csv() == b.track.to_csv(), "mock replay not deterministic");
    c.require(!a.descriptions.empty() && a.descriptions.size() == a.frames.size(),
              "frame count changed between rounds");
    std::set<int> sources;
    for (const auto& row : a.track.rows) {
      sources.insert(row.source);
      for (std::size_t s = 0; s < 2; ++s) {
        c.require(oracle::preimage_residual(model(), kFrontLegs[s], arr(row.target.toe_des[s])) < 1e-6,
                  "unreachable toe target");
      }
    }
    c.require(sources.size() == a.frames.size(), "track does not cover every key frame");
  }

  MockBackend bad(kTestData / "transcripts", "wave left hand too far");
  bool rejected = false;
  try {
    run_instruct("wave left hand too far", bad, prompts, rules, model());
  } catch (const FrameRejected& e) {
    const std::string what = e.what();
    rejected = e.frame == 2 && what.find("FL_hip_joint = 0.8") != std::string::npos &&
               what.find("(0.1, 0.57)") != std::string::npos;
  }
  c.require(rejected, "tilted-outward frame not rejected with the (0.1, 0.57) rule");
  return {c.ok(), c.summary()};
}

SkeletonFrame synthetic_human(double t) {
  SkeletonFrame f;
  f.t = t;
  f.landmarks["left_shoulder"] = {0.0, 0.2, 1.4};
  f.landmarks["right_shoulder"] = {0.0, -0.2, 1.4};
  f.landmarks["left_hip"] = {0.0, 0.15, 0.9};
  f.landmarks["right_hip"] = {0.0, -0.15, 0.9};
  f.landmarks["left_wrist"] = {0.3 + 0.1 * std::sin(3 * t), 0.2, 1.2 + 0.1 * std::cos(3 * t)};
  f.landmarks["right_wrist"] = {0.25, -0.25 + 0.05 * std::sin(2 * t), 1.15};
  return f;
}

Verdict retarget_properties() {
  Checks c;
  const auto& m = model();
  Rng rng(derive_seed(2026, "acceptance.retarget"));
  const auto clip = load_skeleton_jsonl(kAssets / "skeletons" / "jab.jsonl");

  // Rigid motions of the whole skeleton leave wrist vectors unchanged.
  for (int trial = 0; trial < 200; ++trial) {
    const SkeletonFrame& f = clip[static_cast<std::size_t>(trial) % clip.size()];
    Quat q(standard_normal(rng), standard_normal(rng), standard_normal(rng), standard_normal(rng));
    q.normalize();
    const Vec3 shift(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5));
    SkeletonFrame g = f;
    for (auto& [name, p] : g.landmarks) p = q.toRotationMatrix() * p + shift;
    const auto ref = wrist_relative(f), moved = wrist_relative(g);
    for (std::size_t s = 0; s < 2; ++s) {
      c.require((ref[s] - moved[s]).norm() < 1e-12, "wrist vector changed under a rigid motion");
    }
  }

  // Scale equivariance about the reference while the result stays reachable.
  const Vec3 ref = retarget_reference(m);
  int equivariant = 0;
  for (int trial = 0; trial < 40; ++trial) {
    for (Leg leg : kFrontLegs) {
      const auto goal = sample_reachable_toe_goal(m, leg, rng);
      const double scale = 0.5;
      const Vec3 d = (goal.position - ref) / scale;
      const Vec3 p_human(-d.z(), d.y(), d.x());
      const Vec3 base = scale_to_robot(p_human, scale, m, leg);
      for (double lambda : {0.9, 0.95, 1.03}) {
        const Vec3 raw = ref + scale * human_to_robot_axes(lambda * p_human);
        if (oracle::preimage_residual(m, leg, arr(raw)) > 1e-9) continue;
        const Vec3 out = scale_to_robot(lambda * p_human, scale, m, leg);
        c.require((out - ref - lambda * (base - ref)).norm() < 1e-12, "scale equivariance broken");
        ++equivariant;
      }
    }
  }
  c.require(equivariant >= 20, "too few in-workspace scale checks");

  // Projection is idempotent.
  for (int trial = 0; trial < 20; ++trial) {
    const Leg leg = kFrontLegs[static_cast<std::size_t>(trial % 2)];
    const Vec3 far = ref + Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const Vec3 once = clamp_to_workspace(m, leg, far);
    c.require(clamp_to_workspace(m, leg, once) == once, "projection not idempotent");
    c.require(oracle::preimage_residual(m, leg, arr(once)) < 1e-6, "projection left the workspace");
  }

  // Boxing-rate track of the shipped clip.
  const auto track = build_track(clip, RetargetConfig::boxing(), m);
  const double span = clip.back().t - clip.front().t;
  const auto expected = static_cast<std::size_t>(std::floor(span / 0.1 + 1e-9)) + 1;
  c.require(track.rows.size() == expected,
            "boxing track has " + std::to_string(track.rows.size()) + " rows, expected " +
                std::to_string(expected));
  for (const auto& row : track.rows) {
    for (std::size_t s = 0; s < 2; ++s) {
      c.require(oracle::preimage_residual(m, kFrontLegs[s], arr(row.target.toe_des[s])) < 1e-6,
                "unreachable retargeted toe");
    }
  }
  std::vector<SkeletonFrame> synthetic;
  for (int i = 0; i < 61; ++i) synthetic.push_back(synthetic_human(i / 30.0));
  c.require(build_track(synthetic, RetargetConfig::boxing(), m).rows.size() == 21,
            "2 s synthetic clip did not give 21 rows");
  return {c.ok(), c.summary()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance criteria");
  std::vector<int> only;
  bool record_only = false;
  app.add_option("--only", only, "Run only these criteria (1-10)")->check(CLI::Range(1, 10));
  app.add_flag("--record-only", record_only,
               "Exit 0 once every selected criterion has a verdict");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"calibration recovery", calibration_recovery},
      {"friction profile shape", friction_profile_shape},
      {"reward invariants", reward_invariants},
      {"termination table", termination_table},
      {"kinematics oracle", kinematics_oracle},
      {"curriculum conformance", curriculum_conformance},
      {"plant physics", plant_physics},
      {"planar stand-up", planar_standup},
      {"instruction pipeline", instruction_pipeline},
      {"retarget properties", retarget_properties},
  };
  int failed = 0, errored = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
      ++errored;
    }
    failed += !v.pass;
    std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                v.detail.c_str());
    std::fflush(stdout);
  }
  if (record_only) return errored;
  return failed;
}
