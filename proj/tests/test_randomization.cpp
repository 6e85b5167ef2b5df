#include <doctest.h>

#include <algorithm>
#include <functional>

#include "bipedkit/randomization.hpp"

using namespace bipedkit;

namespace {

const RobotModel& model() { return RobotModel::standin(); }

// Kolmogorov-Smirnov distance between samples and U[lo, hi].
double ks_uniform(std::vector<double> x, double lo, double hi) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = (x[i] - lo) / (hi - lo);
    d = std::max({d, (static_cast<double>(i) + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace

TEST_CASE("default table") {
  const auto t = RandomizationTable::defaults();
  CHECK_NOTHROW(t.validate_complete());
  CHECK(t.ranges.at(RandParam::JointFriction) == ParamRange{0.03, 0.08});
  CHECK(t.ranges.at(RandParam::JointDamping) == ParamRange{0.02, 0.06});
  CHECK(t.ranges.at(RandParam::RigidFriction) == ParamRange{1.0, 3.0});
  CHECK(t.ranges.at(RandParam::Restitution) == ParamRange{0.0, 0.4});
  CHECK(t.ranges.at(RandParam::BaseMassOffset) == ParamRange{-0.5, 0.5});
  CHECK(t.ranges.at(RandParam::HipMassOffset) == ParamRange{0.0, 0.1});
  CHECK(t.ranges.at(RandParam::ThighMassOffset) == ParamRange{-0.05, 0.05});
  CHECK(t.ranges.at(RandParam::CalfMassOffset) == ParamRange{-0.05, 0.05});
  CHECK(t.ranges.at(RandParam::FootMassOffset) == ParamRange{0.0, 0.01});
  CHECK(t.ranges.at(RandParam::ComDisplacement) == ParamRange{-0.01, 0.01});
  CHECK(t.ranges.at(RandParam::PdFraction) == ParamRange{0.8, 1.2});
  CHECK(t.ranges.at(RandParam::Delay) == ParamRange{0.005, 0.03});

  CHECK(RandomizationTable::load(BIPEDKIT_ASSET_DIR "/config/randomization.cfg") == t);
  CHECK(RandomizationTable::parse(t.serialize()) == t);
}

TEST_CASE("table validation and parsing") {
  CHECK_THROWS_AS(RandomizationTable::parse("delay = [0.03, 0.01]\n"), ValidationError);
  CHECK_THROWS_AS(RandomizationTable::parse("restitution = [0, 1.5]\n"), ValidationError);
  CHECK_THROWS_AS(RandomizationTable::parse("pd_fraction = [0, 1]\n"), ValidationError);
  CHECK_THROWS_AS(RandomizationTable::parse("joint_friction = [-0.1, 0.1]\n"), ValidationError);
  CHECK_THROWS_AS(RandomizationTable::parse("gravity = [9, 10]\n"), ParseError);
  const auto partial = RandomizationTable::parse("delay = [0.01, 0.02]\n");
  CHECK(partial.ranges.size() == 1);
  CHECK_THROWS_AS(partial.validate_complete(), ValidationError);
  CHECK_THROWS_AS(sample_env_params(partial, 1), ValidationError);
  for (RandParam p : kAllRandParams) CHECK(parse_rand_param(rand_param_key(p)) == p);
}

TEST_CASE("draws stay in range and look uniform") {
  const auto t = RandomizationTable::defaults();
  const int n = 10000;
  std::map<RandParam, std::vector<double>> draws;
  for (int i = 0; i < n; ++i) {
    const EnvParams e = sample_env_params(t, derive_seed(123, static_cast<std::uint64_t>(i)));
    draws[RandParam::JointFriction].push_back(e.joint_friction);
    draws[RandParam::JointDamping].push_back(e.joint_damping);
    draws[RandParam::RigidFriction].push_back(e.rigid_friction);
    draws[RandParam::Restitution].push_back(e.restitution);
    draws[RandParam::BaseMassOffset].push_back(e.mass_offsets[0]);
    draws[RandParam::HipMassOffset].push_back(e.mass_offsets[1]);
    draws[RandParam::ThighMassOffset].push_back(e.mass_offsets[2]);
    draws[RandParam::CalfMassOffset].push_back(e.mass_offsets[3]);
    draws[RandParam::FootMassOffset].push_back(e.mass_offsets[4]);
    draws[RandParam::ComDisplacement].push_back(e.com_displacement.x());
    draws[RandParam::PdFraction].push_back(e.pd_fraction);
    draws[RandParam::Delay].push_back(e.delay);
  }
  // 0.1% critical value of the one-sample KS statistic.
  const double critical = 1.949 / std::sqrt(static_cast<double>(n));
  for (const auto& [p, x] : draws) {
    const ParamRange r = t.ranges.at(p);
    for (double v : x) {
      CHECK(v >= r.lo);
      CHECK(v <= r.hi);
    }
    CHECK(ks_uniform(x, r.lo, r.hi) < critical);
  }
}

TEST_CASE("degenerate rows and determinism") {
  auto t = RandomizationTable::defaults();
  t.ranges[RandParam::Delay] = {0.02, 0.02};
  for (std::uint64_t s = 0; s < 50; ++s) CHECK(sample_env_params(t, s).delay == 0.02);
  const auto a = sample_env_params(t, 77), b = sample_env_params(t, 77), c = sample_env_params(t, 78);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.to_json() != c.to_json());
  CHECK(a.seed == 77);
}

TEST_CASE("episode draws map onto plant parameters") {
  EnvParams e;
  e.joint_friction = 0.05;
  e.delay = 0.01;
  e.pd_fraction = 0.9;
  e.mass_offsets = {0.3, 0.045, 0.0, -0.012, 0.0};
  const SimParams xi = to_sim_params(e, model());
  CHECK(xi.joint_friction == 0.05);
  CHECK(xi.delay == 0.01);
  CHECK(xi.pd_scale == 0.9);
  CHECK(xi.mass_scales[0] == doctest::Approx((0.45 + 0.045) / 0.45));
  CHECK(xi.mass_scales[1] == 1.0);
  CHECK(xi.mass_scales[2] == doctest::Approx(0.9));
}

TEST_CASE("table from a calibration report") {
  const auto defaults = RandomizationTable::defaults();
  CHECK(table_from_report(std::nullopt, defaults, model()) == defaults);

  CalibrationReport report;
  report.space.ranges = {{CalibParam::JointFriction, {0.0, 0.2}},
                         {CalibParam::MassScale, {0.9, 1.1}},
                         {CalibParam::PdScale, {1.0, 1.0}}};
  SimParams best;
  best.joint_friction = 0.055;
  best.delay = 0.001;
  report.best = best;
  report.recommended_ranges = add_margins(best, MarginPolicy{});
  const auto t = table_from_report(report, defaults, model());
  CHECK(t.ranges.at(RandParam::JointFriction).lo == doctest::Approx(0.03));
  CHECK(t.ranges.at(RandParam::JointFriction).hi == doctest::Approx(0.08));
  // Not searched: kept from the defaults even though a margin range exists.
  CHECK(t.ranges.at(RandParam::Delay) == defaults.ranges.at(RandParam::Delay));
  CHECK(t.ranges.at(RandParam::PdFraction) == defaults.ranges.at(RandParam::PdFraction));
  CHECK(t.ranges.at(RandParam::HipMassOffset).lo == doctest::Approx(-0.1 * 0.45));
  CHECK(t.ranges.at(RandParam::FootMassOffset).hi == doctest::Approx(0.1 * 0.03));
  CHECK(t.ranges.at(RandParam::BaseMassOffset) == defaults.ranges.at(RandParam::BaseMassOffset));
  for (const auto& [p, r] : t.ranges) CHECK(r.lo <= r.hi);

  RandomizationTable missing = defaults;
  missing.ranges.erase(RandParam::Restitution);
  try {
    table_from_report(report, missing, model());
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("restitution") != std::string::npos);
  }
}
