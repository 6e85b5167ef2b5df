#include "bipedkit/randomization.hpp"

#include "bipedkit/text_io.hpp"

namespace bipedkit {

std::string_view rand_param_key(RandParam p) {
  switch (p) {
    case RandParam::JointFriction: return "joint_friction";
    case RandParam::JointDamping: return "joint_damping";
    case RandParam::RigidFriction: return "rigid_friction";
    case RandParam::Restitution: return "restitution";
    case RandParam::BaseMassOffset: return "mass_offset.base";
    case RandParam::HipMassOffset: return "mass_offset.hip";
    case RandParam::ThighMassOffset: return "mass_offset.thigh";
    case RandParam::CalfMassOffset: return "mass_offset.calf";
    case RandParam::FootMassOffset: return "mass_offset.foot";
    case RandParam::ComDisplacement: return "com_displacement";
    case RandParam::PdFraction: return "pd_fraction";
    case RandParam::Delay: return "delay";
  }
  return "?";
}

std::optional<RandParam> parse_rand_param(std::string_view key) {
  for (RandParam p : kAllRandParams) {
    if (rand_param_key(p) == key) return p;
  }
  return std::nullopt;
}

RandomizationTable RandomizationTable::defaults() {
  RandomizationTable t;
  t.ranges = {
      {RandParam::JointFriction, {0.03, 0.08}},   {RandParam::JointDamping, {0.02, 0.06}},
      {RandParam::RigidFriction, {1.0, 3.0}},     {RandParam::Restitution, {0.0, 0.4}},
      {RandParam::BaseMassOffset, {-0.5, 0.5}},   {RandParam::HipMassOffset, {0.0, 0.1}},
      {RandParam::ThighMassOffset, {-0.05, 0.05}}, {RandParam::CalfMassOffset, {-0.05, 0.05}},
      {RandParam::FootMassOffset, {0.0, 0.01}},   {RandParam::ComDisplacement, {-0.01, 0.01}},
      {RandParam::PdFraction, {0.8, 1.2}},        {RandParam::Delay, {0.005, 0.03}},
  };
  return t;
}

void RandomizationTable::validate() const {
  for (const auto& [p, r] : ranges) {
    const std::string key(rand_param_key(p));
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
      throw ValidationError("randomization row " + key + " must satisfy lo <= hi");
    }
    switch (p) {
      case RandParam::Restitution:
        if (r.lo < 0.0 || r.hi > 1.0) throw ValidationError("restitution must lie in [0, 1]");
        break;
      case RandParam::PdFraction:
        if (r.lo <= 0.0) throw ValidationError("pd_fraction range must be positive");
        break;
      case RandParam::JointFriction:
      case RandParam::JointDamping:
      case RandParam::RigidFriction:
      case RandParam::Delay:
        if (r.lo < 0.0) throw ValidationError("randomization row " + key + " must be >= 0");
        break;
      default: break;
    }
  }
}

void RandomizationTable::validate_complete() const {
  validate();
  std::string missing;
  for (RandParam p : kAllRandParams) {
    if (!ranges.count(p)) missing += (missing.empty() ? "" : ", ") + std::string(rand_param_key(p));
  }
  if (!missing.empty()) throw ValidationError("randomization table lacks rows: " + missing);
}

RandomizationTable RandomizationTable::parse(std::string_view text, const std::string& source) {
  const auto kv = KeyValueFile::parse(text, source);
  if (kv.has("version") && kv.number("version") != 1) {
    throw ValidationError(source + ": unsupported randomization table version");
  }
  RandomizationTable t;
  for (RandParam p : kAllRandParams) {
    const std::string key(rand_param_key(p));
    if (!kv.has(key)) continue;
    const auto v = kv.list(key, 2);
    t.ranges[p] = {v[0], v[1]};
  }
  kv.reject_unused();
  t.validate();
  return t;
}

RandomizationTable RandomizationTable::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

std::string RandomizationTable::serialize() const {
  KeyValueWriter w;
  w.comment("Per-episode uniform ranges, [lo, hi]. Masses in kg, lengths in m, delay in s.");
  w.number("version", 1);
  for (RandParam p : kAllRandParams) {
    const auto it = ranges.find(p);
    if (it != ranges.end()) w.list(rand_param_key(p), {it->second.lo, it->second.hi});
  }
  return w.str();
}

nlohmann::json EnvParams::to_json() const {
  return {{"joint_friction", joint_friction},
          {"joint_damping", joint_damping},
          {"rigid_friction", rigid_friction},
          {"restitution", restitution},
          {"mass_offsets", mass_offsets},
          {"com_displacement", {com_displacement.x(), com_displacement.y(), com_displacement.z()}},
          {"pd_fraction", pd_fraction},
          {"delay", delay},
          {"seed", seed}};
}

EnvParams sample_env_params(const RandomizationTable& table, std::uint64_t seed) {
  table.validate_complete();
  Rng rng(derive_seed(seed, "randomization.env"));
  auto draw = [&](RandParam p) {
    const ParamRange& r = table.ranges.at(p);
    return uniform(rng, r.lo, r.hi);
  };
  EnvParams e;
  e.seed = seed;
  e.joint_friction = draw(RandParam::JointFriction);
  e.joint_damping = draw(RandParam::JointDamping);
  e.rigid_friction = draw(RandParam::RigidFriction);
  e.restitution = draw(RandParam::Restitution);
  e.mass_offsets = {draw(RandParam::BaseMassOffset), draw(RandParam::HipMassOffset),
                    draw(RandParam::ThighMassOffset), draw(RandParam::CalfMassOffset),
                    draw(RandParam::FootMassOffset)};
  for (int k = 0; k < 3; ++k) e.com_displacement[k] = draw(RandParam::ComDisplacement);
  e.pd_fraction = draw(RandParam::PdFraction);
  e.delay = draw(RandParam::Delay);
  return e;
}

SimParams to_sim_params(const EnvParams& p, const RobotModel& model) {
  SimParams xi;
  xi.joint_friction = p.joint_friction;
  xi.joint_damping = p.joint_damping;
  xi.delay = p.delay;
  xi.pd_scale = p.pd_fraction;
  const std::array<double, 4> m = {model.masses.hip, model.masses.thigh, model.masses.calf,
                                   model.masses.foot};
  for (std::size_t k = 0; k < 4; ++k) xi.mass_scales[k] = (m[k] + p.mass_offsets[k + 1]) / m[k];
  xi.validate();
  return xi;
}

RandomizationTable table_from_report(const CalibrationReport& report,
                                     const RandomizationTable& defaults,
                                     const RobotModel& model) {
  defaults.validate_complete();
  RandomizationTable t = defaults;
  for (CalibParam p : report.space.active()) {
    const auto it = report.recommended_ranges.find(p);
    if (it == report.recommended_ranges.end()) continue;
    const ParamRange r = it->second;
    switch (p) {
      case CalibParam::JointFriction: t.ranges[RandParam::JointFriction] = r; break;
      case CalibParam::JointDamping: t.ranges[RandParam::JointDamping] = r; break;
      case CalibParam::Delay: t.ranges[RandParam::Delay] = r; break;
      case CalibParam::PdScale: t.ranges[RandParam::PdFraction] = r; break;
      case CalibParam::MassScale: {
        const std::array<std::pair<RandParam, double>, 4> rows = {{
            {RandParam::HipMassOffset, model.masses.hip},
            {RandParam::ThighMassOffset, model.masses.thigh},
            {RandParam::CalfMassOffset, model.masses.calf},
            {RandParam::FootMassOffset, model.masses.foot},
        }};
        for (const auto& [row, mass] : rows) t.ranges[row] = {(r.lo - 1.0) * mass, (r.hi - 1.0) * mass};
        break;
      }
    }
  }
  t.validate_complete();
  return t;
}

RandomizationTable table_from_report(const std::optional<CalibrationReport>& report,
                                     const RandomizationTable& defaults,
                                     const RobotModel& model) {
  if (!report) {
    defaults.validate_complete();
    return defaults;
  }
  return table_from_report(*report, defaults, model);
}

}  // namespace bipedkit
