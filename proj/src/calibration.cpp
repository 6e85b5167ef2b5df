#include "bipedkit/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bipedkit/parallel.hpp"

namespace bipedkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Joe-Kuo primitive polynomials and initial direction numbers, dimensions 2..6.
struct SobolInit {
  unsigned s;
  unsigned a;
  std::array<std::uint32_t, 4> m;
};
constexpr std::array<SobolInit, 5> kSobolInit = {{
    {1, 0, {1, 0, 0, 0}},
    {2, 1, {1, 3, 0, 0}},
    {3, 1, {1, 3, 1, 0}},
    {3, 2, {1, 1, 1, 0}},
    {4, 1, {1, 1, 3, 3}},
}};

nlohmann::json range_map_json(const std::map<CalibParam, ParamRange>& ranges) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [p, r] : ranges) j[std::string(calib_param_name(p))] = {r.lo, r.hi};
  return j;
}

std::map<CalibParam, ParamRange> range_map_from_json(const nlohmann::json& j) {
  std::map<CalibParam, ParamRange> out;
  for (const auto& [key, value] : j.items()) {
    const auto p = parse_calib_param(key);
    if (!p) throw InputError("unknown calibration parameter '" + key + "'");
    if (!value.is_array() || value.size() != 2) {
      throw InputError("range for '" + key + "' must be [lo, hi]");
    }
    out[*p] = {value[0].get<double>(), value[1].get<double>()};
  }
  return out;
}

}  // namespace

std::string_view calib_param_name(CalibParam p) {
  switch (p) {
    case CalibParam::JointFriction: return "joint_friction";
    case CalibParam::JointDamping: return "joint_damping";
    case CalibParam::Delay: return "delay";
    case CalibParam::MassScale: return "mass_scale";
    case CalibParam::PdScale: return "pd_scale";
  }
  return "?";
}

std::optional<CalibParam> parse_calib_param(std::string_view name) {
  for (CalibParam p : kAllCalibParams) {
    if (calib_param_name(p) == name) return p;
  }
  return std::nullopt;
}

double get_param(const SimParams& xi, CalibParam p) {
  switch (p) {
    case CalibParam::JointFriction: return xi.joint_friction;
    case CalibParam::JointDamping: return xi.joint_damping;
    case CalibParam::Delay: return xi.delay;
    case CalibParam::MassScale: return xi.mass_scales[0];
    case CalibParam::PdScale: return xi.pd_scale;
  }
  return 0.0;
}

void set_param(SimParams& xi, CalibParam p, double value) {
  switch (p) {
    case CalibParam::JointFriction: xi.joint_friction = value; break;
    case CalibParam::JointDamping: xi.joint_damping = value; break;
    case CalibParam::Delay: xi.delay = value; break;
    case CalibParam::MassScale: xi.mass_scales = {value, value, value, value}; break;
    case CalibParam::PdScale: xi.pd_scale = value; break;
  }
}

void SearchSpace::validate() const {
  for (const auto& [p, r] : ranges) {
    const std::string name(calib_param_name(p));
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
      throw ValidationError("search range for " + name + " must satisfy lo <= hi");
    }
    const bool positive = p == CalibParam::MassScale || p == CalibParam::PdScale;
    if (positive ? r.lo <= 0.0 : r.lo < 0.0) {
      throw ValidationError("search range for " + name + " leaves the valid domain");
    }
  }
  if (active().size() > 6) throw ValidationError("at most 6 searched parameters");
}

std::vector<CalibParam> SearchSpace::active() const {
  std::vector<CalibParam> out;
  for (const auto& [p, r] : ranges) {
    if (r.hi > r.lo) out.push_back(p);
  }
  return out;
}

void CalibrationDataset::validate() const {
  if (actions.targets.empty()) throw ValidationError("dataset has no actions");
  if (q_real.q.empty()) throw ValidationError("dataset has no joint readings");
  const double expect = actions.duration() / q_real.period;
  if (std::abs(expect - static_cast<double>(q_real.q.size())) > 1e-6) {
    throw ValidationError("dataset: " + std::to_string(q_real.q.size()) +
                          " joint samples, expected " + format_double(expect));
  }
}

CalibrationDataset CalibrationDataset::load(const std::filesystem::path& dir) {
  CalibrationDataset d;
  d.actions = ActionSequence::from_table(load_csv(dir / "actions.csv"));
  d.q_real = JointTrace::from_table(load_csv(dir / "q_real.csv"));
  const auto meta = dir / "metadata.json";
  if (std::filesystem::exists(meta)) {
    try {
      d.metadata = nlohmann::json::parse(read_file(meta));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(meta.string() + ": " + e.what());
    }
  }
  d.validate();
  return d;
}

void CalibrationDataset::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_file(dir / "actions.csv", to_csv(actions.to_table()));
  write_file(dir / "q_real.csv", to_csv(q_real.to_table()));
  write_file(dir / "metadata.json", metadata.dump(2) + "\n");
}

double trace_discrepancy(const JointTrace& a, const JointTrace& b) {
  if (a.q.size() != b.q.size()) throw InputError("trace lengths differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.q.size(); ++i) {
    for (int j = 0; j < kNumJoints; ++j) sum += square(a.q[i][j] - b.q[i][j]);
  }
  return sum;
}

double discrepancy(const RobotModel& model, const SimParams& xi, const CalibrationDataset& data,
                   const PlantConfig& plant) {
  try {
    const JointTrace sim = simulate_open_loop(model, xi, data.actions, plant);
    const double d = trace_discrepancy(sim, data.q_real);
    return std::isfinite(d) ? d : kInf;
  } catch (const SimulationError&) {
    return kInf;
  }
}

SobolSequence::SobolSequence(std::size_t dim, std::uint64_t seed) : dim_(dim) {
  if (dim > kSobolInit.size() + 1) throw InputError("Sobol dimension limited to 6");
  directions_.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    auto& v = directions_[d];
    if (d == 0) {
      for (unsigned k = 0; k < 32; ++k) v[k] = 1u << (31 - k);
      continue;
    }
    const SobolInit& init = kSobolInit[d - 1];
    for (unsigned k = 0; k < init.s; ++k) v[k] = init.m[k] << (31 - k);
    for (unsigned k = init.s; k < 32; ++k) {
      std::uint32_t x = v[k - init.s] ^ (v[k - init.s] >> init.s);
      for (unsigned i = 1; i < init.s; ++i) {
        if ((init.a >> (init.s - 1 - i)) & 1u) x ^= v[k - i];
      }
      v[k] = x;
    }
  }
  Rng rng(derive_seed(seed, "sobol.shift"));
  for (std::size_t d = 0; d < dim; ++d) shift_.push_back(static_cast<std::uint32_t>(rng() >> 32));
}

std::vector<double> SobolSequence::point(std::uint64_t index) const {
  const std::uint64_t gray = index ^ (index >> 1);
  std::vector<double> out(dim_);
  for (std::size_t d = 0; d < dim_; ++d) {
    std::uint32_t x = 0;
    for (unsigned k = 0; k < 32; ++k) {
      if ((gray >> k) & 1u) x ^= directions_[d][k];
    }
    x ^= shift_[d];
    out[d] = (static_cast<double>(x) + 0.5) * 0x1.0p-32;
  }
  return out;
}

std::map<CalibParam, ParamRange> add_margins(const SimParams& best, const MarginPolicy& policy) {
  std::map<CalibParam, ParamRange> out;
  for (const auto& [p, m] : policy.margins) {
    const double v = get_param(best, p);
    out[p] = {std::max(0.0, v - m.first), v + m.second};
  }
  return out;
}

nlohmann::json sim_params_to_json(const SimParams& xi) {
  return {{"joint_friction", xi.joint_friction},
          {"joint_damping", xi.joint_damping},
          {"mass_scales", xi.mass_scales},
          {"delay", xi.delay},
          {"pd_scale", xi.pd_scale}};
}

SimParams sim_params_from_json(const nlohmann::json& j) {
  try {
    SimParams xi;
    xi.joint_friction = j.at("joint_friction").get<double>();
    xi.joint_damping = j.at("joint_damping").get<double>();
    xi.mass_scales = j.at("mass_scales").get<std::array<double, 4>>();
    xi.delay = j.at("delay").get<double>();
    xi.pd_scale = j.at("pd_scale").get<double>();
    xi.validate();
    return xi;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("sim params: ") + e.what());
  }
}

nlohmann::json CalibrationReport::to_json() const {
  nlohmann::json top = nlohmann::json::array();
  for (const auto& c : top_k) {
    top.push_back({{"index", c.index},
                   {"params", sim_params_to_json(c.params)},
                   {"error", std::isfinite(c.error) ? nlohmann::json(c.error) : nlohmann::json()}});
  }
  nlohmann::json margin_json = nlohmann::json::object();
  for (const auto& [p, m] : margins.margins) {
    margin_json[std::string(calib_param_name(p))] = {m.first, m.second};
  }
  return {{"format_version", kFormatVersion},
          {"best", sim_params_to_json(best)},
          {"best_error", best_error},
          {"top_k", top},
          {"margins", margin_json},
          {"recommended_ranges", range_map_json(recommended_ranges)},
          {"search_space", range_map_json(space.ranges)},
          {"candidates", candidates},
          {"invalid", invalid},
          {"seed", seed},
          {"polished", polished}};
}

CalibrationReport CalibrationReport::from_json(const nlohmann::json& j) {
  try {
    CalibrationReport r;
    r.best = sim_params_from_json(j.at("best"));
    r.best_error = j.at("best_error").get<double>();
    for (const auto& c : j.at("top_k")) {
      Candidate cand;
      cand.index = c.at("index").get<std::size_t>();
      cand.params = sim_params_from_json(c.at("params"));
      cand.error = c.at("error").is_null() ? kInf : c.at("error").get<double>();
      r.top_k.push_back(cand);
    }
    r.margins.margins.clear();
    for (const auto& [key, value] : j.at("margins").items()) {
      const auto p = parse_calib_param(key);
      if (!p) throw InputError("unknown calibration parameter '" + key + "'");
      r.margins.margins[*p] = {value.at(0).get<double>(), value.at(1).get<double>()};
    }
    r.recommended_ranges = range_map_from_json(j.at("recommended_ranges"));
    r.space.ranges = range_map_from_json(j.at("search_space"));
    r.candidates = j.at("candidates").get<std::size_t>();
    r.invalid = j.at("invalid").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.polished = j.at("polished").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("calibration report: ") + e.what());
  }
}

CalibrationReport sweep(const RobotModel& model, const CalibrationDataset& data,
                        const SweepConfig& cfg) {
  cfg.space.validate();
  data.validate();
  if (cfg.candidates == 0) throw InputError("sweep needs at least one candidate");
  const auto active = cfg.space.active();
  const SobolSequence sobol(active.size(), cfg.seed);

  SimParams fixed;
  for (const auto& [p, r] : cfg.space.ranges) set_param(fixed, p, r.lo);

  std::vector<Candidate> all(cfg.candidates);
  parallel_for(cfg.candidates, cfg.workers, [&](std::size_t i) {
    Candidate& c = all[i];
    c.index = i;
    c.params = fixed;
    const auto u = sobol.point(i);
    for (std::size_t d = 0; d < active.size(); ++d) {
      const ParamRange& r = cfg.space.ranges.at(active[d]);
      set_param(c.params, active[d], r.lo + u[d] * (r.hi - r.lo));
    }
    c.error = discrepancy(model, c.params, data, cfg.plant);
  });

  std::stable_sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    return a.error < b.error || (a.error == b.error && a.index < b.index);
  });
  CalibrationReport report;
  report.invalid = static_cast<std::size_t>(
      std::count_if(all.begin(), all.end(), [](const Candidate& c) { return !std::isfinite(c.error); }));
  if (report.invalid == all.size()) {
    throw SweepError("sweep: all " + std::to_string(all.size()) + " candidates blew up");
  }
  report.best = all.front().params;
  report.best_error = all.front().error;

  if (cfg.polish) {
    SimParams cur = report.best;
    double cur_err = report.best_error;
    std::map<CalibParam, double> step;
    for (CalibParam p : active) {
      const ParamRange& r = cfg.space.ranges.at(p);
      step[p] = 0.05 * (r.hi - r.lo);
    }
    for (int round = 0; round < cfg.polish_rounds; ++round) {
      for (CalibParam p : active) {
        const ParamRange& r = cfg.space.ranges.at(p);
        for (double dir : {-1.0, 1.0}) {
          SimParams trial = cur;
          set_param(trial, p, clamp(get_param(cur, p) + dir * step[p], r.lo, r.hi));
          const double e = discrepancy(model, trial, data, cfg.plant);
          if (e < cur_err) {
            cur = trial;
            cur_err = e;
          }
        }
        step[p] *= 0.5;
      }
    }
    report.polished = cur_err < report.best_error;
    report.best = cur;
    report.best_error = cur_err;
  }

  all.resize(std::min(all.size(), std::max<std::size_t>(cfg.top_k, 1)));
  report.top_k = std::move(all);
  report.margins = cfg.margins;
  report.recommended_ranges = add_margins(report.best, cfg.margins);
  report.candidates = cfg.candidates;
  report.seed = cfg.seed;
  report.space = cfg.space;
  return report;
}

std::vector<ProfilePoint> error_profile(const RobotModel& model, const CalibrationDataset& data,
                                        CalibParam param, const std::vector<double>& grid,
                                        const SimParams& fixed, const PlantConfig& plant,
                                        std::size_t workers) {
  if (grid.empty()) throw InputError("profile grid is empty");
  if (!std::is_sorted(grid.begin(), grid.end())) throw InputError("profile grid must be sorted");
  std::vector<ProfilePoint> out(grid.size());
  parallel_for(grid.size(), workers, [&](std::size_t i) {
    SimParams xi = fixed;
    set_param(xi, param, grid[i]);
    out[i] = {grid[i], discrepancy(model, xi, data, plant)};
  });
  return out;
}

CsvTable profile_table(CalibParam param, const std::vector<ProfilePoint>& profile) {
  CsvTable t;
  t.header = {std::string(calib_param_name(param)), "error"};
  for (const auto& p : profile) t.rows.push_back({p.value, p.error});
  return t;
}

std::vector<double> parse_grid(std::string_view spec) {
  std::array<double, 3> v{};
  std::size_t start = 0;
  for (int k = 0; k < 3; ++k) {
    const std::size_t end = k < 2 ? spec.find(':', start) : spec.size();
    if (end == std::string_view::npos) throw InputError("grid must be lo:hi:step");
    const auto value = parse_double(spec.substr(start, end - start));
    if (!value) throw InputError("grid must be lo:hi:step");
    v[static_cast<std::size_t>(k)] = *value;
    start = end + 1;
  }
  const double lo = v[0], hi = v[1], step = v[2];
  if (!(step > 0) || hi < lo) throw InputError("grid needs lo <= hi and step > 0");
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> out;
  for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

ActionSequence make_probe_actions(const RobotModel& model, const ProbeConfig& cfg,
                                  std::uint64_t seed) {
  if (!(cfg.duration > 0) || cfg.components < 1 || !(cfg.amplitude >= 0)) {
    throw InputError("probe config: duration, components and amplitude must be positive");
  }
  Rng rng(derive_seed(seed, "calibration.probe"));
  const auto k = static_cast<std::size_t>(cfg.components);
  std::vector<std::vector<double>> freq(kNumJoints, std::vector<double>(k)),
      phase(kNumJoints, std::vector<double>(k));
  for (int j = 0; j < kNumJoints; ++j) {
    for (std::size_t c = 0; c < k; ++c) {
      freq[static_cast<std::size_t>(j)][c] = uniform(rng, cfg.min_frequency, cfg.max_frequency);
      phase[static_cast<std::size_t>(j)][c] = uniform(rng, 0.0, 2.0 * kPi);
    }
  }
  ActionSequence a;
  const auto n = static_cast<std::size_t>(std::lround(cfg.duration / a.period));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * a.period;
    JointVector q = model.nominal_quadrupedal_pose;
    for (int j = 0; j < kNumJoints; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        s += std::sin(2.0 * kPi * freq[static_cast<std::size_t>(j)][c] * t +
                      phase[static_cast<std::size_t>(j)][c]);
      }
      const auto& lim = model.limit(j);
      q[j] = clamp(q[j] + cfg.amplitude / static_cast<double>(k) * s, lim.min + cfg.limit_margin,
                   lim.max - cfg.limit_margin);
    }
    a.targets.push_back(q);
  }
  return a;
}

CalibrationDataset synthesize_dataset(const RobotModel& model, const SimParams& truth,
                                      const ProbeConfig& probe, double noise_sigma,
                                      std::uint64_t seed, const PlantConfig& plant) {
  CalibrationDataset d;
  d.actions = make_probe_actions(model, probe, seed);
  d.q_real = simulate_open_loop(model, truth, d.actions, plant);
  Rng rng(derive_seed(seed, "calibration.noise"));
  for (auto& q : d.q_real.q) {
    for (int j = 0; j < kNumJoints; ++j) q[j] += noise_sigma * standard_normal(rng);
  }
  d.metadata = {{"robot", model.name},
                {"source", "synthetic"},
                {"truth", sim_params_to_json(truth)},
                {"noise_sigma", noise_sigma},
                {"seed", seed},
                {"notes", "plant replay of a sum-of-sinusoids probe"}};
  return d;
}

}  // namespace bipedkit
