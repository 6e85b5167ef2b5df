#include "cli.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include "bipedkit/calibration.hpp"
#include "bipedkit/instruct.hpp"
#include "bipedkit/parallel.hpp"
#include "bipedkit/planar_env.hpp"
#include "bipedkit/randomization.hpp"
#include "bipedkit/retarget.hpp"
#include "bipedkit/reward_engine.hpp"
#include "bipedkit/rng.hpp"
#include "bipedkit/target_gen.hpp"
#include "manifest.hpp"

#include <CLI11.hpp>

namespace bipedkit {

namespace fs = std::filesystem;

namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
  RunManifest manifest;
  std::string robot_path;
  std::string out_path;
  std::string manifest_path;

  const RobotModel& robot() {
    if (robot_path.empty()) return RobotModel::standin();
    if (!loaded_robot) {
      manifest.configs["robot"] = robot_path;
      manifest.add_input(robot_path);
      loaded_robot = RobotModel::load(robot_path);
    }
    return *loaded_robot;
  }

  void input(const std::string& role, const fs::path& path) {
    manifest.configs[role] = path.generic_string();
    manifest.add_input(path);
  }

  /// Writes the primary output to --out, or to `out` when no path was given.
  void emit(std::string_view text) {
    if (out_path.empty()) {
      out << text;
      return;
    }
    write_file(out_path, text);
    manifest.add_output(out_path);
  }

  std::optional<RobotModel> loaded_robot;
};

nlohmann::json load_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string csv_text(const CsvTable& t) { return to_csv(t); }

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string truth;
  double friction = 0.055, damping = 0.04, delay = 0.015, mass_scale = 1.0;
  double duration = 30.0, noise = 0.002;
};

void cmd_synth(Context& c, const SynthArgs& a) {
  if (c.out_path.empty()) throw InputError("synth: --out <dir> is required");
  SimParams truth;
  if (!a.truth.empty()) {
    c.input("truth", a.truth);
    truth = sim_params_from_json(load_json(a.truth));
  } else {
    truth.joint_friction = a.friction;
    truth.joint_damping = a.damping;
    truth.delay = a.delay;
    truth.mass_scales.fill(a.mass_scale);
  }
  truth.validate();
  ProbeConfig probe;
  probe.duration = a.duration;
  const CalibrationDataset data =
      synthesize_dataset(c.robot(), truth, probe, a.noise, c.manifest.seed);
  data.save(c.out_path);
  for (const char* f : {"actions.csv", "q_real.csv", "metadata.json"}) {
    c.manifest.add_output(fs::path(c.out_path) / f);
  }
}

struct CalibrateArgs {
  std::string dataset;
  std::size_t candidates = 8192;
  std::size_t top_k = 10;
  bool polish = false;
};

void cmd_calibrate(Context& c, const CalibrateArgs& a) {
  c.input("dataset", a.dataset);
  const CalibrationDataset data = CalibrationDataset::load(a.dataset);
  SweepConfig cfg;
  cfg.candidates = a.candidates;
  cfg.top_k = a.top_k;
  cfg.polish = a.polish;
  cfg.seed = c.manifest.seed;
  cfg.workers = c.manifest.workers;
  const CalibrationReport report = sweep(c.robot(), data, cfg);
  c.emit(report.to_json().dump(2) + "\n");
}

struct ProfileArgs {
  std::string dataset, param, grid, report;
};

void cmd_profile(Context& c, const ProfileArgs& a) {
  const auto param = parse_calib_param(a.param);
  if (!param) throw InputError("profile: unknown parameter '" + a.param + "'");
  const std::vector<double> grid = parse_grid(a.grid);
  c.input("dataset", a.dataset);
  const CalibrationDataset data = CalibrationDataset::load(a.dataset);
  SimParams fixed;
  if (!a.report.empty()) {
    c.input("report", a.report);
    fixed = CalibrationReport::from_json(load_json(a.report)).best;
  }
  const auto profile =
      error_profile(c.robot(), data, *param, grid, fixed, PlantConfig{}, c.manifest.workers);
  c.emit(csv_text(profile_table(*param, profile)));
}

struct RandomizeArgs {
  std::string report, table, table_out;
  int episodes = 1;
};

void cmd_randomize(Context& c, const RandomizeArgs& a) {
  if (a.episodes < 0) throw InputError("randomize: --episodes must be >= 0");
  RandomizationTable base = RandomizationTable::defaults();
  if (!a.table.empty()) {
    c.input("table", a.table);
    base = RandomizationTable::load(a.table);
  }
  std::optional<CalibrationReport> report;
  if (!a.report.empty()) {
    c.input("report", a.report);
    report = CalibrationReport::from_json(load_json(a.report));
  }
  const RandomizationTable table = table_from_report(report, base, c.robot());
  table.validate_complete();
  if (!a.table_out.empty()) {
    write_file(a.table_out, table.serialize());
    c.manifest.add_output(a.table_out);
  }
  std::string lines;
  for (int e = 0; e < a.episodes; ++e) {
    const auto seed = derive_seed(c.manifest.seed, static_cast<std::uint64_t>(e));
    nlohmann::json j = sample_env_params(table, seed).to_json();
    j["episode"] = e;
    lines += j.dump() + "\n";
  }
  c.emit(lines);
}

struct CurriculumArgs {
  std::string config;
  double duration = 60.0, dt = 0.02;
};

void cmd_curriculum(Context& c, const CurriculumArgs& a) {
  CurriculumConfig cfg;
  if (!a.config.empty()) {
    c.input("curriculum", a.config);
    cfg = load_curriculum_config(a.config);
  }
  c.emit(generate_curriculum(c.robot(), cfg, c.manifest.seed, a.duration, a.dt).to_csv());
}

struct RetargetArgs {
  std::string skeleton, preset = "boxing";
  std::optional<double> scale, period;
};

void cmd_retarget(Context& c, const RetargetArgs& a) {
  RetargetConfig cfg;
  if (a.preset == "boxing") {
    cfg = RetargetConfig::boxing();
  } else if (a.preset == "ballet") {
    cfg = RetargetConfig::ballet();
  } else {
    throw InputError("retarget: unknown preset '" + a.preset + "' (boxing, ballet)");
  }
  if (a.scale) cfg.scale = a.scale;
  if (a.period) cfg.sample_period = *a.period;
  cfg.validate();
  c.input("skeleton", a.skeleton);
  c.emit(build_track(load_skeleton_jsonl(a.skeleton), cfg, c.robot()).to_csv());
}

struct InstructArgs {
  std::string instruction, mock, rules, prompts, transcript;
  double duration = 1.0, period = 0.02;
};

void cmd_instruct(Context& c, const InstructArgs& a) {
  const fs::path rules_path =
      a.rules.empty() ? fs::path(BIPEDKIT_ASSET_DIR) / "instruct" / "rules.json" : fs::path(a.rules);
  c.input("rules", rules_path);
  const RuleSet rules = RuleSet::load(rules_path, c.robot());
  PromptSet prompts = PromptSet::builtin();
  if (!a.prompts.empty()) {
    c.input("prompts", a.prompts);
    prompts = PromptSet::load(a.prompts);
  }
  std::unique_ptr<ChatBackend> backend;
  if (!a.mock.empty()) {
    auto mock = std::make_unique<MockBackend>(a.mock, a.instruction);
    c.input("transcripts", mock->directory());
    backend = std::move(mock);
  } else {
    HttpBackendConfig cfg = HttpBackendConfig::from_env();
    c.manifest.configs["endpoint"] = cfg.endpoint;
    c.manifest.configs["model"] = cfg.model;
    backend = std::make_unique<HttpBackend>(std::move(cfg));
  }
  InstructOptions options;
  options.default_duration = a.duration;
  options.period = a.period;
  const InstructResult r =
      run_instruct(a.instruction, *backend, prompts, rules, c.robot(), options);
  if (!a.transcript.empty()) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& m : r.transcript) t.push_back({{"role", m.role}, {"content", m.content}});
    write_file(a.transcript, t.dump(2) + "\n");
    c.manifest.add_output(a.transcript);
  }
  c.emit(r.track.to_csv());
}

struct PlanarArgs {
  std::string reward, env, trajectory;
  int iters = 200, population = 64, elites = 8, episodes = 1, knots = 5;
  double schedule = 1.0;
};

void cmd_planar_train(Context& c, const PlanarArgs& a) {
  c.input("reward", a.reward);
  const RewardConfig reward = RewardConfig::load(a.reward);
  PlanarConfig env;
  if (!a.env.empty()) {
    c.input("env", a.env);
    env = PlanarConfig::from_json(load_json(a.env));
  }
  const PlanarModel model(c.robot(), env);
  PlanarTrainConfig cfg;
  cfg.cem.iterations = a.iters;
  cfg.cem.population = a.population;
  cfg.cem.elites = a.elites;
  cfg.cem.seed = c.manifest.seed;
  cfg.cem.workers = c.manifest.workers;
  cfg.episodes = a.episodes;
  cfg.knots = a.knots;
  cfg.schedule_time = a.schedule;
  const PlanarTrainResult r = planar_train(model, reward, cfg);

  nlohmann::json j = r.policy.to_json();
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : r.cem.history) {
    history.push_back({{"elite_mean", h.elite_mean}, {"best", h.best},
                       {"sample_mean", h.sample_mean}, {"mean_std", h.mean_std}});
  }
  j["training"] = {{"best_return", r.cem.best_value},
                   {"evaluations", r.cem.evaluations},
                   {"history", history},
                   {"env", env.to_json()}};
  const auto& ev = r.evaluation;
  j["evaluation"] = {{"return", ev.undiscounted},
                     {"discounted_return", ev.discounted},
                     {"steps", ev.steps},
                     {"termination", std::string(termination_name(ev.reason))},
                     {"final_height", ev.final_height},
                     {"final_tilt", ev.final_tilt},
                     {"stood_up", stood_up(ev, reward)}};
  if (!a.trajectory.empty()) {
    write_file(a.trajectory, to_csv(trajectory_table(model, ev)));
    c.manifest.add_output(a.trajectory);
  }
  c.emit(j.dump(2) + "\n");
}

struct AuditArgs {
  std::string states, config;
};

void cmd_reward_audit(Context& c, const AuditArgs& a) {
  RewardConfig cfg;
  if (!a.config.empty()) {
    c.input("reward", a.config);
    cfg = RewardConfig::load(a.config);
  }
  c.input("states", a.states);
  const CsvTable states = load_csv(a.states);
  CsvTable t;
  t.header = {"row"};
  for (const auto& n : RewardBreakdown::column_names()) t.header.push_back(n);
  t.header.push_back("done");
  t.header.push_back("termination");
  for (std::size_t i = 0; i < states.rows.size(); ++i) {
    const EnvState s = env_state_from_row(states, i);
    const RewardBreakdown b = total_reward(s, cfg, c.robot());
    const TerminationVerdict v = check_termination(s, cfg, c.robot());
    std::vector<double> row = {static_cast<double>(i)};
    for (double x : b.values()) row.push_back(x);
    row.push_back(v.done ? 1.0 : 0.0);
    row.push_back(static_cast<double>(v.reason));
    t.rows.push_back(std::move(row));
  }
  c.emit(to_csv(t));
}

void write_manifest(Context& c) {
  const std::string text = c.manifest.to_json().dump(2) + "\n";
  if (!c.manifest_path.empty()) {
    write_file(c.manifest_path, text);
  } else if (!c.out_path.empty()) {
    write_file(c.out_path + ".manifest.json", text);
  } else {
    c.err << nlohmann::json{{"manifest", c.manifest.to_json()}}.dump() << "\n";
  }
}

nlohmann::json diagnostic(const std::string& kind, const std::exception& e) {
  nlohmann::json d = {{"level", "error"}, {"kind", kind}, {"message", e.what()}};
  if (const auto* p = dynamic_cast<const ParseError*>(&e)) {
    d["line"] = p->line;
    d["column"] = p->column;
  }
  if (const auto* s = dynamic_cast<const SimulationError*>(&e)) d["time"] = s->time;
  if (const auto* f = dynamic_cast<const FrameRejected*>(&e)) {
    d["frame"] = f->frame;
    nlohmann::json v = nlohmann::json::array();
    for (const auto& x : f->violations) v.push_back({{"rule", x.rule}, {"message", x.message}});
    d["violations"] = v;
  }
  return d;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bipedal-mode quadruped toolkit", "bipedkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string("bipedkit ") + kToolkitVersion +
                                        " (format " + std::to_string(kFormatVersion) + ")");

  Context c{out, err, {}, {}, {}, {}, {}};
  c.manifest.workers = default_workers();
  app.add_option("--seed", c.manifest.seed, "Root seed; every random stream derives from it");
  app.add_option("--workers", c.manifest.workers, "Parallel evaluation threads")
      ->check(CLI::PositiveNumber);
  app.add_option("--robot", c.robot_path, "Robot description (default: built-in stand-in)");
  app.add_option("--manifest", c.manifest_path, "Where to write the run manifest");

  std::function<void()> action;
  auto sub = [&](const char* name, const char* help, bool out_required = false) {
    CLI::App* s = app.add_subcommand(name, help);
    auto* o = s->add_option("--out", c.out_path, "Output path (default: stdout)");
    if (out_required) o->required();
    return s;
  };

  SynthArgs synth;
  auto* s_synth = sub("synth", "Synthesize a calibration dataset from known parameters", true);
  s_synth->add_option("--truth", synth.truth, "SimParams JSON");
  s_synth->add_option("--friction", synth.friction);
  s_synth->add_option("--damping", synth.damping);
  s_synth->add_option("--delay", synth.delay);
  s_synth->add_option("--mass-scale", synth.mass_scale);
  s_synth->add_option("--duration", synth.duration, "Probe length (s)");
  s_synth->add_option("--noise", synth.noise, "Reading noise std (rad)");
  s_synth->callback([&] { action = [&] { cmd_synth(c, synth); }; });

  CalibrateArgs calib;
  auto* s_calib = sub("calibrate", "Sweep simulator parameters against a recorded probe");
  s_calib->add_option("--dataset", calib.dataset)->required();
  s_calib->add_option("--candidates", calib.candidates);
  s_calib->add_option("--top-k", calib.top_k);
  s_calib->add_flag("--polish", calib.polish, "Coordinate-descent refinement of the best sample");
  s_calib->callback([&] { action = [&] { cmd_calibrate(c, calib); }; });

  ProfileArgs prof;
  auto* s_prof = sub("profile", "Discrepancy along one parameter");
  s_prof->add_option("--dataset", prof.dataset)->required();
  s_prof->add_option("--param", prof.param)->required();
  s_prof->add_option("--grid", prof.grid, "lo:hi:step")->required();
  s_prof->add_option("--report", prof.report, "Hold the other parameters at this report's best");
  s_prof->callback([&] { action = [&] { cmd_profile(c, prof); }; });

  RandomizeArgs rand;
  auto* s_rand = sub("randomize", "Per-episode physics draws as JSON lines");
  s_rand->add_option("--report", rand.report, "Calibration report narrowing the searched rows");
  s_rand->add_option("--table", rand.table, "Base randomization table");
  s_rand->add_option("--table-out", rand.table_out, "Write the effective table");
  s_rand->add_option("--episodes", rand.episodes);
  s_rand->callback([&] { action = [&] { cmd_randomize(c, rand); }; });

  CurriculumArgs cur;
  auto* s_cur = sub("gen-curriculum", "Offline motion-target curriculum track");
  s_cur->add_option("--config", cur.config);
  s_cur->add_option("--duration", cur.duration, "s");
  s_cur->add_option("--dt", cur.dt, "s");
  s_cur->callback([&] { action = [&] { cmd_curriculum(c, cur); }; });

  RetargetArgs ret;
  auto* s_ret = sub("retarget", "Human skeleton clip to front-toe targets");
  s_ret->add_option("--skeleton", ret.skeleton, "JSON-lines skeleton clip")->required();
  s_ret->add_option("--preset", ret.preset, "boxing or ballet");
  s_ret->add_option("--scale", ret.scale);
  s_ret->add_option("--period", ret.period, "Sample period (s)");
  s_ret->callback([&] { action = [&] { cmd_retarget(c, ret); }; });

  InstructArgs ins;
  auto* s_ins = sub("instruct", "Natural-language instruction to a target track");
  s_ins->add_option("instruction", ins.instruction)->required();
  s_ins->add_option("--mock", ins.mock, "Directory of canned replies instead of a live backend");
  s_ins->add_option("--rules", ins.rules, "Kinematic rule file");
  s_ins->add_option("--prompts", ins.prompts, "Prompt template directory");
  s_ins->add_option("--transcript", ins.transcript, "Write the conversation as JSON");
  s_ins->add_option("--duration", ins.duration, "Default key-frame duration (s)");
  s_ins->add_option("--period", ins.period, "Track sample period (s)");
  s_ins->callback([&] { action = [&] { cmd_instruct(c, ins); }; });

  PlanarArgs pl;
  auto* s_pl = sub("planar-train", "Cross-entropy search for a planar stand-up policy");
  s_pl->add_option("--reward", pl.reward)->required();
  s_pl->add_option("--env", pl.env, "PlanarConfig JSON");
  s_pl->add_option("--iters", pl.iters);
  s_pl->add_option("--population", pl.population);
  s_pl->add_option("--elites", pl.elites);
  s_pl->add_option("--episodes", pl.episodes, "Rollouts averaged per evaluation");
  s_pl->add_option("--knots", pl.knots);
  s_pl->add_option("--schedule", pl.schedule, "Open-loop schedule length (s)");
  s_pl->add_option("--trajectory", pl.trajectory, "CSV of the best policy's rollout");
  s_pl->callback([&] { action = [&] { cmd_planar_train(c, pl); }; });

  AuditArgs audit;
  auto* s_audit = sub("reward-audit", "Reward breakdown for each row of a state table");
  s_audit->add_option("--states", audit.states)->required();
  s_audit->add_option("--config", audit.config);
  s_audit->callback([&] { action = [&] { cmd_reward_audit(c, audit); }; });

  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (!a.empty() && a[0] == '-') {
      // Skip the value of a global option written as two tokens.
      const CLI::Option* opt = a.find('=') == std::string::npos ? app.get_option_no_throw(a) : nullptr;
      if (opt != nullptr && opt->get_type_size() != 0) ++i;
      continue;
    }
    if (a.empty()) continue;
    if (app.get_subcommand_no_throw(a) == nullptr) {
      err << nlohmann::json{{"level", "error"}, {"kind", "usage"},
                            {"message", "unknown subcommand '" + a + "'"}}.dump()
          << "\n";
      err << app.help();
      return kExitInput;
    }
    break;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    return code;
  } catch (const CLI::ParseError& e) {
    err << nlohmann::json{{"level", "error"}, {"kind", "usage"}, {"message", e.what()}}.dump()
        << "\n";
    err << app.help();
    return kExitInput;
  }

  for (const auto* s : app.get_subcommands()) c.manifest.subcommand = s->get_name();
  c.manifest.argv = args;
  int code = kExitOk;
  try {
    action();
  } catch (const TransportError& e) {
    err << diagnostic("transport", e).dump() << "\n";
    c.manifest.error = e.what();
    code = kExitTransport;
  } catch (const InputError& e) {
    err << diagnostic("input", e).dump() << "\n";
    c.manifest.error = e.what();
    code = kExitInput;
  } catch (const std::exception& e) {
    err << diagnostic("failure", e).dump() << "\n";
    c.manifest.error = e.what();
    code = kExitFailure;
  }
  c.manifest.exit_code = code;
  try {
    write_manifest(c);
  } catch (const std::exception& e) {
    err << diagnostic("manifest", e).dump() << "\n";
    if (code == kExitOk) code = kExitFailure;
  }
  return code;
}

}  // namespace bipedkit
