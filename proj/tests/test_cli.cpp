#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "bipedkit/instruct.hpp"
#include "bipedkit/reward_engine.hpp"
#include "cli.hpp"
#include "manifest.hpp"
#include "support/random_states.hpp"

using namespace bipedkit;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("bipedkit_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::string kAssets = BIPEDKIT_ASSET_DIR;

nlohmann::json manifest_from_err(const std::string& err) {
  std::istringstream lines(err);
  std::string line;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.contains("manifest")) return j["manifest"];
  }
  return {};
}

}  // namespace

TEST_CASE("version, usage and unknown subcommands") {
  const Run v = run({"--version"});
  CHECK(v.code == kExitOk);
  CHECK(v.out.find("0.3.0") != std::string::npos);
  CHECK(v.out.find("format 1") != std::string::npos);

  const Run unknown = run({"fly"});
  CHECK(unknown.code == kExitInput);
  CHECK(unknown.err.find("unknown subcommand 'fly'") != std::string::npos);
  CHECK(unknown.err.find("Usage:") != std::string::npos);

  CHECK(run({}).code == kExitInput);
  CHECK(run({"calibrate"}).code == kExitInput);  // --dataset is required
}

TEST_CASE("missing dataset names the path") {
  const Run r = run({"calibrate", "--dataset", "/no/such/dataset"});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("/no/such/dataset") != std::string::npos);
  const auto m = manifest_from_err(r.err);
  CHECK(m["exit_code"] == 2);
  CHECK(m["subcommand"] == "calibrate");
}

TEST_CASE("instruct with mock transcripts prints the target track") {
  const std::string mock = kAssets + "/transcripts";
  const Run r = run({"instruct", "--mock", mock, "wave left hand"});
  REQUIRE(r.code == kExitOk);
  MockBackend backend(mock, "wave left hand");
  const auto expected = run_instruct("wave left hand", backend, PromptSet::builtin(),
                                     RuleSet::load(kAssets + "/instruct/rules.json",
                                                   RobotModel::standin()),
                                     RobotModel::standin());
  CHECK(r.out == expected.track.to_csv());
  CHECK(TargetTrack::parse(r.out).rows.size() == 201);

  const auto m = manifest_from_err(r.err);
  CHECK(m["subcommand"] == "instruct");
  CHECK(m["inputs"].size() == 3);  // rules plus two replies
  CHECK(run({"instruct", "--mock", mock, "wave left hand"}).out == r.out);
}

TEST_CASE("instruct rejection and backend errors map to exit codes") {
  const std::string data = std::string(BIPEDKIT_TEST_DATA) + "/transcripts";
  const Run rejected = run({"instruct", "--mock", data, "wave left hand too far"});
  CHECK(rejected.code == kExitInput);
  CHECK(rejected.err.find("(0.1, 0.57)") != std::string::npos);
  CHECK(rejected.err.find("\"frame\":2") != std::string::npos);

  CHECK(run({"instruct", "--mock", data, "no such instruction"}).code == kExitInput);

  unsetenv("BIPEDKIT_LLM_ENDPOINT");
  unsetenv("BIPEDKIT_LLM_MODEL");
  CHECK(run({"instruct", "wave left hand"}).code == kExitInput);

  setenv("BIPEDKIT_LLM_ENDPOINT", "http://127.0.0.1:1/v1/chat/completions", 1);
  setenv("BIPEDKIT_LLM_MODEL", "test", 1);
  const Run down = run({"instruct", "wave left hand"});
  CHECK(down.code == kExitTransport);
  CHECK(down.err.find("\"kind\":\"transport\"") != std::string::npos);
  unsetenv("BIPEDKIT_LLM_ENDPOINT");
  unsetenv("BIPEDKIT_LLM_MODEL");
}

TEST_CASE("reward-audit reproduces the library breakdowns") {
  const fs::path dir = scratch("audit");
  Rng rng(derive_seed(1, "audit"));
  CsvTable states;
  states.header = env_state_columns();
  std::vector<EnvState> originals;
  for (int i = 0; i < 20; ++i) {
    originals.push_back(support::random_state(rng, RobotModel::standin()));
    states.rows.push_back(env_state_row(originals.back()));
  }
  write_file(dir / "states.csv", to_csv(states));
  const Run r = run({"reward-audit", "--states", (dir / "states.csv").string(), "--config",
                     kAssets + "/config/reward.cfg", "--out", (dir / "audit.csv").string()});
  REQUIRE(r.code == kExitOk);
  const CsvTable audit = load_csv(dir / "audit.csv");
  REQUIRE(audit.rows.size() == originals.size());
  const RewardConfig cfg = RewardConfig::load(kAssets + "/config/reward.cfg");
  const auto cols = RewardBreakdown::column_names();
  const auto total_col = static_cast<std::size_t>(
      std::find(audit.header.begin(), audit.header.end(), "total") - audit.header.begin());
  REQUIRE(total_col < audit.header.size());
  for (std::size_t i = 0; i < originals.size(); ++i) {
    const EnvState back = env_state_from_row(states, i);
    CHECK(audit.rows[i][total_col] == total_reward(back, cfg, RobotModel::standin()).total);
  }
  const auto m = nlohmann::json::parse(read_file(dir / "audit.csv.manifest.json"));
  CHECK(m["outputs"][(dir / "audit.csv").generic_string()] == sha256_file(dir / "audit.csv"));
}

TEST_CASE("calibration pipeline is reproducible from its manifest") {
  const fs::path dir = scratch("calib");
  const std::string data = (dir / "data").string();
  REQUIRE(run({"--seed", "7", "synth", "--out", data, "--duration", "2"}).code == kExitOk);
  CHECK(fs::exists(dir / "data.manifest.json"));

  const std::string report = (dir / "report.json").string();
  const Run c = run({"calibrate", "--dataset", data, "--candidates", "32", "--seed", "3",
                     "--workers", "2", "--out", report});
  REQUIRE(c.code == kExitOk);
  const std::string first = read_file(report);

  const auto manifest = RunManifest::from_json(nlohmann::json::parse(read_file(report + ".manifest.json")));
  CHECK(manifest.seed == 3);
  CHECK(manifest.workers == 2);
  CHECK(manifest.inputs.size() == 3);
  CHECK(manifest.stale_inputs().empty());
  // Re-running the recorded arguments yields the same bytes.
  fs::remove(report);
  REQUIRE(run(manifest.argv).code == kExitOk);
  CHECK(read_file(report) == first);

  const Run p = run({"profile", "--dataset", data, "--param", "joint_friction", "--grid",
                     "0:0.1:0.05", "--report", report});
  CHECK(p.code == kExitOk);
  CHECK(parse_csv(p.out).rows.size() == 3);
  CHECK(run({"profile", "--dataset", data, "--param", "stiffness", "--grid", "0:1:1"}).code ==
        kExitInput);

  const Run rz = run({"randomize", "--report", report, "--episodes", "3", "--table-out",
                      (dir / "table.cfg").string()});
  CHECK(rz.code == kExitOk);
  CHECK(std::count(rz.out.begin(), rz.out.end(), '\n') == 3);
  CHECK(fs::exists(dir / "table.cfg"));

  write_file(dir / "data" / "metadata.json", "{}\n");
  CHECK(manifest.stale_inputs().size() == 1);
}

TEST_CASE("curriculum and retarget outputs") {
  const Run a = run({"--seed", "4", "gen-curriculum", "--duration", "12"});
  const Run b = run({"--seed", "4", "gen-curriculum", "--duration", "12"});
  const Run c = run({"--seed", "5", "gen-curriculum", "--duration", "12"});
  REQUIRE(a.code == kExitOk);
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);
  CHECK(TargetTrack::parse(a.out).rows.size() == 600);  // 12 s at 0.02 s, end excluded

  const Run r = run({"retarget", "--skeleton", kAssets + "/skeletons/jab.jsonl"});
  REQUIRE(r.code == kExitOk);
  CHECK(TargetTrack::parse(r.out).rows.size() == 21);  // 2 s at 0.1 s
  CHECK(run({"retarget", "--skeleton", kAssets + "/skeletons/jab.jsonl", "--preset", "tango"})
            .code == kExitInput);
}

TEST_CASE("planar-train writes a policy") {
  const fs::path dir = scratch("planar");
  const std::string out = (dir / "policy.json").string();
  const Run r = run({"planar-train", "--reward", kAssets + "/config/planar_reward.cfg", "--iters",
                     "2", "--population", "6", "--elites", "2", "--out", out, "--trajectory",
                     (dir / "traj.csv").string()});
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(read_file(out));
  CHECK(j["training"]["history"].size() == 2);
  CHECK(j["evaluation"]["steps"].get<int>() >= 1);
  CHECK(load_csv(dir / "traj.csv").rows.size() == j["evaluation"]["steps"].get<std::size_t>());
  CHECK(run({"planar-train", "--reward", kAssets + "/config/planar_reward.cfg", "--iters", "1",
             "--population", "2", "--elites", "3"})
            .code == kExitInput);
}

TEST_CASE("sha256 matches the published test vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
