#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bipedkit/motor_plant.hpp"

namespace bipedkit {

/// Searchable scalar parameters. `mass_scale` multiplies all four segment masses.
enum class CalibParam { JointFriction, JointDamping, Delay, MassScale, PdScale };
inline constexpr std::array<CalibParam, 5> kAllCalibParams = {
    CalibParam::JointFriction, CalibParam::JointDamping, CalibParam::Delay, CalibParam::MassScale,
    CalibParam::PdScale};

std::string_view calib_param_name(CalibParam p);  // "joint_friction"
std::optional<CalibParam> parse_calib_param(std::string_view name);
double get_param(const SimParams& xi, CalibParam p);
void set_param(SimParams& xi, CalibParam p, double value);

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
  bool operator==(const ParamRange&) const = default;
};

/// Box searched by the sweep. Degenerate ranges (lo == hi) are held fixed
/// and take no sampling dimension.
struct SearchSpace {
  std::map<CalibParam, ParamRange> ranges = {
      {CalibParam::JointFriction, {0.0, 0.12}},
      {CalibParam::JointDamping, {0.0, 0.1}},
      {CalibParam::Delay, {0.0, 0.03}},
      {CalibParam::MassScale, {0.9, 1.1}},
      {CalibParam::PdScale, {1.0, 1.0}},
  };

  void validate() const;
  std::vector<CalibParam> active() const;
};

/// Recorded open-loop probe: actions at 50 Hz and joint readings at 200 Hz.
struct CalibrationDataset {
  ActionSequence actions;
  JointTrace q_real;
  nlohmann::json metadata = nlohmann::json::object();

  /// Sample counts must match: |q_real| = duration / trace period.
  void validate() const;
  /// Directory layout: actions.csv, q_real.csv, metadata.json.
  static CalibrationDataset load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;
};

/// Sum of squared joint differences over every sample and joint. Returns
/// +infinity when the plant blows up.
double discrepancy(const RobotModel& model, const SimParams& xi, const CalibrationDataset& data,
                   const PlantConfig& plant = {});
double trace_discrepancy(const JointTrace& a, const JointTrace& b);

/// Scrambled Sobol points in [0,1)^dim (dim <= 6), Joe-Kuo direction numbers
/// with a random digital shift per dimension.
class SobolSequence {
 public:
  SobolSequence(std::size_t dim, std::uint64_t seed);
  std::vector<double> point(std::uint64_t index) const;
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
  std::vector<std::array<std::uint32_t, 32>> directions_;
  std::vector<std::uint32_t> shift_;
};

struct MarginPolicy {
  // Absolute margins below and above the best value.
  std::map<CalibParam, std::pair<double, double>> margins = {
      {CalibParam::JointFriction, {0.025, 0.025}},
      {CalibParam::JointDamping, {0.02, 0.02}},
      {CalibParam::Delay, {0.01, 0.015}},
      {CalibParam::MassScale, {0.1, 0.1}},
      {CalibParam::PdScale, {0.2, 0.2}},
  };
};

/// [best - m_lo, best + m_hi] per parameter, lower end clipped at 0.
std::map<CalibParam, ParamRange> add_margins(const SimParams& best, const MarginPolicy& policy);

struct Candidate {
  std::size_t index = 0;  // position in the sampling sequence
  SimParams params;
  double error = 0.0;  // +inf when invalid
};

struct SweepConfig {
  std::size_t candidates = 8192;
  std::uint64_t seed = 0;
  std::size_t top_k = 10;
  std::size_t workers = 1;
  bool polish = false;  // coordinate descent around the best sample
  int polish_rounds = 6;
  SearchSpace space;
  MarginPolicy margins;
  PlantConfig plant;
};

struct CalibrationReport {
  SimParams best;
  double best_error = 0.0;
  std::vector<Candidate> top_k;
  MarginPolicy margins;
  std::map<CalibParam, ParamRange> recommended_ranges;
  std::size_t candidates = 0;
  std::size_t invalid = 0;
  std::uint64_t seed = 0;
  bool polished = false;
  SearchSpace space;

  nlohmann::json to_json() const;
  static CalibrationReport from_json(const nlohmann::json& j);
};

/// Error raised when every candidate of a sweep blew up.
struct SweepError : public Error {
  using Error::Error;
};

/// Evaluates `candidates` Sobol samples over the box; results sorted by
/// (error, index). Deterministic for a given seed regardless of workers.
CalibrationReport sweep(const RobotModel& model, const CalibrationDataset& data,
                        const SweepConfig& cfg);

struct ProfilePoint {
  double value = 0.0;
  double error = 0.0;
};

/// Discrepancy along one parameter with the others fixed at `fixed`.
std::vector<ProfilePoint> error_profile(const RobotModel& model, const CalibrationDataset& data,
                                        CalibParam param, const std::vector<double>& grid,
                                        const SimParams& fixed, const PlantConfig& plant = {},
                                        std::size_t workers = 1);
CsvTable profile_table(CalibParam param, const std::vector<ProfilePoint>& profile);

/// "lo:hi:step" inclusive of hi when it lies on the grid.
std::vector<double> parse_grid(std::string_view spec);

/// Synthetic probe: per joint, a sum of sinusoids about the nominal pose,
/// clipped inside the joint limits.
struct ProbeConfig {
  double duration = 30.0;
  double amplitude = 0.3;  // rad, peak of the sum
  int components = 3;
  double min_frequency = 0.2;  // Hz
  double max_frequency = 1.5;
  double limit_margin = 0.05;  // rad
};
ActionSequence make_probe_actions(const RobotModel& model, const ProbeConfig& cfg,
                                  std::uint64_t seed);

/// Plant replay at `truth` plus i.i.d. Gaussian reading noise.
CalibrationDataset synthesize_dataset(const RobotModel& model, const SimParams& truth,
                                      const ProbeConfig& probe, double noise_sigma,
                                      std::uint64_t seed, const PlantConfig& plant = {});

nlohmann::json sim_params_to_json(const SimParams& xi);
SimParams sim_params_from_json(const nlohmann::json& j);

}  // namespace bipedkit
