#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace bipedkit {

struct CemConfig {
  int population = 64;
  int elites = 8;
  int iterations = 200;
  double init_std = 0.5;
  double min_std = 1e-6;
  // Extra variance added to the refit, decaying geometrically per iteration.
  double extra_noise = 0.05;
  double extra_noise_decay = 0.95;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
};

struct CemIteration {
  double elite_mean = 0.0;  // mean objective of the archived elites
  double best = 0.0;        // best objective seen so far
  double sample_mean = 0.0; // mean objective of this iteration's fresh samples
  double mean_std = 0.0;    // average sampling std after the refit
};

struct CemResult {
  std::vector<double> best_params;
  double best_value = 0.0;
  std::vector<double> mean;  // final sampling mean
  std::vector<CemIteration> history;
  long evaluations = 0;
};

/// Maximises `objective` with the cross-entropy method. Each iteration draws
/// `population` fresh candidates from a diagonal Gaussian and refits it to
/// the best `elites` of them. An archive of the best `elites` candidates seen
/// so far supplies the recorded elite mean, which therefore never decreases.
/// Candidates are scored in parallel; ties break by draw order. Non-finite
/// scores rank last.
CemResult cem_optimize(const std::function<double(const std::vector<double>&)>& objective,
                       const std::vector<double>& init_mean, const CemConfig& config);

}  // namespace bipedkit
