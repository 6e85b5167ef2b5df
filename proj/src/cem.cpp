#include "bipedkit/cem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bipedkit/common.hpp"
#include "bipedkit/parallel.hpp"
#include "bipedkit/rng.hpp"

namespace bipedkit {

void CemConfig::validate() const {
  if (population < 1 || elites < 1 || elites > population) {
    throw ValidationError("cem: need 1 <= elites <= population");
  }
  if (iterations < 0) throw ValidationError("cem: iterations must be >= 0");
  if (!(init_std > 0 && min_std >= 0 && extra_noise >= 0 && extra_noise_decay >= 0 &&
        extra_noise_decay <= 1)) {
    throw ValidationError("cem: invalid noise settings");
  }
}

namespace {

struct Scored {
  std::vector<double> x;
  double value;
  long order;  // global draw index, for deterministic ties
};

bool better(const Scored& a, const Scored& b) {
  const bool fa = std::isfinite(a.value), fb = std::isfinite(b.value);
  if (fa != fb) return fa;
  if (fa && a.value != b.value) return a.value > b.value;
  return a.order < b.order;
}

}  // namespace

CemResult cem_optimize(const std::function<double(const std::vector<double>&)>& objective,
                       const std::vector<double>& init_mean, const CemConfig& config) {
  config.validate();
  const std::size_t dim = init_mean.size();
  if (dim == 0) throw InputError("cem: empty parameter vector");
  Rng rng(derive_seed(config.seed, "cem.samples"));

  std::vector<double> mean = init_mean;
  std::vector<double> stdev(dim, config.init_std);
  std::vector<Scored> archive;
  CemResult result;
  result.best_value = -std::numeric_limits<double>::infinity();
  double extra = config.extra_noise;
  long order = 0;

  for (int it = 0; it < config.iterations; ++it) {
    std::vector<Scored> batch(static_cast<std::size_t>(config.population));
    for (auto& s : batch) {
      s.x.resize(dim);
      for (std::size_t d = 0; d < dim; ++d) s.x[d] = mean[d] + stdev[d] * standard_normal(rng);
      s.order = order++;
    }
    parallel_for(batch.size(), config.workers,
                 [&](std::size_t i) { batch[i].value = objective(batch[i].x); });
    result.evaluations += static_cast<long>(batch.size());

    CemIteration rec;
    double finite_sum = 0.0;
    int finite_n = 0;
    for (const auto& s : batch) {
      if (std::isfinite(s.value)) {
        finite_sum += s.value;
        ++finite_n;
      }
    }
    rec.sample_mean = finite_n ? finite_sum / finite_n : -std::numeric_limits<double>::infinity();

    // The sampling distribution is refit to the best fresh candidates; the
    // archive keeps the best candidates seen so far.
    std::sort(batch.begin(), batch.end(), better);
    const std::size_t e = static_cast<std::size_t>(config.elites);
    std::vector<Scored> pool = std::move(archive);
    pool.insert(pool.end(), batch.begin(), batch.begin() + static_cast<long>(e));
    std::sort(pool.begin(), pool.end(), better);
    pool.resize(e);
    archive = std::move(pool);

    if (std::isfinite(archive.front().value) && archive.front().value > result.best_value) {
      result.best_value = archive.front().value;
      result.best_params = archive.front().x;
    }

    const double n = static_cast<double>(e);
    double value_sum = 0.0;
    for (const auto& a : archive) value_sum += a.value;
    rec.elite_mean = value_sum / n;
    rec.best = result.best_value;
    double std_sum = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      double m = 0.0;
      for (std::size_t i = 0; i < e; ++i) m += batch[i].x[d];
      m /= n;
      double var = 0.0;
      for (std::size_t i = 0; i < e; ++i) var += square(batch[i].x[d] - m);
      var /= n;
      mean[d] = m;
      stdev[d] = std::max(std::sqrt(var + extra), config.min_std);
      std_sum += stdev[d];
    }
    rec.mean_std = std_sum / static_cast<double>(dim);
    extra *= config.extra_noise_decay;
    result.history.push_back(rec);
  }
  if (result.best_params.empty()) {
    result.best_params = init_mean;
    result.best_value = config.iterations > 0 ? -std::numeric_limits<double>::infinity()
                                              : objective(init_mean);
  }
  result.mean = mean;
  return result;
}

}  // namespace bipedkit
