#include "tripled/simgen.hpp"

#include <cmath>
#include <string>

#include "tripled/rng.hpp"

namespace tripled {

Eigen::VectorXd default_covariate_beta(int k_covariates) {
  Eigen::VectorXd beta(k_covariates);
  double slope = 1.5;
  for (int k = 0; k < k_covariates; ++k) {
    beta(k) = slope;
    slope *= -0.6;
  }
  return beta;
}

namespace {

void check_config(const DgpConfig& config) {
  if (config.n_units_per_cell < 1) {
    raise(ErrorKind::ConfigInvalid, "n_units_per_cell must be at least 1");
  }
  if (config.n_treated_per_cell && *config.n_treated_per_cell < 1) {
    raise(ErrorKind::ConfigInvalid, "n_treated_per_cell must be at least 1");
  }
  if (config.periods.size() < 2) {
    raise(ErrorKind::ConfigInvalid, "need at least 2 periods");
  }
  for (std::size_t i = 1; i < config.periods.size(); ++i) {
    if (config.periods[i] <= config.periods[i - 1]) {
      raise(ErrorKind::ConfigInvalid, "periods must be strictly increasing");
    }
  }
  if (config.periods.front() >= config.post_start ||
      config.periods.back() < config.post_start) {
    raise(ErrorKind::ConfigInvalid, "post_start must split periods into pre and post");
  }
  if (config.noise_sd < 0.0) raise(ErrorKind::ConfigInvalid, "noise_sd must be >= 0");
  if (config.k_covariates < 0) raise(ErrorKind::ConfigInvalid, "k_covariates must be >= 0");
  if (config.beta_by_cell) {
    for (const auto& [key, beta] : *config.beta_by_cell) {
      if (beta.size() != config.k_covariates) {
        raise(ErrorKind::ConfigInvalid, "beta_by_cell vectors must have k_covariates entries");
      }
    }
  }
}

// deterministic time effect; nearly linear so its first differences stay
// small next to the noise scale
double time_effect(std::size_t tau) {
  const double x = static_cast<double>(tau);
  return 0.8 * x + 0.05 * std::sin(1.3 * x);
}

}  // namespace

Panel generate(const DgpConfig& config) {
  check_config(config);

  // independent substreams per ingredient so that, e.g., raising the noise
  // leaves unit effects untouched
  Rng unit_rng = Rng::substream(config.seed, 1);
  Rng covariate_rng = Rng::substream(config.seed, 2);
  Rng noise_rng = Rng::substream(config.seed, 3);

  const Eigen::VectorXd common_beta = default_covariate_beta(config.k_covariates);
  auto beta_for = [&](int treat, long long time) -> const Eigen::VectorXd& {
    if (config.beta_by_cell) {
      auto it = config.beta_by_cell->find({treat, time});
      if (it != config.beta_by_cell->end()) return it->second;
    }
    return common_beta;
  };

  std::vector<Observation> rows;
  rows.reserve(4 * static_cast<std::size_t>(config.n_units_per_cell) *
               config.periods.size());
  int unit_counter = 0;
  for (int treat = 0; treat < 2; ++treat) {
    for (int group = 0; group < 2; ++group) {
      const int cell = treat * 2 + group;
      const int cell_units = (treat == 1 && config.n_treated_per_cell)
                                 ? *config.n_treated_per_cell
                                 : config.n_units_per_cell;
      for (int u = 0; u < cell_units; ++u) {
        // zero-padded ids keep lexicographic and creation order identical
        char id[16];
        std::snprintf(id, sizeof(id), "u%05d", unit_counter++);
        const double mu = unit_rng.normal(0.0, config.unit_effect_sd);
        const double loading = config.loading_base[cell] +
                               config.loading_spread[cell] * unit_rng.uniform(-1.0, 1.0);
        const double rate =
            config.growth[cell] *
            (1.0 + config.rate_spread[cell] * unit_rng.uniform(-1.0, 1.0));

        for (std::size_t tau = 0; tau < config.periods.size(); ++tau) {
          const long long t = config.periods[tau];
          const bool post = t >= config.post_start;
          Observation ob;
          ob.unit = id;
          ob.time = t;
          ob.treat = treat;
          ob.group = group;

          double y = mu + time_effect(tau) +
                     loading * std::exp(rate * static_cast<double>(tau));
          if (post) {
            const double d = treat ? 1.0 : 0.0;
            y += config.true_delta * d * group + config.true_gamma1 * d +
                 config.true_gamma2 * group;
          }
          if (config.k_covariates > 0) {
            const Eigen::VectorXd& beta = beta_for(treat, t);
            ob.covariates.resize(config.k_covariates);
            for (int k = 0; k < config.k_covariates; ++k) {
              ob.covariates[k] = config.covariate_scale * covariate_rng.uniform(-1.0, 1.0);
              y += beta(k) * ob.covariates[k];
            }
          }
          if (config.noise_sd > 0.0) y += noise_rng.normal(0.0, config.noise_sd);
          ob.outcome = y;
          rows.push_back(std::move(ob));
        }
      }
    }
  }
  return Panel(std::move(rows), config.post_start);
}

DgpConfig scenario_fig1_config(int scale, std::uint64_t seed) {
  if (scale < 1) raise(ErrorKind::ConfigInvalid, "scale must be at least 1");
  DgpConfig config;
  config.n_units_per_cell = 25 * scale;
  config.periods = {2001, 2005, 2009, 2013, 2017, 2021};
  config.post_start = 2021;
  config.true_delta = 10.0;
  config.true_gamma1 = 3.0;
  config.true_gamma2 = 2.0;
  // Distinct exponential growth in every (treat, group) cell, fastest in
  // the treated target cell. The rates sit close together while the
  // unit-level loading and rate spreads are wide: each draw of the panel
  // violates parallel trends through its realized loading imbalance, which
  // is exactly the kind of violation a synthetic control can absorb.
  config.growth = {0.330, 0.333, 0.336, 0.339};  // indexed treat*2+group
  config.noise_sd = 0.05;
  config.unit_effect_sd = 1.0;
  // the level gap along the treat dimension cancels inside W but leaves the
  // raw treated-vs-control trends visibly non-parallel
  config.loading_base = {1.0, 1.0, 1.5, 1.5};
  config.loading_spread = {0.7, 0.7, 0.7, 0.7};
  config.rate_spread = {0.10, 0.10, 0.10, 0.10};
  config.seed = seed;
  return config;
}

Panel scenario_fig1(int scale, std::uint64_t seed) {
  return generate(scenario_fig1_config(scale, seed));
}

}  // namespace tripled
