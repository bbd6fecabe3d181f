#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "tripled/panel.hpp"

namespace tripled {

// Synthetic data-generating process with a known triple-difference effect.
// The outcome is
//
//   Y_it = delta D_it G_i + gamma1 D_it + gamma2 G_i Post_t
//          + mu_i + lambda_t + c_i exp(g_i tau_t) + X_it' beta_jt
//          + noise_sd * eps_it
//
// where tau_t is the 0-based period index, lambda_t is a deterministic
// function of tau_t, mu_i is a seeded unit effect, and the exponential term
// carries a per-cell base growth rate g with optional unit-level loading
// (c_i) and rate (g_i) heterogeneity. Loading and rate spreads default to
// zero, which reduces the trend to a pure cell-level exponential.
struct DgpConfig {
  int n_units_per_cell = 10;
  // unit count for the treated (treat = 1) cells; defaults to
  // n_units_per_cell, set lower to leave placebo inference enough donors
  std::optional<int> n_treated_per_cell;
  std::vector<long long> periods;
  long long post_start = 0;
  double true_delta = 0.0;
  double true_gamma1 = 0.0;
  double true_gamma2 = 0.0;
  // indexed by treat * 2 + group
  std::array<double, 4> growth = {0.0, 0.0, 0.0, 0.0};
  double noise_sd = 0.0;
  int k_covariates = 0;
  // optional per-(treat arm, time) slope vectors of length k_covariates;
  // when absent a fixed common pattern is used for every cell
  std::optional<std::map<std::pair<int, long long>, Eigen::VectorXd>> beta_by_cell;
  std::uint64_t seed = 0;

  double unit_effect_sd = 1.0;
  double covariate_scale = 1.0;
  // trend loading c_i ~ base + U(-spread, spread), per cell
  std::array<double, 4> loading_base = {1.0, 1.0, 1.0, 1.0};
  std::array<double, 4> loading_spread = {0.0, 0.0, 0.0, 0.0};
  // growth rate g_i = g_cell * U(1 - spread, 1 + spread), per cell
  std::array<double, 4> rate_spread = {0.0, 0.0, 0.0, 0.0};
};

// Default covariate slope used when beta_by_cell is absent: slope k is
// 1.5 * (-0.6)^k, identical in every (j, t) cell.
Eigen::VectorXd default_covariate_beta(int k_covariates);

Panel generate(const DgpConfig& config);

// Preset mirroring the motivating scenario: all four (treat, group) cells
// grow exponentially at distinct rates, with enough unit-level trend
// heterogeneity that a synthetic control can absorb the violation.
DgpConfig scenario_fig1_config(int scale, std::uint64_t seed);
Panel scenario_fig1(int scale, std::uint64_t seed);

}  // namespace tripled
