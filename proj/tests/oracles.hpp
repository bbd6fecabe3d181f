#pragma once

// Test-only oracles. Everything here recomputes expected values through a
// route independent of the implementation it checks: plain row scans,
// normal equations instead of QR, explicit dummy-variable designs instead
// of demeaning, and grid scans instead of Frank-Wolfe.

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "tripled/panel.hpp"
#include "tripled/rng.hpp"

namespace oracles {

// brute-force mean of outcomes matching (treat, group, time)
inline double row_scan_cell_mean(const tripled::Panel& panel, int treat, int group,
                                 long long time) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& ob : panel.observations()) {
    if (ob.treat == treat && ob.group == group && ob.time == time) {
      total += ob.outcome;
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

// mean over a (treat, post-block, group) cell pooled across periods
inline double row_scan_block_mean(const tripled::Panel& panel, int treat, bool post,
                                  int group) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& ob : panel.observations()) {
    if (ob.treat == treat && ob.group == group && panel.is_post(ob.time) == post) {
      total += ob.outcome;
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

// OLS through the normal equations, solved by LU (the implementation uses
// a QR factorization; this is the independent algebraic route)
inline Eigen::VectorXd normal_equations_ols(const Eigen::MatrixXd& X,
                                            const Eigen::VectorXd& y) {
  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::VectorXd xty = X.transpose() * y;
  return xtx.partialPivLu().solve(xty);
}

// Two-way fixed-effects regression via the full dummy-variable design:
// intercept, unit dummies (first dropped), time dummies (first dropped),
// then the slope regressors. Returns the slope coefficients.
inline Eigen::VectorXd dummy_variable_twfe(const tripled::Panel& panel,
                                           const Eigen::MatrixXd& regressors,
                                           const Eigen::VectorXd& outcome) {
  const std::size_t n = panel.n_obs();
  const std::size_t n_units = panel.n_units();
  const std::size_t n_times = panel.n_periods();
  const std::size_t k = static_cast<std::size_t>(regressors.cols());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, 1 + (n_units - 1) + (n_times - 1) + k);
  std::size_t row = 0;
  for (const auto& ob : panel.observations()) {
    X(row, 0) = 1.0;
    const std::size_t u = panel.unit_index(ob.unit);
    if (u > 0) X(row, u) = 1.0;
    const std::size_t t = panel.time_index(ob.time);
    if (t > 0) X(row, n_units - 1 + t) = 1.0;
    for (std::size_t j = 0; j < k; ++j) {
      X(row, 1 + (n_units - 1) + (n_times - 1) + j) = regressors(row, j);
    }
    ++row;
  }
  const Eigen::VectorXd beta = normal_equations_ols(X, outcome);
  return beta.tail(k);
}

// The triple difference of pooled cell means (target-vs-non-target DID of
// DIDs), the hand-arithmetic form of the DDD estimand.
inline double eight_cell_triple_difference(const tripled::Panel& panel) {
  auto block = [&](int treat, bool post, int group) {
    return row_scan_block_mean(panel, treat, post, group);
  };
  const double target = (block(1, true, 1) - block(1, false, 1)) -
                        (block(0, true, 1) - block(0, false, 1));
  const double non_target = (block(1, true, 0) - block(1, false, 0)) -
                            (block(0, true, 0) - block(0, false, 0));
  return target - non_target;
}

// objective of the simplex QP (intercept profiled out by centering)
inline double simplex_objective(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                double ridge, const Eigen::VectorXd& w) {
  const Eigen::VectorXd r = A * w - b;
  const double centered = (r.array() - r.mean()).square().sum();
  return centered + ridge * w.squaredNorm();
}

// Exhaustive scan of the simplex at a fixed resolution (all compositions
// of `steps` into dim parts). Only sensible for small dim / step counts.
double simplex_grid_min(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                        double ridge, int steps);

// Zoomed grid scan at final resolution `fine` (a full coarse sweep first,
// then repeated refinement around the incumbent); the objective is convex,
// so the incumbent cell always brackets the optimum.
double simplex_zoom_grid_min(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                             double ridge, double fine);

// sample moments
inline double mean_of(const std::vector<double>& xs) {
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

inline double sd_of(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline double skewness_of(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double m2 = 0.0, m3 = 0.0;
  for (double x : xs) {
    const double d = x - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(xs.size());
  m3 /= static_cast<double>(xs.size());
  return m3 / std::pow(m2, 1.5);
}

inline double excess_kurtosis_of(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - m;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(xs.size());
  m4 /= static_cast<double>(xs.size());
  return m4 / (m2 * m2) - 3.0;
}

// Random balanced panels for the property tests: unit counts per
// (treat, group) cell in [1, max_per_cell], outcomes N(0, 1) plus unit and
// time shifts so the fixed effects matter.
tripled::Panel random_balanced_panel(tripled::Rng& rng, int max_per_cell,
                                     int max_periods);

}  // namespace oracles
