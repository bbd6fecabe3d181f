#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tripled/panel.hpp"

namespace tripled {

struct TransformedSeries;  // transform.hpp

// Output of the weighted least-squares core. Rank deficiency is reported
// as an error by ols_solve, never resolved by pseudo-inversion.
struct OlsResult {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  Eigen::Index rank = 0;
};

OlsResult ols_solve(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                    const std::optional<Eigen::VectorXd>& weights = std::nullopt);

// A fitted fixed-effects regression after exact double demeaning on a
// balanced panel. `coefficient` is the interaction coefficient of interest
// (first column of the within design).
struct FixedEffectsFit {
  double coefficient = 0.0;
  Eigen::VectorXd coefficients;          // all slope coefficients
  std::vector<std::string> regressor_names;
  Eigen::MatrixXd within_design;         // demeaned regressors, one row per obs
  Eigen::VectorXd residuals;             // aligned with obs_keys
  std::vector<std::pair<std::string, long long>> obs_keys;
  long long dof_resid = 0;               // n_obs - identified parameters
  std::size_t n_units = 0;
  std::size_t n_periods = 0;
  std::size_t n_obs = 0;
  bool within_transformed = true;
  std::string outcome_note = "Y";  // which outcome was regressed (Y, W, W_cov)

  double residual_at(const std::string& unit, long long time) const;
};

struct SeEntry {
  std::string method;
  double se = 0.0;
  double p_value = 1.0;
};

struct EstimateReport {
  std::string estimator_kind;  // DID_means | DID_TWFE | DDD_standard | DDD_transformed | SDID | SDDD
  double estimate = 0.0;
  std::vector<SeEntry> se_entries;
  std::size_t n_units = 0;
  std::size_t n_periods = 0;
  std::size_t n_obs = 0;
  std::map<std::string, double> solver_diag;
};

// 2x2 group-means DID: (post - pre) difference of treated minus control
// pooled cell means.
EstimateReport did_group_means(const Panel& panel);

// Two-way fixed-effects DID: Y on Treat x Post with unit and time effects,
// estimated by exact double demeaning on the balanced panel.
FixedEffectsFit did_twfe(const Panel& panel);

// Standard triple difference: coefficient on Treat x Post x G in the
// regression of Y on {Treat x Post x G, Treat x Post, Post x G, [X]} with
// unit and time fixed effects.
FixedEffectsFit ddd_standard(const Panel& panel, bool with_covariates);

// Triple difference after demeaning: DID with fixed effects on the G=1
// subpanel with the transformed outcome W (or W_cov when with_covariates).
FixedEffectsFit ddd_transformed(const Panel& panel, bool with_covariates);
// Same, reusing an already computed transform.
FixedEffectsFit ddd_transformed(const Panel& panel, const TransformedSeries& series);

// Intercept-plus-Post regression of a transformed outcome over treated
// units only (the demeaned form of the plain DID, no fixed effects).
double did_on_post(const Panel& panel, const TransformedSeries& series);

EstimateReport make_report(const std::string& kind, const FixedEffectsFit& fit);

}  // namespace tripled
