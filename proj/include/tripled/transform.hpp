#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "tripled/panel.hpp"

namespace tripled {

enum class TransformKind { Z, W, WCov };

// Demeaned outcome series. `values` covers exactly the subpopulation the
// transform targets (treated units for Z, G=1 units for W).
// `complement_values` applies the same subtraction to the complementary
// subpopulation; it exists for diagnostics only (its per-cell means vanish
// by construction) and must never feed an estimator.
struct TransformedSeries {
  TransformKind kind = TransformKind::Z;
  std::map<std::pair<std::string, long long>, double> values;
  std::map<std::pair<std::string, long long>, double> complement_values;
  // per-(treat arm, time) description of the subtracted baseline
  std::map<std::pair<int, long long>, std::string> baseline_provenance;
};

// Per-(treat arm, time) least-squares fits of Y on (1, X) over the
// non-target subgroup (G=0).
struct CellRegressionSet {
  // coefficient vector is (intercept, slopes...), length K+1
  std::map<std::pair<int, long long>, Eigen::VectorXd> coefficients;
  std::map<std::pair<int, long long>, std::size_t> n_obs;
  // scaled condition indicator of the cell design (1 = perfectly conditioned)
  std::map<std::pair<int, long long>, double> condition_diag;
};

// DID demeaning: Z_it = Y_it - mean(Y | treat=0, t). Targets treated units;
// controls land in complement_values.
TransformedSeries demean_did(const Panel& panel);

// DDD demeaning without covariates: for a G=1 unit in treat arm j,
// W_itj = Y_it - mean(Y | G=0, treat=j, t). G=0 units land in
// complement_values with their own (j, t) cell mean subtracted.
TransformedSeries demean_ddd(const Panel& panel);

// Fits the per-(j, t) linear models on the non-target subgroup. Requires
// K >= 1 covariates and at least K+2 observations per cell.
CellRegressionSet fit_cell_regressions(const Panel& panel);

// Covariate-adjusted DDD demeaning: W = Y - (1, x)' beta_hat(j, t).
TransformedSeries demean_ddd_cov(const Panel& panel, const CellRegressionSet& regs);

void write_series_csv(const TransformedSeries& series, std::ostream& out);

}  // namespace tripled
