#include "tripled/estimators.hpp"

#include <Eigen/QR>
#include <cmath>

#include "tripled/transform.hpp"

namespace tripled {

OlsResult ols_solve(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                    const std::optional<Eigen::VectorXd>& weights) {
  if (design.rows() != response.size()) {
    raise(ErrorKind::DimensionMismatch,
          "design has " + std::to_string(design.rows()) + " rows, response has " +
              std::to_string(response.size()));
  }
  Eigen::MatrixXd X = design;
  Eigen::VectorXd y = response;
  if (weights) {
    if (weights->size() != design.rows()) {
      raise(ErrorKind::DimensionMismatch, "weight vector length mismatch");
    }
    if ((weights->array() < 0.0).any()) {
      raise(ErrorKind::DimensionMismatch, "weights must be nonnegative");
    }
    if (weights->sum() <= 0.0) {
      raise(ErrorKind::DimensionMismatch, "weights must not all be zero");
    }
    const Eigen::VectorXd root = weights->cwiseSqrt();
    X = root.asDiagonal() * X;
    y = root.asDiagonal() * y;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  OlsResult result;
  result.rank = qr.rank();
  if (result.rank < design.cols()) {
    // name the first non-pivot column so callers can point at it
    const auto& perm = qr.colsPermutation().indices();
    std::string offender = "column " + std::to_string(perm(design.cols() - 1));
    raise(ErrorKind::RankDeficient, "design matrix has rank " +
                                        std::to_string(result.rank) + " < " +
                                        std::to_string(design.cols()) + " (" + offender + ")");
  }
  result.coefficients = qr.solve(y);
  result.residuals = response - design * result.coefficients;
  return result;
}

double FixedEffectsFit::residual_at(const std::string& unit, long long time) const {
  for (std::size_t i = 0; i < obs_keys.size(); ++i) {
    if (obs_keys[i].first == unit && obs_keys[i].second == time) return residuals(i);
  }
  raise(ErrorKind::DimensionMismatch, "no residual for (" + unit + ", " + std::to_string(time) + ")");
}

namespace {

// Exact double demeaning on a balanced panel: x - xbar_i - xbar_t + xbar.
void within_demean(const Panel& panel, Eigen::Ref<Eigen::MatrixXd> columns) {
  const std::size_t n_units = panel.n_units();
  const std::size_t n_times = panel.n_periods();
  for (Eigen::Index c = 0; c < columns.cols(); ++c) {
    auto col = columns.col(c);
    Eigen::VectorXd unit_mean = Eigen::VectorXd::Zero(n_units);
    Eigen::VectorXd time_mean = Eigen::VectorXd::Zero(n_times);
    double grand = 0.0;
    for (std::size_t u = 0; u < n_units; ++u) {
      for (std::size_t t = 0; t < n_times; ++t) {
        const double v = col(u * n_times + t);
        unit_mean(u) += v;
        time_mean(t) += v;
        grand += v;
      }
    }
    unit_mean /= static_cast<double>(n_times);
    time_mean /= static_cast<double>(n_units);
    grand /= static_cast<double>(n_units * n_times);
    for (std::size_t u = 0; u < n_units; ++u) {
      for (std::size_t t = 0; t < n_times; ++t) {
        col(u * n_times + t) += grand - unit_mean(u) - time_mean(t);
      }
    }
  }
}

// Shared core: regress the double-demeaned outcome on the double-demeaned
// regressors; the coefficient of interest sits in column 0.
FixedEffectsFit fit_within(const Panel& panel, const Eigen::MatrixXd& regressors,
                           const Eigen::VectorXd& outcome,
                           const std::vector<std::string>& names) {
  if (!panel.is_balanced()) {
    raise(ErrorKind::UnbalancedPanel, "fixed-effects fit needs a balanced panel");
  }
  const std::size_t n = panel.n_obs();

  Eigen::MatrixXd X = regressors;
  Eigen::VectorXd y = outcome;
  within_demean(panel, X);
  Eigen::MatrixXd ymat = y;
  within_demean(panel, ymat);
  y = ymat.col(0);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) {
    const auto& perm = qr.colsPermutation().indices();
    // columns beyond the pivot rank are linear combinations of the rest
    const std::string offender = names[static_cast<std::size_t>(perm(X.cols() - 1))];
    raise(ErrorKind::CollinearDesign,
          "regressor '" + offender + "' has no independent within variation");
  }

  FixedEffectsFit fit;
  fit.coefficients = qr.solve(y);
  fit.coefficient = fit.coefficients(0);
  fit.regressor_names = names;
  fit.within_design = std::move(X);
  fit.residuals = y - fit.within_design * fit.coefficients;
  fit.obs_keys.reserve(n);
  for (const auto& ob : panel.observations()) fit.obs_keys.emplace_back(ob.unit, ob.time);
  fit.n_units = panel.n_units();
  fit.n_periods = panel.n_periods();
  fit.n_obs = n;
  // identified parameters: unit effects (incl. intercept), T-1 time
  // effects, plus the slope coefficients
  fit.dof_resid = static_cast<long long>(n) -
                  static_cast<long long>(panel.n_units() + panel.n_periods() - 1 +
                                         static_cast<std::size_t>(regressors.cols()));
  fit.within_transformed = true;
  return fit;
}

Eigen::VectorXd outcome_vector(const Panel& panel) {
  Eigen::VectorXd y(panel.n_obs());
  Eigen::Index i = 0;
  for (const auto& ob : panel.observations()) y(i++) = ob.outcome;
  return y;
}

struct PooledCells {
  double treated_pre = 0, treated_post = 0, control_pre = 0, control_post = 0;
};

PooledCells pooled_did_cells(const Panel& panel) {
  double sums[2][2] = {{0, 0}, {0, 0}};
  std::size_t counts[2][2] = {{0, 0}, {0, 0}};
  for (const auto& ob : panel.observations()) {
    const int post = panel.is_post(ob.time) ? 1 : 0;
    sums[ob.treat][post] += ob.outcome;
    counts[ob.treat][post] += 1;
  }
  for (int a = 0; a < 2; ++a) {
    for (int p = 0; p < 2; ++p) {
      if (counts[a][p] == 0) {
        raise(ErrorKind::EmptyCell, std::string("(treat=") + std::to_string(a) +
                                        ", post=" + std::to_string(p) + ") cell is empty");
      }
    }
  }
  PooledCells cells;
  cells.control_pre = sums[0][0] / counts[0][0];
  cells.control_post = sums[0][1] / counts[0][1];
  cells.treated_pre = sums[1][0] / counts[1][0];
  cells.treated_post = sums[1][1] / counts[1][1];
  return cells;
}

}  // namespace

EstimateReport did_group_means(const Panel& panel) {
  const PooledCells cells = pooled_did_cells(panel);
  EstimateReport report;
  report.estimator_kind = "DID_means";
  report.estimate = (cells.treated_post - cells.treated_pre) -
                    (cells.control_post - cells.control_pre);
  report.n_units = panel.n_units();
  report.n_periods = panel.n_periods();
  report.n_obs = panel.n_obs();
  return report;
}

FixedEffectsFit did_twfe(const Panel& panel) {
  Eigen::MatrixXd D(panel.n_obs(), 1);
  Eigen::Index i = 0;
  for (const auto& ob : panel.observations()) {
    D(i++, 0) = (ob.treat == 1 && panel.is_post(ob.time)) ? 1.0 : 0.0;
  }
  return fit_within(panel, D, outcome_vector(panel), {"treat_post"});
}

FixedEffectsFit ddd_standard(const Panel& panel, bool with_covariates) {
  // All eight (treat, group, post) cells must be populated.
  std::size_t counts[2][2][2] = {};
  for (const auto& ob : panel.observations()) {
    counts[ob.treat][ob.group][panel.is_post(ob.time) ? 1 : 0] += 1;
  }
  for (int a = 0; a < 2; ++a) {
    for (int g = 0; g < 2; ++g) {
      for (int p = 0; p < 2; ++p) {
        if (counts[a][g][p] == 0) {
          raise(ErrorKind::EmptyCell, "(treat=" + std::to_string(a) + ", group=" +
                                          std::to_string(g) + ", post=" +
                                          std::to_string(p) + ") cell is empty");
        }
      }
    }
  }

  const std::size_t K = with_covariates ? panel.n_covariates() : 0;
  if (with_covariates && K == 0) {
    raise(ErrorKind::ConfigInvalid, "covariate regression requested but panel has none");
  }
  Eigen::MatrixXd X(panel.n_obs(), 3 + K);
  std::vector<std::string> names = {"treat_post_group", "treat_post", "post_group"};
  for (std::size_t k = 1; k <= K; ++k) names.push_back("x" + std::to_string(k));
  Eigen::Index i = 0;
  for (const auto& ob : panel.observations()) {
    const double post = panel.is_post(ob.time) ? 1.0 : 0.0;
    const double d = ob.treat * post;
    X(i, 0) = d * ob.group;
    X(i, 1) = d;
    X(i, 2) = post * ob.group;
    for (std::size_t k = 0; k < K; ++k) X(i, 3 + k) = ob.covariates[k];
    ++i;
  }
  return fit_within(panel, X, outcome_vector(panel), names);
}

FixedEffectsFit ddd_transformed(const Panel& panel, const TransformedSeries& series) {
  const Panel target = with_outcome(panel, series.values);
  FixedEffectsFit fit = did_twfe(target);
  fit.outcome_note = series.kind == TransformKind::WCov ? "W_cov" : "W";
  return fit;
}

FixedEffectsFit ddd_transformed(const Panel& panel, bool with_covariates) {
  if (with_covariates) {
    const CellRegressionSet regs = fit_cell_regressions(panel);
    return ddd_transformed(panel, demean_ddd_cov(panel, regs));
  }
  return ddd_transformed(panel, demean_ddd(panel));
}

double did_on_post(const Panel& panel, const TransformedSeries& series) {
  std::vector<double> z;
  std::vector<double> post;
  for (const auto& [key, value] : series.values) {
    z.push_back(value);
    post.push_back(panel.is_post(key.second) ? 1.0 : 0.0);
  }
  if (z.empty()) raise(ErrorKind::EmptyCell, "transformed series is empty");
  Eigen::MatrixXd X(z.size(), 2);
  Eigen::VectorXd y(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = post[i];
    y(i) = z[i];
  }
  return ols_solve(X, y).coefficients(1);
}

EstimateReport make_report(const std::string& kind, const FixedEffectsFit& fit) {
  EstimateReport report;
  report.estimator_kind = kind;
  report.estimate = fit.coefficient;
  report.n_units = fit.n_units;
  report.n_periods = fit.n_periods;
  report.n_obs = fit.n_obs;
  return report;
}

}  // namespace tripled
