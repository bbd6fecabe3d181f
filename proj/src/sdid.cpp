#include "tripled/sdid.hpp"

#include <algorithm>
#include <cmath>

namespace tripled {

// ---------------------------------------------------------------------------
// Frank-Wolfe over the unit simplex.
//
// The intercept is profiled out up front: for fixed w the optimal w0 is the
// mean residual, so centering the columns of A and b solves the same
// problem without an intercept. On the centered quadratic we run
// Frank-Wolfe with exact line search plus away steps; the away steps avoid
// the sublinear zig-zag regime when the optimum sits on a face of the
// simplex, which is the common case here. The standard FW duality gap
//   max_{v in simplex} g'(w - v) = g'w - min_i g_i
// certifies suboptimality regardless of which step type ran last.
// ---------------------------------------------------------------------------

FwResult frank_wolfe_simplex(const SimplexQP& problem, const FwOptions& options) {
  const Eigen::Index m = problem.targets.cols();
  const Eigen::Index n = problem.targets.rows();
  if (m < 1 || n < 1) {
    raise(ErrorKind::DimensionMismatch, "simplex QP needs at least one column and row");
  }
  if (problem.offsets.size() != n) {
    raise(ErrorKind::DimensionMismatch, "offset vector length mismatch");
  }
  if (options.max_iter < 1) {
    raise(ErrorKind::ConfigInvalid, "max_iter must be at least 1");
  }
  const double ridge = problem.ridge;

  const Eigen::RowVectorXd col_mean = problem.targets.colwise().mean();
  const Eigen::MatrixXd A = problem.targets.rowwise() - col_mean;
  const Eigen::VectorXd b = problem.offsets.array() - problem.offsets.mean();

  Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  Eigen::VectorXd residual = A * w - b;
  double objective = residual.squaredNorm() + ridge * w.squaredNorm();

  const double tol = options.tol >= 0.0
                         ? options.tol
                         : std::max(1e-8 * objective, 1e-12);

  FwResult result;
  result.diag.tolerance = tol;
  result.diag.converged = false;
  if (options.record_trajectory) result.objective_trace.push_back(objective);

  double gap = 0.0;
  int it = 0;
  for (; it < options.max_iter; ++it) {
    const Eigen::VectorXd grad = 2.0 * (A.transpose() * residual) + 2.0 * ridge * w;

    // toward vertex: smallest gradient entry, lowest index on ties
    Eigen::Index toward = 0;
    for (Eigen::Index i = 1; i < m; ++i) {
      if (grad(i) < grad(toward)) toward = i;
    }
    const double grad_dot_w = grad.dot(w);
    gap = grad_dot_w - grad(toward);
    if (gap <= tol) {
      result.diag.converged = true;
      break;
    }

    // away vertex: largest gradient entry among the support
    Eigen::Index away = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (w(i) > 0.0 && (away < 0 || grad(i) > grad(away))) away = i;
    }

    const double fw_descent = gap;                       // -g'(e_s - w)
    const double away_descent = grad(away) - grad_dot_w; // -g'(w - e_a)

    Eigen::VectorXd direction;
    double gamma_max = 1.0;
    if (fw_descent >= away_descent) {
      direction = -w;
      direction(toward) += 1.0;
    } else {
      direction = w;
      direction(away) -= 1.0;
      const double wa = w(away);
      gamma_max = wa >= 1.0 ? 1e300 : wa / (1.0 - wa);
    }

    const Eigen::VectorXd Ad = A * direction;
    const double descent = -grad.dot(direction);
    const double curvature = 2.0 * (Ad.squaredNorm() + ridge * direction.squaredNorm());
    double gamma = curvature > 0.0 ? descent / curvature : gamma_max;
    gamma = std::clamp(gamma, 0.0, gamma_max);
    if (gamma <= 0.0) break;  // no progress possible along a descent direction

    w += gamma * direction;
    residual += gamma * Ad;

    // keep the iterate exactly on the simplex: drop steps should zero the
    // away coordinate, and roundoff must not accumulate
    if (fw_descent < away_descent && gamma >= gamma_max) w(away) = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (w(i) < 0.0) w(i) = 0.0;
    }
    w /= w.sum();
    if ((it & 127) == 127) residual = A * w - b;  // periodic refresh
    if (options.record_trajectory) {
      result.objective_trace.push_back(residual.squaredNorm() + ridge * w.squaredNorm());
    }
  }

  residual = A * w - b;
  objective = residual.squaredNorm() + ridge * w.squaredNorm();
  if (!result.diag.converged) {
    // certify the final iterate rather than reporting a stale gap
    const Eigen::VectorXd grad = 2.0 * (A.transpose() * residual) + 2.0 * ridge * w;
    gap = grad.dot(w) - grad.minCoeff();
    result.diag.converged = gap <= tol;
  }

  result.weights = w;
  result.intercept = problem.offsets.mean() - col_mean.dot(w);
  result.diag.iterations = it;
  result.diag.gap = gap;
  result.diag.objective = objective;
  return result;
}

double regularization_zeta(const Eigen::MatrixXd& control_pre, std::size_t n_treated,
                           std::size_t n_post) {
  const Eigen::Index n_control = control_pre.rows();
  const Eigen::Index t_pre = control_pre.cols();
  if (t_pre < 2) {
    raise(ErrorKind::InsufficientPrePeriods,
          "zeta needs at least 2 pre periods, got " + std::to_string(t_pre));
  }
  // two-pass population variance of the first differences
  const double count = static_cast<double>(n_control * (t_pre - 1));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n_control; ++i) {
    for (Eigen::Index t = 0; t + 1 < t_pre; ++t) {
      sum += control_pre(i, t + 1) - control_pre(i, t);
    }
  }
  const double mean = sum / count;
  double ss = 0.0;
  for (Eigen::Index i = 0; i < n_control; ++i) {
    for (Eigen::Index t = 0; t + 1 < t_pre; ++t) {
      const double d = control_pre(i, t + 1) - control_pre(i, t) - mean;
      ss += d * d;
    }
  }
  return std::pow(static_cast<double>(n_treated * n_post), 0.25) * std::sqrt(ss / count);
}

FwResult solve_unit_weights(const Eigen::MatrixXd& control_pre,
                            const Eigen::VectorXd& treated_pre_mean, double zeta,
                            const FwOptions& options) {
  SimplexQP problem;
  problem.targets = control_pre.transpose();  // rows = pre periods
  problem.offsets = treated_pre_mean;
  problem.ridge = zeta * zeta * static_cast<double>(control_pre.cols());
  FwResult result = frank_wolfe_simplex(problem, options);
  if (!result.diag.converged) {
    raise(ErrorKind::SolverNotConverged,
          "unit weights: gap " + std::to_string(result.diag.gap) + " > tol after " +
              std::to_string(result.diag.iterations) + " iterations");
  }
  return result;
}

FwResult solve_time_weights(const Eigen::MatrixXd& control_pre,
                            const Eigen::VectorXd& control_post_mean,
                            const FwOptions& options) {
  SimplexQP problem;
  problem.targets = control_pre;  // rows = control units
  problem.offsets = control_post_mean;
  if (control_pre.cols() >= 2) {
    const double sigma =
        regularization_zeta(control_pre, 1, 1);  // (1*1)^(1/4) = 1, so just sigma
    const double stabilizer = 1e-6 * sigma;
    problem.ridge = stabilizer * stabilizer * static_cast<double>(control_pre.rows());
  }
  FwResult result = frank_wolfe_simplex(problem, options);
  if (!result.diag.converged) {
    raise(ErrorKind::SolverNotConverged,
          "time weights: gap " + std::to_string(result.diag.gap) + " > tol after " +
              std::to_string(result.diag.iterations) + " iterations");
  }
  return result;
}

SdidData extract_sdid_data(const Panel& panel) {
  if (!panel.is_balanced()) {
    raise(ErrorKind::UnbalancedPanel, "synthetic-control weighting needs a balanced panel");
  }
  SdidData data;
  data.pre_times = panel.pre_periods();
  data.post_times = panel.post_periods();
  for (const auto& u : panel.units()) {
    (u.treat == 1 ? data.treated_ids : data.control_ids).push_back(u.id);
  }
  if (data.control_ids.empty()) raise(ErrorKind::EmptyCell, "no control units");
  if (data.treated_ids.empty()) raise(ErrorKind::EmptyCell, "no treated units");

  const std::size_t t_pre = data.pre_times.size();
  const std::size_t t_post = data.post_times.size();
  data.control_pre.resize(data.control_ids.size(), t_pre);
  data.control_post.resize(data.control_ids.size(), t_post);
  data.treated_pre_mean = Eigen::VectorXd::Zero(t_pre);
  data.treated_post_mean = Eigen::VectorXd::Zero(t_post);

  for (std::size_t i = 0; i < data.control_ids.size(); ++i) {
    const std::size_t u = panel.unit_index(data.control_ids[i]);
    for (std::size_t t = 0; t < t_pre; ++t) {
      data.control_pre(i, t) = panel.at(u, panel.time_index(data.pre_times[t])).outcome;
    }
    for (std::size_t t = 0; t < t_post; ++t) {
      data.control_post(i, t) = panel.at(u, panel.time_index(data.post_times[t])).outcome;
    }
  }
  for (const auto& id : data.treated_ids) {
    const std::size_t u = panel.unit_index(id);
    for (std::size_t t = 0; t < t_pre; ++t) {
      data.treated_pre_mean(t) += panel.at(u, panel.time_index(data.pre_times[t])).outcome;
    }
    for (std::size_t t = 0; t < t_post; ++t) {
      data.treated_post_mean(t) += panel.at(u, panel.time_index(data.post_times[t])).outcome;
    }
  }
  data.treated_pre_mean /= static_cast<double>(data.treated_ids.size());
  data.treated_post_mean /= static_cast<double>(data.treated_ids.size());
  data.control_post_mean = data.control_post.rowwise().mean();
  return data;
}

double pretrend_gap_sq(const Eigen::MatrixXd& control_pre,
                       const Eigen::VectorXd& treated_pre_mean,
                       const Eigen::VectorXd& omega, double intercept) {
  const Eigen::VectorXd synthetic = control_pre.transpose() * omega;
  return (synthetic.array() + intercept - treated_pre_mean.array()).square().sum();
}

namespace {

// Weighted two-way fixed-effects solve for the SDID objective. With
// product weights a_i * b_t on a complete unit-by-period grid the weighted
// projection onto the two fixed-effect spaces is exact single-pass double
// demeaning with weighted means, so the coefficient on the demeaned
// interaction is the argmin of the weighted least-squares problem.
SdidEstimate weighted_did_fit(const Panel& panel, const SdidData& data,
                              const WeightSet& weights, const std::string& kind) {
  const std::size_t n_units = panel.n_units();
  const std::size_t n_times = panel.n_periods();
  const double n_treated = static_cast<double>(data.treated_ids.size());
  const double t_post = static_cast<double>(data.post_times.size());

  Eigen::VectorXd unit_w(n_units);
  for (std::size_t u = 0; u < n_units; ++u) {
    const UnitInfo& info = panel.units()[u];
    unit_w(u) = info.treat == 1 ? 1.0 / n_treated : weights.unit_weights.at(info.id);
  }
  Eigen::VectorXd time_w(n_times);
  for (std::size_t t = 0; t < n_times; ++t) {
    const long long time = panel.times()[t];
    time_w(t) = panel.is_post(time) ? 1.0 / t_post : weights.time_weights.at(time);
  }
  const double unit_w_sum = unit_w.sum();
  const double time_w_sum = time_w.sum();

  Eigen::MatrixXd Y(n_units, n_times), D(n_units, n_times);
  for (std::size_t u = 0; u < n_units; ++u) {
    const int treat = panel.units()[u].treat;
    for (std::size_t t = 0; t < n_times; ++t) {
      const Observation& ob = panel.at(u, t);
      Y(u, t) = ob.outcome;
      D(u, t) = (treat == 1 && panel.is_post(ob.time)) ? 1.0 : 0.0;
    }
  }

  auto demean = [&](Eigen::MatrixXd& M) {
    const Eigen::VectorXd row_mean = (M * time_w) / time_w_sum;
    const Eigen::RowVectorXd col_mean = (unit_w.transpose() * M) / unit_w_sum;
    const double grand = unit_w.dot(M * time_w) / (unit_w_sum * time_w_sum);
    M.colwise() -= row_mean;
    M.rowwise() -= col_mean;
    M.array() += grand;
  };
  demean(Y);
  demean(D);

  double numerator = 0.0, denominator = 0.0;
  for (std::size_t u = 0; u < n_units; ++u) {
    for (std::size_t t = 0; t < n_times; ++t) {
      const double w = unit_w(u) * time_w(t);
      numerator += w * D(u, t) * Y(u, t);
      denominator += w * D(u, t) * D(u, t);
    }
  }
  if (denominator <= 1e-300) {
    raise(ErrorKind::CollinearDesign, "weighted interaction has no variation");
  }

  SdidEstimate out;
  out.weights = weights;
  out.fit.coefficient = numerator / denominator;
  out.fit.coefficients = Eigen::VectorXd::Constant(1, out.fit.coefficient);
  out.fit.regressor_names = {"treat_post"};
  out.fit.within_design.resize(panel.n_obs(), 1);
  out.fit.residuals.resize(panel.n_obs());
  out.fit.obs_keys.reserve(panel.n_obs());
  for (std::size_t u = 0; u < n_units; ++u) {
    for (std::size_t t = 0; t < n_times; ++t) {
      const Eigen::Index row = static_cast<Eigen::Index>(u * n_times + t);
      out.fit.within_design(row, 0) = D(u, t);
      out.fit.residuals(row) = Y(u, t) - D(u, t) * out.fit.coefficient;
      const Observation& ob = panel.at(u, t);
      out.fit.obs_keys.emplace_back(ob.unit, ob.time);
    }
  }
  out.fit.n_units = n_units;
  out.fit.n_periods = n_times;
  out.fit.n_obs = panel.n_obs();
  out.fit.dof_resid = static_cast<long long>(panel.n_obs()) -
                      static_cast<long long>(n_units + n_times - 1 + 1);
  out.fit.within_transformed = false;  // weighted demeaning, not the plain one

  out.report.estimator_kind = kind;
  out.report.estimate = out.fit.coefficient;
  out.report.n_units = n_units;
  out.report.n_periods = n_times;
  out.report.n_obs = panel.n_obs();
  out.report.solver_diag["zeta"] = weights.zeta;
  out.report.solver_diag["unit_gap"] = weights.unit_diag.gap;
  out.report.solver_diag["unit_iterations"] = weights.unit_diag.iterations;
  out.report.solver_diag["time_gap"] = weights.time_diag.gap;
  out.report.solver_diag["time_iterations"] = weights.time_diag.iterations;
  return out;
}

SdidEstimate sdid_core(const Panel& panel, const SdidOptions& options,
                       const std::string& kind) {
  const SdidData data = extract_sdid_data(panel);

  WeightSet weights;
  if (options.force_uniform) {
    const double omega = 1.0 / static_cast<double>(data.control_ids.size());
    for (const auto& id : data.control_ids) weights.unit_weights[id] = omega;
    const double lambda = 1.0 / static_cast<double>(data.pre_times.size());
    for (long long t : data.pre_times) weights.time_weights[t] = lambda;
    // profiled intercepts for the uniform weights, used by diagnostics
    weights.unit_intercept =
        (data.treated_pre_mean.mean() -
         (data.control_pre.transpose() * Eigen::VectorXd::Constant(data.control_pre.rows(), omega))
             .mean());
    weights.time_intercept =
        (data.control_post_mean.mean() - data.control_pre.mean());
    weights.zeta = 0.0;
  } else {
    weights.zeta = regularization_zeta(data.control_pre, data.treated_ids.size(),
                                       data.post_times.size());
    const FwResult unit = solve_unit_weights(data.control_pre, data.treated_pre_mean,
                                             weights.zeta, options.fw);
    const FwResult time = solve_time_weights(data.control_pre, data.control_post_mean,
                                             options.fw);
    for (std::size_t i = 0; i < data.control_ids.size(); ++i) {
      weights.unit_weights[data.control_ids[i]] = unit.weights(i);
    }
    for (std::size_t t = 0; t < data.pre_times.size(); ++t) {
      weights.time_weights[data.pre_times[t]] = time.weights(t);
    }
    weights.unit_intercept = unit.intercept;
    weights.time_intercept = time.intercept;
    weights.unit_diag = unit.diag;
    weights.time_diag = time.diag;
  }

  return weighted_did_fit(panel, data, weights, kind);
}

}  // namespace

SdidEstimate sdid_estimate(const Panel& panel, const SdidOptions& options) {
  return sdid_core(panel, options, "SDID");
}

SdidEstimate sdid_estimate(const Panel& panel, const TransformedSeries& outcome,
                           const SdidOptions& options) {
  return sdid_core(with_outcome(panel, outcome.values), options, "SDID");
}

SdidEstimate sddd_estimate(const Panel& panel, bool with_covariates,
                           const SdidOptions& options) {
  TransformedSeries series;
  if (with_covariates) {
    series = demean_ddd_cov(panel, fit_cell_regressions(panel));
  } else {
    series = demean_ddd(panel);
  }
  SdidEstimate estimate =
      sdid_core(with_outcome(panel, series.values), options, "SDDD");
  estimate.fit.outcome_note = with_covariates ? "W_cov" : "W";
  return estimate;
}

}  // namespace tripled
