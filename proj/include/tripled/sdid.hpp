#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>

#include "tripled/estimators.hpp"
#include "tripled/panel.hpp"
#include "tripled/transform.hpp"

namespace tripled {

struct SolverDiag {
  int iterations = 0;
  double gap = 0.0;
  double tolerance = 0.0;
  double objective = 0.0;
  bool converged = true;
};

// Synthetic-control weights: omega over control units, lambda over pre
// periods, both on the unit simplex, each with a free intercept.
struct WeightSet {
  std::map<std::string, double> unit_weights;
  double unit_intercept = 0.0;
  std::map<long long, double> time_weights;
  double time_intercept = 0.0;
  double zeta = 0.0;
  SolverDiag unit_diag;
  SolverDiag time_diag;
};

// min over the simplex (w) and a free intercept (w0) of
//   || A w + w0 1 - b ||^2 + ridge ||w||^2
struct SimplexQP {
  Eigen::MatrixXd targets;  // A: one column per weight
  Eigen::VectorXd offsets;  // b
  double ridge = 0.0;
};

struct FwOptions {
  int max_iter = 10000;
  // tol < 0 selects the default max(1e-8 * initial objective, 1e-12)
  double tol = -1.0;
  bool record_trajectory = false;
};

struct FwResult {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  SolverDiag diag;
  std::vector<double> objective_trace;  // filled when record_trajectory is set
};

// Frank-Wolfe with exact line search and away steps; the intercept is
// profiled out in closed form (w0 = mean residual). Stops when the FW
// duality gap drops below tol. Non-convergence is flagged in diag, not
// thrown; callers decide.
FwResult frank_wolfe_simplex(const SimplexQP& problem, const FwOptions& options = {});

// zeta = (n_treated * n_post)^(1/4) * sd of first differences of the
// control trajectories over consecutive pre periods (population sd).
double regularization_zeta(const Eigen::MatrixXd& control_pre, std::size_t n_treated,
                           std::size_t n_post);

// Unit weights: match the treated pre-period mean trajectory with a convex
// combination of control trajectories, ridge zeta^2 * T_pre.
FwResult solve_unit_weights(const Eigen::MatrixXd& control_pre,
                            const Eigen::VectorXd& treated_pre_mean, double zeta,
                            const FwOptions& options = {});

// Time weights: predict each control's post-period mean from its pre
// trajectory; tiny documented stabilizer ridge (1e-6 * sigma)^2 * N_control.
FwResult solve_time_weights(const Eigen::MatrixXd& control_pre,
                            const Eigen::VectorXd& control_post_mean,
                            const FwOptions& options = {});

// Panel slices the weight problems operate on, also used by the trend
// exports: control rows x pre columns, treated per-period means, and
// per-control post means.
struct SdidData {
  std::vector<std::string> control_ids;
  std::vector<std::string> treated_ids;
  std::vector<long long> pre_times;
  std::vector<long long> post_times;
  Eigen::MatrixXd control_pre;        // N_control x T_pre
  Eigen::MatrixXd control_post;       // N_control x T_post
  Eigen::VectorXd treated_pre_mean;   // per pre period
  Eigen::VectorXd treated_post_mean;  // per post period
  Eigen::VectorXd control_post_mean;  // per control unit
};

SdidData extract_sdid_data(const Panel& panel);

struct SdidOptions {
  // uniform weights (1/N_control, 1/T_pre) instead of solved ones; used by
  // the pooled-collapse identity and as a CLI override
  bool force_uniform = false;
  FwOptions fw;
};

struct SdidEstimate {
  EstimateReport report;
  WeightSet weights;
  FixedEffectsFit fit;  // weighted within fit behind the estimate
};

// SDID on the panel's outcome: weighted two-way fixed-effects least
// squares with observation weight (omega_i | 1/N_treated) x (lambda_t |
// 1/T_post); reports the coefficient on Treat x Post.
SdidEstimate sdid_estimate(const Panel& panel, const SdidOptions& options = {});
// Same, with the outcome replaced by a transformed series (the panel is
// restricted to the series' target subpopulation).
SdidEstimate sdid_estimate(const Panel& panel, const TransformedSeries& outcome,
                           const SdidOptions& options = {});

// The full pipeline: demean the DDD into a DID on W (optionally covariate
// adjusted), then run SDID on the G=1 subpanel.
SdidEstimate sddd_estimate(const Panel& panel, bool with_covariates,
                           const SdidOptions& options = {});

// Sum over pre periods of (omega' Y_t + omega0 - treated mean_t)^2, the
// pre-fit diagnostic behind the trend plots.
double pretrend_gap_sq(const Eigen::MatrixXd& control_pre,
                       const Eigen::VectorXd& treated_pre_mean,
                       const Eigen::VectorXd& omega, double intercept);

}  // namespace tripled
