#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tripled/estimators.hpp"
#include "tripled/panel.hpp"

namespace tripled {

enum class DfRule { TDof, Normal };

// Two-sided p-value under t(df) or the standard normal. se = 0 follows the
// degenerate convention: p = 1 when the estimate is 0, else p = 0.
double p_value(double estimate, double se, DfRule rule, long long df);

struct SeResult {
  double se = 0.0;
  double p = 1.0;
};

// Classical OLS standard error on the within-transformed design,
// sigma^2 = RSS / dof_resid; p from t(dof_resid).
SeResult se_regular(const FixedEffectsFit& fit);

// CR1 cluster-robust sandwich with small-sample factor
// [G/(G-1)] [(N-1)/(N-K)]; p from t(G-1). With singleton clusters this
// reproduces HC1 exactly.
SeResult se_cluster(const FixedEffectsFit& fit,
                    const std::map<std::string, std::string>& cluster_of);

std::map<std::string, std::string> cluster_by_unit(const Panel& panel);

struct InferenceConfig {
  int replications = 200;  // B
  std::uint64_t seed = 0;
};

// Point estimator rerun on resampled or relabeled panels.
using EstimatorFn = std::function<double(const Panel&)>;

struct ResampleResult {
  double se = 0.0;
  double p = 1.0;
  std::vector<double> replicates;
  std::vector<std::string> failures;  // skipped replicates, with cause
};

// Placebo variance: reassign placebo treatment among control units
// (stratified by group so DDD-family cells survive), rerun the estimator
// on the controls-only panel, and take the population variance across
// replicates (denominator B). When the number of distinct assignments is
// at most B the assignments are enumerated exhaustively instead of drawn.
ResampleResult se_placebo(const Panel& panel, const EstimatorFn& estimator,
                          const InferenceConfig& cfg, double point_estimate);

// Block bootstrap: units resampled with replacement within each
// (treat, group) stratum, each keeping its whole time series; se is the
// sample sd across replicates (denominator B-1).
ResampleResult se_block_bootstrap(const Panel& panel, const EstimatorFn& estimator,
                                  const InferenceConfig& cfg, double point_estimate);

}  // namespace tripled
