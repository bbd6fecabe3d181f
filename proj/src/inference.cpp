#include "tripled/inference.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <set>

#include "tripled/rng.hpp"

namespace tripled {

double p_value(double estimate, double se, DfRule rule, long long df) {
  if (se < 0.0) raise(ErrorKind::DimensionMismatch, "negative standard error");
  if (se == 0.0) return estimate == 0.0 ? 1.0 : 0.0;
  const double stat = std::abs(estimate) / se;
  if (rule == DfRule::Normal) {
    boost::math::normal_distribution<double> normal;
    return 2.0 * boost::math::cdf(boost::math::complement(normal, stat));
  }
  if (df < 1) raise(ErrorKind::ZeroDof, "t reference needs positive degrees of freedom");
  boost::math::students_t_distribution<double> t(static_cast<double>(df));
  return 2.0 * boost::math::cdf(boost::math::complement(t, stat));
}

SeResult se_regular(const FixedEffectsFit& fit) {
  if (fit.dof_resid <= 0) {
    raise(ErrorKind::ZeroDof, "no residual degrees of freedom");
  }
  const double rss = fit.residuals.squaredNorm();
  const double sigma2 = rss / static_cast<double>(fit.dof_resid);
  const Eigen::MatrixXd xtx = fit.within_design.transpose() * fit.within_design;
  Eigen::VectorXd ek = Eigen::VectorXd::Zero(xtx.cols());
  ek(0) = 1.0;
  const Eigen::VectorXd xtx_inv_col = xtx.ldlt().solve(ek);
  const double variance = sigma2 * xtx_inv_col(0);
  SeResult out;
  out.se = variance > 0.0 ? std::sqrt(variance) : 0.0;
  out.p = p_value(fit.coefficient, out.se, DfRule::TDof, fit.dof_resid);
  return out;
}

SeResult se_cluster(const FixedEffectsFit& fit,
                    const std::map<std::string, std::string>& cluster_of) {
  // rows per cluster, via the unit of each observation
  std::map<std::string, std::vector<Eigen::Index>> rows_by_cluster;
  for (std::size_t i = 0; i < fit.obs_keys.size(); ++i) {
    auto it = cluster_of.find(fit.obs_keys[i].first);
    if (it == cluster_of.end()) {
      raise(ErrorKind::DimensionMismatch,
            "no cluster id for unit '" + fit.obs_keys[i].first + "'");
    }
    rows_by_cluster[it->second].push_back(static_cast<Eigen::Index>(i));
  }
  const std::size_t n_clusters = rows_by_cluster.size();
  if (n_clusters < 2) raise(ErrorKind::SingleCluster, "clustered se needs >= 2 clusters");

  const Eigen::Index k = fit.within_design.cols();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [cluster, rows] : rows_by_cluster) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(k);
    for (Eigen::Index row : rows) {
      score += fit.within_design.row(row).transpose() * fit.residuals(row);
    }
    meat += score * score.transpose();
  }

  SeResult out;
  if (meat.norm() == 0.0) {  // all-zero residuals: degenerate but well-defined
    out.se = 0.0;
    out.p = p_value(fit.coefficient, 0.0, DfRule::Normal, 1);
    return out;
  }

  const double n = static_cast<double>(fit.n_obs);
  const double params = n - static_cast<double>(fit.dof_resid);
  if (n - params <= 0.0) raise(ErrorKind::ZeroDof, "no residual degrees of freedom");
  const double g = static_cast<double>(n_clusters);
  const double c = (g / (g - 1.0)) * ((n - 1.0) / (n - params));

  const Eigen::MatrixXd xtx = fit.within_design.transpose() * fit.within_design;
  const auto solver = xtx.ldlt();
  const Eigen::MatrixXd bread_meat = solver.solve(meat);
  const Eigen::MatrixXd sandwich = solver.solve(bread_meat.transpose());
  const double variance = c * sandwich(0, 0);
  out.se = variance > 0.0 ? std::sqrt(variance) : 0.0;
  out.p = p_value(fit.coefficient, out.se, DfRule::TDof,
                  static_cast<long long>(n_clusters) - 1);
  return out;
}

std::map<std::string, std::string> cluster_by_unit(const Panel& panel) {
  std::map<std::string, std::string> clusters;
  for (const auto& u : panel.units()) clusters[u.id] = u.id;
  return clusters;
}

namespace {

// Placebo assignments are stratified by group so that reassignment inside
// a DDD panel keeps every (treat, group) cell populated.
struct PlaceboPool {
  std::vector<std::string> controls;  // sorted unit ids
  std::size_t n_placebo = 0;
};

std::vector<PlaceboPool> build_placebo_pools(const Panel& panel) {
  std::map<int, PlaceboPool> by_group;
  std::map<int, std::size_t> treated_count;
  for (const auto& u : panel.units()) {
    if (u.treat == 1) {
      treated_count[u.group] += 1;
    } else {
      by_group[u.group].controls.push_back(u.id);
    }
  }
  std::vector<PlaceboPool> pools;
  for (const auto& [group, count] : treated_count) {
    auto it = by_group.find(group);
    if (it == by_group.end() || it->second.controls.size() <= count) {
      raise(ErrorKind::TooFewControls,
            "placebo inference needs more controls than treated units in group " +
                std::to_string(group));
    }
    PlaceboPool pool = it->second;
    std::sort(pool.controls.begin(), pool.controls.end());
    pool.n_placebo = count;
    pools.push_back(std::move(pool));
  }
  if (pools.empty()) raise(ErrorKind::TooFewControls, "panel has no treated units");
  return pools;
}

double count_assignments_capped(const std::vector<PlaceboPool>& pools, double cap) {
  double total = 1.0;
  for (const auto& pool : pools) {
    // C(n, k), capped to avoid overflow
    double c = 1.0;
    const double n = static_cast<double>(pool.controls.size());
    for (std::size_t i = 0; i < pool.n_placebo; ++i) {
      c *= (n - static_cast<double>(i)) / static_cast<double>(i + 1);
      if (c > cap) return cap + 1.0;
    }
    total *= c;
    if (total > cap) return cap + 1.0;
  }
  return total;
}

Panel placebo_relabel(const Panel& panel, const std::set<std::string>& placebo_units) {
  std::vector<Observation> kept;
  for (const auto& ob : panel.observations()) {
    const UnitInfo& info = panel.units()[panel.unit_index(ob.unit)];
    if (info.treat == 1) continue;  // placebo reruns use controls only
    Observation copy = ob;
    copy.treat = placebo_units.count(ob.unit) ? 1 : 0;
    kept.push_back(std::move(copy));
  }
  return Panel(std::move(kept), panel.post_start());
}

bool next_combination(std::vector<std::size_t>& idx, std::size_t n) {
  const std::size_t k = idx.size();
  for (std::size_t i = k; i-- > 0;) {
    if (idx[i] < n - (k - i)) {
      ++idx[i];
      for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

std::vector<std::set<std::string>> enumerate_assignments(
    const std::vector<PlaceboPool>& pools) {
  std::vector<std::set<std::string>> all = {{}};
  for (const auto& pool : pools) {
    std::vector<std::set<std::string>> extended;
    std::vector<std::size_t> idx(pool.n_placebo);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    bool more = true;
    while (more) {
      for (const auto& base : all) {
        std::set<std::string> assignment = base;
        for (std::size_t i : idx) assignment.insert(pool.controls[i]);
        extended.push_back(std::move(assignment));
      }
      more = next_combination(idx, pool.controls.size());
    }
    all = std::move(extended);
  }
  return all;
}

std::set<std::string> draw_assignment(const std::vector<PlaceboPool>& pools, Rng& rng) {
  std::set<std::string> assignment;
  for (const auto& pool : pools) {
    for (std::size_t i :
         rng.sample_without_replacement(pool.controls.size(), pool.n_placebo)) {
      assignment.insert(pool.controls[i]);
    }
  }
  return assignment;
}

}  // namespace

ResampleResult se_placebo(const Panel& panel, const EstimatorFn& estimator,
                          const InferenceConfig& cfg, double point_estimate) {
  if (cfg.replications < 2) {
    raise(ErrorKind::ConfigInvalid, "placebo inference needs B >= 2");
  }
  const std::vector<PlaceboPool> pools = build_placebo_pools(panel);

  std::vector<std::set<std::string>> assignments;
  const double distinct =
      count_assignments_capped(pools, static_cast<double>(cfg.replications));
  if (distinct <= static_cast<double>(cfg.replications)) {
    assignments = enumerate_assignments(pools);
  } else {
    assignments.reserve(cfg.replications);
    for (int b = 0; b < cfg.replications; ++b) {
      Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(b));
      assignments.push_back(draw_assignment(pools, rng));
    }
  }

  ResampleResult out;
  for (std::size_t b = 0; b < assignments.size(); ++b) {
    try {
      out.replicates.push_back(estimator(placebo_relabel(panel, assignments[b])));
    } catch (const Error& err) {
      out.failures.push_back("replicate " + std::to_string(b) + ": " + err.what());
    }
  }
  if (out.replicates.size() < (assignments.size() + 1) / 2) {
    raise(ErrorKind::TooManyFailedReplicates,
          std::to_string(out.failures.size()) + " of " +
              std::to_string(assignments.size()) + " placebo replicates failed");
  }

  // population variance across placebo estimates (denominator B)
  const double n = static_cast<double>(out.replicates.size());
  double mean = 0.0;
  for (double v : out.replicates) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : out.replicates) ss += (v - mean) * (v - mean);
  out.se = std::sqrt(ss / n);
  out.p = p_value(point_estimate, out.se, DfRule::Normal, 1);
  return out;
}

ResampleResult se_block_bootstrap(const Panel& panel, const EstimatorFn& estimator,
                                  const InferenceConfig& cfg, double point_estimate) {
  if (cfg.replications < 2) {
    raise(ErrorKind::ConfigInvalid, "bootstrap inference needs B >= 2");
  }
  if (!panel.is_balanced()) {
    raise(ErrorKind::UnbalancedPanel, "block bootstrap needs a balanced panel");
  }

  // strata = (treat, group) unit lists, in sorted unit order
  std::map<std::pair<int, int>, std::vector<std::size_t>> strata;
  for (std::size_t u = 0; u < panel.n_units(); ++u) {
    const UnitInfo& info = panel.units()[u];
    strata[{info.treat, info.group}].push_back(u);
  }
  for (const auto& [key, members] : strata) {
    if (members.size() < 2) {
      raise(ErrorKind::ConfigInvalid,
            "bootstrap stratum (treat=" + std::to_string(key.first) + ", group=" +
                std::to_string(key.second) + ") has fewer than 2 units");
    }
  }

  const std::size_t n_times = panel.n_periods();
  ResampleResult out;
  out.replicates.reserve(cfg.replications);
  for (int b = 0; b < cfg.replications; ++b) {
    Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(b));
    bool done = false;
    for (int attempt = 0; attempt < 10 && !done; ++attempt) {
      std::vector<Observation> resampled;
      resampled.reserve(panel.n_obs());
      std::size_t slot = 0;
      for (const auto& [key, members] : strata) {
        for (std::size_t pick = 0; pick < members.size(); ++pick) {
          const std::size_t u = members[rng.below(members.size())];
          const std::string clone_id =
              panel.units()[u].id + "#" + std::to_string(slot++);
          for (std::size_t t = 0; t < n_times; ++t) {
            Observation copy = panel.at(u, t);
            copy.unit = clone_id;
            resampled.push_back(std::move(copy));
          }
        }
      }
      try {
        out.replicates.push_back(estimator(Panel(std::move(resampled), panel.post_start())));
        done = true;
      } catch (const Error& err) {
        out.failures.push_back("replicate " + std::to_string(b) + " attempt " +
                               std::to_string(attempt) + ": " + err.what());
      }
    }
    if (!done) {
      raise(ErrorKind::DegenerateResample,
            "replicate " + std::to_string(b) + " failed 10 consecutive redraws");
    }
  }

  const double n = static_cast<double>(out.replicates.size());
  double mean = 0.0;
  for (double v : out.replicates) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : out.replicates) ss += (v - mean) * (v - mean);
  out.se = std::sqrt(ss / (n - 1.0));
  out.p = p_value(point_estimate, out.se, DfRule::Normal, 1);
  return out;
}

}  // namespace tripled
