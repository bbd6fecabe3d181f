#include "tripled/transform.hpp"

#include <Eigen/QR>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace tripled {

namespace {

std::string cell_label(int arm, long long time) {
  return "(treat=" + std::to_string(arm) + ", t=" + std::to_string(time) + ")";
}

}  // namespace

TransformedSeries demean_did(const Panel& panel) {
  TransformedSeries series;
  series.kind = TransformKind::Z;

  // control mean per period
  std::map<long long, double> control_mean;
  for (long long t : panel.times()) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& ob : panel.observations()) {
      if (ob.treat == 0 && ob.time == t) {
        total += ob.outcome;
        ++count;
      }
    }
    if (count == 0) {
      raise(ErrorKind::EmptyCell, "no control observations at t=" + std::to_string(t));
    }
    control_mean[t] = total / static_cast<double>(count);
    std::ostringstream desc;
    desc << "cell_mean(treat=0, t=" << t << ") = " << std::setprecision(17)
         << control_mean[t];
    series.baseline_provenance[{0, t}] = desc.str();
  }

  for (const auto& ob : panel.observations()) {
    const double z = ob.outcome - control_mean.at(ob.time);
    if (ob.treat == 1) {
      series.values[{ob.unit, ob.time}] = z;
    } else {
      series.complement_values[{ob.unit, ob.time}] = z;
    }
  }
  return series;
}

TransformedSeries demean_ddd(const Panel& panel) {
  TransformedSeries series;
  series.kind = TransformKind::W;

  // Which treat arms actually carry G=1 observations; those are the arms
  // whose non-target (G=0) cell means must exist at every period.
  bool target_arm[2] = {false, false};
  for (const auto& u : panel.units()) {
    if (u.group == 1) target_arm[u.treat] = true;
  }

  std::map<std::pair<int, long long>, double> nontarget_mean;
  std::map<std::pair<int, long long>, std::size_t> nontarget_count;
  for (const auto& ob : panel.observations()) {
    if (ob.group == 0) {
      nontarget_mean[{ob.treat, ob.time}] += ob.outcome;
      nontarget_count[{ob.treat, ob.time}] += 1;
    }
  }
  for (auto& [key, total] : nontarget_mean) total /= static_cast<double>(nontarget_count[key]);

  for (int j = 0; j < 2; ++j) {
    if (!target_arm[j]) continue;
    for (long long t : panel.times()) {
      if (!nontarget_mean.count({j, t})) {
        raise(ErrorKind::EmptyCell, "non-target cell " + cell_label(j, t) + " is empty");
      }
    }
  }
  for (const auto& [key, mean] : nontarget_mean) {
    std::ostringstream desc;
    desc << "cell_mean(G=0, treat=" << key.first << ", t=" << key.second
         << ") = " << std::setprecision(17) << mean;
    series.baseline_provenance[key] = desc.str();
  }

  for (const auto& ob : panel.observations()) {
    const auto key = std::make_pair(ob.treat, ob.time);
    auto it = nontarget_mean.find(key);
    if (it == nontarget_mean.end()) continue;  // G=0 arm with no opposite cell
    const double w = ob.outcome - it->second;
    if (ob.group == 1) {
      series.values[{ob.unit, ob.time}] = w;
    } else {
      series.complement_values[{ob.unit, ob.time}] = w;
    }
  }
  return series;
}

CellRegressionSet fit_cell_regressions(const Panel& panel) {
  const std::size_t K = panel.n_covariates();
  if (K < 1) {
    raise(ErrorKind::ConfigInvalid, "cell regressions need at least one covariate");
  }

  // Gather (G=0) observations per (treat arm, time).
  std::map<std::pair<int, long long>, std::vector<const Observation*>> cells;
  for (const auto& ob : panel.observations()) {
    if (ob.group == 0) cells[{ob.treat, ob.time}].push_back(&ob);
  }

  CellRegressionSet regs;
  for (const auto& [key, rows] : cells) {
    const std::size_t n = rows.size();
    if (n < K + 2) {
      raise(ErrorKind::InsufficientCell,
            "cell " + cell_label(key.first, key.second) + " has " + std::to_string(n) +
                " observations, needs at least " + std::to_string(K + 2));
    }
    Eigen::MatrixXd X(n, K + 1);
    Eigen::VectorXd y(n);
    for (std::size_t r = 0; r < n; ++r) {
      X(r, 0) = 1.0;
      for (std::size_t k = 0; k < K; ++k) X(r, k + 1) = rows[r]->covariates[k];
      y(r) = rows[r]->outcome;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < static_cast<Eigen::Index>(K + 1)) {
      raise(ErrorKind::RankDeficient,
            "cell design in " + cell_label(key.first, key.second) + " has rank " +
                std::to_string(qr.rank()) + " < " + std::to_string(K + 1));
    }
    regs.coefficients[key] = qr.solve(y);
    regs.n_obs[key] = n;
    // scaled condition indicator: ratio of extreme |R| diagonal entries
    const Eigen::VectorXd rdiag = qr.matrixR()
                                      .topLeftCorner(K + 1, K + 1)
                                      .diagonal()
                                      .cwiseAbs();
    regs.condition_diag[key] = rdiag.maxCoeff() / rdiag.minCoeff();
  }
  return regs;
}

TransformedSeries demean_ddd_cov(const Panel& panel, const CellRegressionSet& regs) {
  TransformedSeries series;
  series.kind = TransformKind::WCov;
  const std::size_t K = panel.n_covariates();

  for (const auto& [key, beta] : regs.coefficients) {
    std::ostringstream desc;
    desc << "fit(G=0, treat=" << key.first << ", t=" << key.second << "): beta = [";
    for (Eigen::Index i = 0; i < beta.size(); ++i) {
      if (i) desc << ", ";
      desc << std::setprecision(17) << beta(i);
    }
    desc << "]";
    series.baseline_provenance[key] = desc.str();
  }

  for (const auto& ob : panel.observations()) {
    const auto key = std::make_pair(ob.treat, ob.time);
    auto it = regs.coefficients.find(key);
    if (it == regs.coefficients.end()) {
      if (ob.group == 1) {
        raise(ErrorKind::MissingCellFit,
              "no fitted cell model for " + cell_label(ob.treat, ob.time));
      }
      continue;
    }
    const Eigen::VectorXd& beta = it->second;
    double predicted = beta(0);
    for (std::size_t k = 0; k < K; ++k) predicted += beta(k + 1) * ob.covariates[k];
    const double w = ob.outcome - predicted;
    if (ob.group == 1) {
      series.values[{ob.unit, ob.time}] = w;
    } else {
      series.complement_values[{ob.unit, ob.time}] = w;
    }
  }
  return series;
}

void write_series_csv(const TransformedSeries& series, std::ostream& out) {
  out << "unit,time,value\n" << std::setprecision(17);
  for (const auto& [key, value] : series.values) {
    out << key.first << ',' << key.second << ',' << value << "\n";
  }
}

}  // namespace tripled
