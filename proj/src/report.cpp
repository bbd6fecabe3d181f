#include "tripled/report.hpp"

#include <iomanip>
#include <ostream>

namespace tripled {

nlohmann::json report_to_json(const EstimateReport& report) {
  nlohmann::json se = nlohmann::json::array();
  for (const auto& entry : report.se_entries) {
    se.push_back({{"method", entry.method}, {"value", entry.se}, {"p", entry.p_value}});
  }
  nlohmann::json j = {
      {"schema_version", kSchemaVersion},
      {"estimator", report.estimator_kind},
      {"estimate", report.estimate},
      {"se", se},
      {"n_units", report.n_units},
      {"n_periods", report.n_periods},
      {"n_obs", report.n_obs},
  };
  if (!report.solver_diag.empty()) j["solver_diag"] = report.solver_diag;
  return j;
}

nlohmann::json weights_to_json(const WeightSet& weights) {
  nlohmann::json omega = nlohmann::json::object();
  for (const auto& [unit, w] : weights.unit_weights) omega[unit] = w;
  nlohmann::json lambda = nlohmann::json::object();
  for (const auto& [time, w] : weights.time_weights) lambda[std::to_string(time)] = w;
  return {
      {"schema_version", kSchemaVersion},
      {"omega", omega},
      {"omega0", weights.unit_intercept},
      {"lambda", lambda},
      {"lambda0", weights.time_intercept},
      {"zeta", weights.zeta},
      {"diag",
       {{"unit_iterations", weights.unit_diag.iterations},
        {"unit_gap", weights.unit_diag.gap},
        {"time_iterations", weights.time_diag.iterations},
        {"time_gap", weights.time_diag.gap}}},
  };
}

void write_weights_csv(const WeightSet& weights, std::ostream& out) {
  out << "kind,key,weight\n" << std::setprecision(17);
  for (const auto& [unit, w] : weights.unit_weights) {
    out << "omega," << unit << ',' << w << "\n";
  }
  out << "omega0,," << weights.unit_intercept << "\n";
  for (const auto& [time, w] : weights.time_weights) {
    out << "lambda," << time << ',' << w << "\n";
  }
  out << "lambda0,," << weights.time_intercept << "\n";
  out << "zeta,," << weights.zeta << "\n";
}

nlohmann::json error_to_json(const Error& error) {
  return {
      {"schema_version", kSchemaVersion},
      {"error", {{"kind", error_kind_name(error.kind())}, {"message", error.detail()}}},
  };
}

nlohmann::json dgp_to_json(const DgpConfig& config) {
  nlohmann::json j = {
      {"n_units_per_cell", config.n_units_per_cell},
      {"periods", config.periods},
      {"post_start", config.post_start},
      {"true_delta", config.true_delta},
      {"true_gamma1", config.true_gamma1},
      {"true_gamma2", config.true_gamma2},
      {"growth", config.growth},
      {"noise_sd", config.noise_sd},
      {"k_covariates", config.k_covariates},
      {"seed", config.seed},
      {"unit_effect_sd", config.unit_effect_sd},
      {"covariate_scale", config.covariate_scale},
      {"loading_base", config.loading_base},
      {"loading_spread", config.loading_spread},
      {"rate_spread", config.rate_spread},
  };
  if (config.n_treated_per_cell) j["n_treated_per_cell"] = *config.n_treated_per_cell;
  if (config.beta_by_cell) {
    nlohmann::json cells = nlohmann::json::object();
    for (const auto& [key, beta] : *config.beta_by_cell) {
      const std::string name =
          std::to_string(key.first) + ":" + std::to_string(key.second);
      cells[name] = std::vector<double>(beta.data(), beta.data() + beta.size());
    }
    j["beta_by_cell"] = cells;
  }
  return j;
}

DgpConfig dgp_from_json(const nlohmann::json& j) {
  DgpConfig config;
  try {
    config.n_units_per_cell = j.at("n_units_per_cell").get<int>();
    if (j.contains("n_treated_per_cell")) {
      config.n_treated_per_cell = j.at("n_treated_per_cell").get<int>();
    }
    config.periods = j.at("periods").get<std::vector<long long>>();
    config.post_start = j.at("post_start").get<long long>();
    config.true_delta = j.value("true_delta", 0.0);
    config.true_gamma1 = j.value("true_gamma1", 0.0);
    config.true_gamma2 = j.value("true_gamma2", 0.0);
    if (j.contains("growth")) config.growth = j.at("growth").get<std::array<double, 4>>();
    config.noise_sd = j.value("noise_sd", 0.0);
    config.k_covariates = j.value("k_covariates", 0);
    config.seed = j.value("seed", static_cast<std::uint64_t>(0));
    config.unit_effect_sd = j.value("unit_effect_sd", 1.0);
    config.covariate_scale = j.value("covariate_scale", 1.0);
    if (j.contains("loading_base")) {
      config.loading_base = j.at("loading_base").get<std::array<double, 4>>();
    }
    if (j.contains("loading_spread")) {
      config.loading_spread = j.at("loading_spread").get<std::array<double, 4>>();
    }
    if (j.contains("rate_spread")) {
      config.rate_spread = j.at("rate_spread").get<std::array<double, 4>>();
    }
    if (j.contains("beta_by_cell")) {
      std::map<std::pair<int, long long>, Eigen::VectorXd> cells;
      for (const auto& [name, values] : j.at("beta_by_cell").items()) {
        const auto colon = name.find(':');
        if (colon == std::string::npos) {
          raise(ErrorKind::ConfigInvalid, "beta_by_cell keys look like 'treat:time'");
        }
        const int treat = std::stoi(name.substr(0, colon));
        const long long time = std::stoll(name.substr(colon + 1));
        const auto slopes = values.get<std::vector<double>>();
        Eigen::VectorXd beta(slopes.size());
        for (std::size_t i = 0; i < slopes.size(); ++i) beta(i) = slopes[i];
        cells[{treat, time}] = std::move(beta);
      }
      config.beta_by_cell = std::move(cells);
    }
  } catch (const nlohmann::json::exception& err) {
    raise(ErrorKind::ConfigInvalid, std::string("bad DGP config: ") + err.what());
  }
  return config;
}

}  // namespace tripled
