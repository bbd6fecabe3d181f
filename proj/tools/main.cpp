// tripled — panel estimators for difference-in-differences designs:
// plain and two-way fixed-effects DID, standard and transformed triple
// difference, and their synthetic-control weighted versions, with a
// deterministic simulator and trend/weight exports for plotting.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>

#include "tripled/estimators.hpp"
#include "tripled/inference.hpp"
#include "tripled/panel.hpp"
#include "tripled/report.hpp"
#include "tripled/sdid.hpp"
#include "tripled/simgen.hpp"
#include "tripled/transform.hpp"

namespace {

using nlohmann::json;
using namespace tripled;

enum class LogLevel { Debug = 0, Info, Warn, Error, Off };

LogLevel log_level() {
  const char* env = std::getenv("TRIPLED_LOG");
  if (!env) return LogLevel::Warn;
  const std::string level(env);
  if (level == "debug") return LogLevel::Debug;
  if (level == "info") return LogLevel::Info;
  if (level == "warn") return LogLevel::Warn;
  if (level == "error") return LogLevel::Error;
  if (level == "off") return LogLevel::Off;
  return LogLevel::Warn;
}

void log(LogLevel level, const std::string& message) {
  static const LogLevel threshold = log_level();
  if (level < threshold) return;
  static const char* names[] = {"debug", "info", "warn", "error", ""};
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << "\n";
}

int exit_code_for(const Error& error) {
  switch (error.category()) {
    case ErrorCategory::Input: return 2;
    case ErrorCategory::Numeric: return 3;
    case ErrorCategory::Config: return 4;
  }
  return 3;
}

void emit(const json& payload, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << payload.dump(2) << std::endl;
    return;
  }
  std::ofstream out(out_path);
  if (!out) raise(ErrorKind::MissingInput, "cannot write to '" + out_path + "'");
  out << payload.dump(2) << "\n";
}

struct CommonDataArgs {
  std::string data_path;
  long long post_start = 0;
  Schema schema;
  std::vector<std::string> covariates;
  bool filter_positive = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data_path, "panel CSV path")->required();
    cmd->add_option("--post-start", post_start,
                    "first post-treatment period (Post_t = 1 for t >= this)")
        ->required();
    cmd->add_option("--covariates", covariates,
                    "comma-separated covariate columns; enables covariate adjustment")
        ->delimiter(',');
    cmd->add_option("--unit-col", schema.unit_column, "unit id column");
    cmd->add_option("--time-col", schema.time_column, "period column");
    cmd->add_option("--treat-col", schema.treat_column, "treatment flag column");
    cmd->add_option("--group-col", schema.group_column, "subgroup flag column");
    cmd->add_option("--outcome-col", schema.outcome_column, "outcome column");
    cmd->add_flag("--filter-positive-outcome", filter_positive,
                  "drop rows with outcome <= 0 before estimating");
  }

  Panel load() const {
    Schema effective = schema;
    effective.covariate_columns = covariates;
    Panel panel = load_panel_file(data_path, effective, post_start);
    if (filter_positive) {
      panel = filter_positive_outcome(panel);
      log(LogLevel::Info, "positive-outcome filter kept " +
                              std::to_string(panel.n_obs()) + " observations");
    }
    return panel;
  }
};

const std::vector<std::string> kMethods = {"did",  "did-twfe", "ddd",
                                           "tddd", "sdid",     "sddd"};

struct EstimateArgs {
  CommonDataArgs data;
  std::string method;
  std::vector<std::string> se_methods;
  int replications = 200;
  std::uint64_t seed = 0;
  bool uniform_weights = false;
  std::string out_path;
  std::string replicates_out;
};

void validate_se_request(const std::string& method, const std::vector<std::string>& se) {
  for (const auto& name : se) {
    const bool fe_method = method == "did-twfe" || method == "ddd" || method == "tddd";
    if ((name == "regular" || name == "cluster") && !fe_method) {
      raise(ErrorKind::ConfigInvalid,
            "se=" + name + " needs a fixed-effects regression (did-twfe, ddd, tddd)");
    }
    if (name == "placebo" && method != "sdid" && method != "sddd") {
      raise(ErrorKind::ConfigInvalid, "se=placebo is defined for sdid and sddd only");
    }
    if (name != "regular" && name != "cluster" && name != "placebo" &&
        name != "bootstrap") {
      raise(ErrorKind::ConfigInvalid, "unknown se method '" + name + "'");
    }
  }
}

int run_estimate(const EstimateArgs& args) {
  validate_se_request(args.method, args.se_methods);
  const Panel panel = args.data.load();
  const bool with_cov = !args.data.covariates.empty();

  SdidOptions sdid_options;
  sdid_options.force_uniform = args.uniform_weights;

  // point estimate, optional regression fit, optional weights, and the
  // closure resampling inference reruns on relabeled panels
  EstimateReport report;
  std::optional<FixedEffectsFit> fit;
  std::optional<WeightSet> weights;
  EstimatorFn rerun;

  const std::string& method = args.method;
  if (method == "did") {
    report = did_group_means(panel);
    rerun = [](const Panel& p) { return did_group_means(p).estimate; };
  } else if (method == "did-twfe") {
    fit = did_twfe(panel);
    report = make_report("DID_TWFE", *fit);
    rerun = [](const Panel& p) { return did_twfe(p).coefficient; };
  } else if (method == "ddd") {
    fit = ddd_standard(panel, with_cov);
    report = make_report("DDD_standard", *fit);
    rerun = [with_cov](const Panel& p) { return ddd_standard(p, with_cov).coefficient; };
  } else if (method == "tddd") {
    fit = ddd_transformed(panel, with_cov);
    report = make_report("DDD_transformed", *fit);
    report.solver_diag["covariate_adjusted"] = fit->outcome_note == "W_cov" ? 1.0 : 0.0;
    rerun = [with_cov](const Panel& p) {
      return ddd_transformed(p, with_cov).coefficient;
    };
  } else if (method == "sdid") {
    SdidEstimate est = sdid_estimate(panel, sdid_options);
    report = est.report;
    weights = est.weights;
    rerun = [sdid_options](const Panel& p) {
      return sdid_estimate(p, sdid_options).report.estimate;
    };
  } else if (method == "sddd") {
    SdidEstimate est = sddd_estimate(panel, with_cov, sdid_options);
    report = est.report;
    weights = est.weights;
    rerun = [with_cov, sdid_options](const Panel& p) {
      return sddd_estimate(p, with_cov, sdid_options).report.estimate;
    };
  } else {
    raise(ErrorKind::ConfigInvalid, "unknown method '" + method + "'");
  }

  InferenceConfig inference{args.replications, args.seed};
  std::vector<std::pair<std::string, std::vector<double>>> replicate_dump;
  for (const auto& se_name : args.se_methods) {
    SeEntry entry;
    entry.method = se_name;
    if (se_name == "regular") {
      const SeResult r = se_regular(*fit);
      entry.se = r.se;
      entry.p_value = r.p;
    } else if (se_name == "cluster") {
      const SeResult r = se_cluster(*fit, cluster_by_unit(panel));
      entry.se = r.se;
      entry.p_value = r.p;
    } else {
      const ResampleResult r =
          se_name == "placebo"
              ? se_placebo(panel, rerun, inference, report.estimate)
              : se_block_bootstrap(panel, rerun, inference, report.estimate);
      entry.se = r.se;
      entry.p_value = r.p;
      for (const auto& failure : r.failures) log(LogLevel::Warn, failure);
      if (!args.replicates_out.empty()) replicate_dump.emplace_back(se_name, r.replicates);
    }
    report.se_entries.push_back(entry);
  }

  // replicate,estimate rows; one file per resampling method, with the
  // method spliced into the name when both were requested
  for (const auto& [method_name, draws] : replicate_dump) {
    std::string path = args.replicates_out;
    if (replicate_dump.size() > 1) {
      const auto dot = path.rfind('.');
      path = dot == std::string::npos
                 ? path + "_" + method_name
                 : path.substr(0, dot) + "_" + method_name + path.substr(dot);
    }
    std::ofstream out(path);
    if (!out) raise(ErrorKind::MissingInput, "cannot write '" + path + "'");
    out << "replicate,estimate\n" << std::setprecision(17);
    for (std::size_t b = 0; b < draws.size(); ++b) {
      out << b << ',' << draws[b] << "\n";
    }
  }

  json payload = report_to_json(report);
  if (weights) payload["weights"] = weights_to_json(*weights);
  emit(payload, args.out_path);
  return 0;
}

struct SimulateArgs {
  std::string scenario;
  int scale = 1;
  std::uint64_t seed = 0;
  std::string config_path;
  std::optional<double> true_delta;
  std::optional<double> noise_sd;
  std::string out_path = "panel.csv";
  std::string meta_path;
};

int run_simulate(const SimulateArgs& args) {
  DgpConfig config;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) raise(ErrorKind::MissingInput, "cannot open '" + args.config_path + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& err) {
      raise(ErrorKind::ConfigInvalid, std::string("bad config JSON: ") + err.what());
    }
    config = dgp_from_json(j);
    config.seed = args.seed;
  } else if (args.scenario == "fig1") {
    config = scenario_fig1_config(args.scale, args.seed);
  } else {
    raise(ErrorKind::ConfigInvalid, "pass --config FILE or --scenario fig1");
  }
  if (args.true_delta) config.true_delta = *args.true_delta;
  if (args.noise_sd) config.noise_sd = *args.noise_sd;

  const Panel panel = generate(config);

  std::ofstream out(args.out_path);
  if (!out) raise(ErrorKind::MissingInput, "cannot write '" + args.out_path + "'");
  write_panel_csv(panel, out);

  std::string meta_path = args.meta_path;
  if (meta_path.empty()) {
    const auto dot = args.out_path.rfind('.');
    meta_path = args.out_path.substr(0, dot == std::string::npos ? args.out_path.size()
                                                                 : dot) +
                "_meta.json";
  }
  json meta = dgp_to_json(config);
  meta["schema_version"] = kSchemaVersion;
  meta["n_units"] = panel.n_units();
  meta["n_obs"] = panel.n_obs();
  emit(meta, meta_path);
  log(LogLevel::Info, "wrote " + args.out_path + " and " + meta_path);
  return 0;
}

struct TrendsArgs {
  CommonDataArgs data;
  std::string method = "sddd";
  bool uniform_weights = false;
  std::string out_path;
  std::string weights_out;
  std::string series_out;
};

int run_trends(const TrendsArgs& args) {
  const Panel panel = args.data.load();
  const bool with_cov = !args.data.covariates.empty();
  const std::string& method = args.method;

  std::ostringstream rows;
  rows << "series,time,value\n" << std::setprecision(17);

  // raw cell means for every (treat, group) arm that exists
  for (int treat = 0; treat < 2; ++treat) {
    for (int group = 0; group < 2; ++group) {
      bool exists = false;
      for (const auto& u : panel.units()) {
        if (u.treat == treat && u.group == group) {
          exists = true;
          break;
        }
      }
      if (!exists) continue;
      for (long long t : panel.times()) {
        rows << "raw_t" << treat << "_g" << group << ',' << t << ','
             << cell_mean(panel, {treat, group, t}) << "\n";
      }
    }
  }

  const bool ddd_family = method == "ddd" || method == "tddd" || method == "sddd";
  std::optional<WeightSet> weights;
  if (ddd_family) {
    TransformedSeries series =
        with_cov ? demean_ddd_cov(panel, fit_cell_regressions(panel))
                 : demean_ddd(panel);
    if (!args.series_out.empty()) {
      std::ofstream out(args.series_out);
      if (!out) raise(ErrorKind::MissingInput, "cannot write '" + args.series_out + "'");
      write_series_csv(series, out);
    }
    // W means by treat arm over the target subgroup
    for (int arm = 0; arm < 2; ++arm) {
      std::map<long long, std::pair<double, std::size_t>> acc;
      for (const auto& [key, value] : series.values) {
        const UnitInfo& info = panel.units()[panel.unit_index(key.first)];
        if (info.treat == arm) {
          acc[key.second].first += value;
          acc[key.second].second += 1;
        }
      }
      for (const auto& [t, sum_count] : acc) {
        rows << "w_treat" << arm << ',' << t << ','
             << sum_count.first / static_cast<double>(sum_count.second) << "\n";
      }
    }
    // complement means: zero by construction, emitted as an identity check
    for (int arm = 0; arm < 2; ++arm) {
      std::map<long long, std::pair<double, std::size_t>> acc;
      for (const auto& [key, value] : series.complement_values) {
        const UnitInfo& info = panel.units()[panel.unit_index(key.first)];
        if (info.treat == arm) {
          acc[key.second].first += value;
          acc[key.second].second += 1;
        }
      }
      for (const auto& [t, sum_count] : acc) {
        rows << "w_nontarget_treat" << arm << ',' << t << ','
             << sum_count.first / static_cast<double>(sum_count.second) << "\n";
      }
    }

    if (method == "sddd") {
      SdidOptions options;
      options.force_uniform = args.uniform_weights;
      SdidEstimate est = sdid_estimate(panel, series, options);
      weights = est.weights;
      const SdidData data = extract_sdid_data(with_outcome(panel, series.values));
      for (std::size_t t = 0; t < data.pre_times.size(); ++t) {
        double synth = est.weights.unit_intercept;
        for (std::size_t i = 0; i < data.control_ids.size(); ++i) {
          synth += est.weights.unit_weights.at(data.control_ids[i]) * data.control_pre(i, t);
        }
        rows << "synthetic_control," << data.pre_times[t] << ',' << synth << "\n";
        rows << "treated_mean," << data.pre_times[t] << ',' << data.treated_pre_mean(t)
             << "\n";
      }
      for (std::size_t t = 0; t < data.post_times.size(); ++t) {
        double synth = est.weights.unit_intercept;
        for (std::size_t i = 0; i < data.control_ids.size(); ++i) {
          synth += est.weights.unit_weights.at(data.control_ids[i]) * data.control_post(i, t);
        }
        rows << "synthetic_control," << data.post_times[t] << ',' << synth << "\n";
        rows << "treated_mean," << data.post_times[t] << ','
             << data.treated_post_mean(t) << "\n";
      }
    }
  } else if (method == "sdid") {
    SdidOptions options;
    options.force_uniform = args.uniform_weights;
    SdidEstimate est = sdid_estimate(panel, options);
    weights = est.weights;
    const SdidData data = extract_sdid_data(panel);
    for (std::size_t t = 0; t < data.pre_times.size(); ++t) {
      double synth = est.weights.unit_intercept;
      for (std::size_t i = 0; i < data.control_ids.size(); ++i) {
        synth += est.weights.unit_weights.at(data.control_ids[i]) * data.control_pre(i, t);
      }
      rows << "synthetic_control," << data.pre_times[t] << ',' << synth << "\n";
      rows << "treated_mean," << data.pre_times[t] << ',' << data.treated_pre_mean(t)
           << "\n";
    }
    for (std::size_t t = 0; t < data.post_times.size(); ++t) {
      double synth = est.weights.unit_intercept;
      for (std::size_t i = 0; i < data.control_ids.size(); ++i) {
        synth += est.weights.unit_weights.at(data.control_ids[i]) * data.control_post(i, t);
      }
      rows << "synthetic_control," << data.post_times[t] << ',' << synth << "\n";
      rows << "treated_mean," << data.post_times[t] << ',' << data.treated_post_mean(t)
           << "\n";
    }
  } else if (method != "did" && method != "did-twfe") {
    raise(ErrorKind::ConfigInvalid, "unknown method '" + method + "'");
  }

  if (args.out_path.empty() || args.out_path == "-") {
    std::cout << rows.str();
  } else {
    std::ofstream out(args.out_path);
    if (!out) raise(ErrorKind::MissingInput, "cannot write '" + args.out_path + "'");
    out << rows.str();
  }

  if (weights && !args.weights_out.empty()) {
    std::ofstream out(args.weights_out);
    if (!out) raise(ErrorKind::MissingInput, "cannot write '" + args.weights_out + "'");
    write_weights_csv(*weights, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"panel difference-in-differences and synthetic-control estimators"};
  app.require_subcommand(1);

  EstimateArgs estimate_args;
  CLI::App* estimate = app.add_subcommand("estimate", "fit an estimator on a panel CSV");
  estimate_args.data.attach(estimate);
  estimate->add_option("--method", estimate_args.method, "estimator")
      ->required()
      ->check(CLI::IsMember(kMethods));
  estimate->add_option("--se", estimate_args.se_methods,
                       "standard errors: regular,cluster,placebo,bootstrap")
      ->delimiter(',');
  estimate->add_option("--B", estimate_args.replications, "replications for placebo/bootstrap");
  estimate->add_option("--seed", estimate_args.seed, "rng seed for placebo/bootstrap");
  estimate->add_flag("--uniform-weights", estimate_args.uniform_weights,
                     "force uniform synthetic-control weights");
  estimate->add_option("--out", estimate_args.out_path, "report JSON path (default stdout)");
  estimate->add_option("--replicates-out", estimate_args.replicates_out,
                       "CSV dump of replicate estimates");

  SimulateArgs simulate_args;
  CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic panel");
  simulate->add_option("--scenario", simulate_args.scenario, "preset scenario (fig1)");
  simulate->add_option("--scale", simulate_args.scale, "unit-count multiplier");
  simulate->add_option("--seed", simulate_args.seed, "rng seed");
  simulate->add_option("--config", simulate_args.config_path, "DGP config JSON");
  simulate->add_option("--true-delta", simulate_args.true_delta, "override the true effect");
  simulate->add_option("--noise-sd", simulate_args.noise_sd, "override the noise sd");
  simulate->add_option("--out", simulate_args.out_path, "panel CSV path");
  simulate->add_option("--meta", simulate_args.meta_path,
                       "metadata JSON path (default <out>_meta.json)");

  TrendsArgs trends_args;
  CLI::App* trends = app.add_subcommand("trends", "export per-period trend series");
  trends_args.data.attach(trends);
  trends->add_option("--method", trends_args.method, "estimator family for the series")
      ->check(CLI::IsMember(kMethods));
  trends->add_flag("--uniform-weights", trends_args.uniform_weights,
                   "force uniform synthetic-control weights");
  trends->add_option("--out", trends_args.out_path, "trends CSV path (default stdout)");
  trends->add_option("--weights-out", trends_args.weights_out,
                     "weights CSV path (sdid/sddd)");
  trends->add_option("--series-out", trends_args.series_out,
                     "per-unit transformed outcome CSV (ddd family)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cout << json{{"schema_version", kSchemaVersion},
                      {"error", {{"kind", "ConfigInvalid"}, {"message", e.what()}}}}
                     .dump(2)
              << std::endl;
    return 4;
  }

  try {
    if (estimate->parsed()) return run_estimate(estimate_args);
    if (simulate->parsed()) return run_simulate(simulate_args);
    if (trends->parsed()) return run_trends(trends_args);
  } catch (const Error& error) {
    std::cout << error_to_json(error).dump(2) << std::endl;
    log(LogLevel::Error, error.what());
    return exit_code_for(error);
  } catch (const std::exception& error) {
    std::cout << json{{"schema_version", kSchemaVersion},
                      {"error", {{"kind", "Internal"}, {"message", error.what()}}}}
                     .dump(2)
              << std::endl;
    return 3;
  }
  return 0;
}
