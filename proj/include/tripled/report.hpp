#pragma once

#include <json.hpp>
#include <string>

#include "tripled/errors.hpp"
#include "tripled/estimators.hpp"
#include "tripled/sdid.hpp"
#include "tripled/simgen.hpp"

namespace tripled {

inline constexpr int kSchemaVersion = 1;

// {schema_version, estimator, estimate, se: [{method, value, p}], n_units,
//  n_periods, n_obs, solver_diag?}
nlohmann::json report_to_json(const EstimateReport& report);

// {omega: {unit: w}, omega0, lambda: {time: w}, lambda0, zeta, diag}
nlohmann::json weights_to_json(const WeightSet& weights);

// long CSV for the weight dot plots: kind,key,weight
void write_weights_csv(const WeightSet& weights, std::ostream& out);

nlohmann::json error_to_json(const Error& error);

nlohmann::json dgp_to_json(const DgpConfig& config);
DgpConfig dgp_from_json(const nlohmann::json& j);

}  // namespace tripled
