#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tripled/errors.hpp"

namespace tripled {

// Long-format balanced panel: one Observation per (unit, time). The treat
// and group flags are unit-level attributes; Post is derived from the
// panel's post_start so it can never disagree across rows of one period.

struct Observation {
  std::string unit;
  long long time = 0;
  int treat = 0;  // 1 if the unit is in the treated arm
  int group = 0;  // 1 if the unit is in the subgroup of interest
  double outcome = 0.0;
  std::vector<double> covariates;
};

// Identifies one (treat, group, time) cell.
struct CellKey {
  int treat = 0;
  int group = 0;
  long long time = 0;
};

struct BalanceReport {
  bool is_balanced = true;
  std::vector<std::pair<std::string, long long>> missing_pairs;
  std::vector<std::string> dropped_units;
};

enum class BalancePolicy { Reject, DropIncomplete };

// Column mapping for CSV ingestion. When covariate_columns is empty the
// loader picks up every header named x1, x2, ... in numeric order.
struct Schema {
  std::string unit_column = "unit";
  std::string time_column = "time";
  std::string treat_column = "treat";
  std::string group_column = "group";
  std::string outcome_column = "outcome";
  std::vector<std::string> covariate_columns;
};

struct UnitInfo {
  std::string id;
  int treat = 0;
  int group = 0;
};

class Panel {
 public:
  Panel(std::vector<Observation> observations, long long post_start);

  const std::vector<Observation>& observations() const { return obs_; }
  const std::vector<UnitInfo>& units() const { return units_; }
  const std::vector<long long>& times() const { return times_; }
  long long post_start() const { return post_start_; }

  std::size_t n_units() const { return units_.size(); }
  std::size_t n_periods() const { return times_.size(); }
  std::size_t n_obs() const { return obs_.size(); }
  std::size_t n_covariates() const { return k_covariates_; }

  bool is_post(long long time) const { return time >= post_start_; }
  std::size_t unit_index(const std::string& id) const;
  std::size_t time_index(long long time) const;

  // Observations are stored sorted by (unit index, time index); for a
  // balanced panel obs(u, t) addresses them directly.
  bool is_balanced() const { return balanced_; }
  const Observation& at(std::size_t unit_idx, std::size_t time_idx) const;

  std::vector<long long> pre_periods() const;
  std::vector<long long> post_periods() const;

 private:
  std::vector<Observation> obs_;
  std::vector<UnitInfo> units_;
  std::vector<long long> times_;
  std::unordered_map<std::string, std::size_t> unit_lookup_;
  std::unordered_map<long long, std::size_t> time_lookup_;
  long long post_start_ = 0;
  std::size_t k_covariates_ = 0;
  bool balanced_ = false;
};

// CSV ingestion. `source` must have a header row; values use '.' decimals
// and no thousands separators. Throws MissingColumn / ParseError /
// DuplicateKey / InconsistentUnitAttribute.
Panel load_panel(std::istream& source, const Schema& schema, long long post_start);
Panel load_panel_file(const std::string& path, const Schema& schema, long long post_start);

std::pair<Panel, BalanceReport> validate_balanced(const Panel& panel, BalancePolicy policy);

// Arithmetic mean of outcomes over the observations matching `key`.
// Throws EmptyCell when no observation matches.
double cell_mean(const Panel& panel, const CellKey& key);

// Writes the panel back out in the ingestion schema (unit,time,treat,
// group,outcome,x1..xK).
void write_panel_csv(const Panel& panel, std::ostream& out);

// Drops observations with outcome <= 0 (intensive-margin filter exposed by
// the CLI; the core never applies it silently). The result may be
// unbalanced and should be re-validated.
Panel filter_positive_outcome(const Panel& panel);

// Derived panels used by estimators and resampling inference.

// Units satisfying pred(unit) survive, with their full time series.
template <typename Pred>
Panel subpanel_by_unit(const Panel& panel, Pred pred) {
  std::vector<Observation> kept;
  for (const auto& ob : panel.observations()) {
    if (pred(panel.units()[panel.unit_index(ob.unit)])) kept.push_back(ob);
  }
  if (kept.empty()) raise(ErrorKind::EmptyCell, "subpanel has no observations");
  return Panel(std::move(kept), panel.post_start());
}

// Replaces outcomes by `values`; observations without an entry are dropped.
Panel with_outcome(const Panel& panel,
                   const std::map<std::pair<std::string, long long>, double>& values,
                   bool keep_covariates = false);

}  // namespace tripled
