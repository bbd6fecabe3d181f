#include "tripled/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace tripled {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

double parse_double(const std::string& text, std::size_t row, const std::string& column) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    raise(ErrorKind::ParseError,
          "row " + std::to_string(row) + ", column '" + column + "': cannot parse '" +
              text + "' as a real number");
  }
  if (!std::isfinite(value)) {
    raise(ErrorKind::ParseError,
          "row " + std::to_string(row) + ", column '" + column + "': non-finite value");
  }
  return value;
}

long long parse_integer(const std::string& text, std::size_t row, const std::string& column) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  long long value = 0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    raise(ErrorKind::ParseError,
          "row " + std::to_string(row) + ", column '" + column + "': cannot parse '" +
              text + "' as an integer");
  }
  return value;
}

int parse_flag(const std::string& text, std::size_t row, const std::string& column) {
  if (text == "0") return 0;
  if (text == "1") return 1;
  raise(ErrorKind::ParseError, "row " + std::to_string(row) + ", column '" + column +
                                   "': expected 0 or 1, got '" + text + "'");
}

}  // namespace

Panel::Panel(std::vector<Observation> observations, long long post_start)
    : obs_(std::move(observations)), post_start_(post_start) {
  if (obs_.empty()) raise(ErrorKind::ParseError, "panel has no observations");

  k_covariates_ = obs_.front().covariates.size();
  std::map<std::string, UnitInfo> unit_map;
  std::set<long long> time_set;
  for (const auto& ob : obs_) {
    if (ob.covariates.size() != k_covariates_) {
      raise(ErrorKind::ParseError,
            "unit '" + ob.unit + "' has inconsistent covariate count");
    }
    if (!std::isfinite(ob.outcome)) {
      raise(ErrorKind::ParseError, "unit '" + ob.unit + "' has non-finite outcome");
    }
    if ((ob.treat != 0 && ob.treat != 1) || (ob.group != 0 && ob.group != 1)) {
      raise(ErrorKind::ParseError, "unit '" + ob.unit + "' has non-binary treat or group");
    }
    for (double x : ob.covariates) {
      if (!std::isfinite(x)) {
        raise(ErrorKind::ParseError, "unit '" + ob.unit + "' has non-finite covariate");
      }
    }
    auto it = unit_map.find(ob.unit);
    if (it == unit_map.end()) {
      unit_map.emplace(ob.unit, UnitInfo{ob.unit, ob.treat, ob.group});
    } else if (it->second.treat != ob.treat || it->second.group != ob.group) {
      raise(ErrorKind::InconsistentUnitAttribute,
            "unit '" + ob.unit + "' changes treat or group across periods");
    }
    time_set.insert(ob.time);
  }

  units_.reserve(unit_map.size());
  for (auto& [id, info] : unit_map) {
    unit_lookup_.emplace(id, units_.size());
    units_.push_back(info);
  }
  times_.assign(time_set.begin(), time_set.end());
  for (std::size_t i = 0; i < times_.size(); ++i) time_lookup_.emplace(times_[i], i);

  std::sort(obs_.begin(), obs_.end(), [&](const Observation& a, const Observation& b) {
    const std::size_t ua = unit_lookup_.at(a.unit), ub = unit_lookup_.at(b.unit);
    if (ua != ub) return ua < ub;
    return time_lookup_.at(a.time) < time_lookup_.at(b.time);
  });
  for (std::size_t i = 1; i < obs_.size(); ++i) {
    if (obs_[i].unit == obs_[i - 1].unit && obs_[i].time == obs_[i - 1].time) {
      raise(ErrorKind::DuplicateKey, "unit '" + obs_[i].unit + "', time " +
                                         std::to_string(obs_[i].time) + " appears twice");
    }
  }

  balanced_ = obs_.size() == units_.size() * times_.size();

  const bool any_pre = times_.front() < post_start_;
  const bool any_post = times_.back() >= post_start_;
  if (!any_pre || !any_post) {
    raise(ErrorKind::ParseError,
          "post_start " + std::to_string(post_start_) +
              " leaves no " + (any_pre ? "post" : "pre") + " period in the panel");
  }
}

std::size_t Panel::unit_index(const std::string& id) const {
  auto it = unit_lookup_.find(id);
  if (it == unit_lookup_.end()) raise(ErrorKind::ParseError, "unknown unit '" + id + "'");
  return it->second;
}

std::size_t Panel::time_index(long long time) const {
  auto it = time_lookup_.find(time);
  if (it == time_lookup_.end()) {
    raise(ErrorKind::ParseError, "unknown period " + std::to_string(time));
  }
  return it->second;
}

const Observation& Panel::at(std::size_t unit_idx, std::size_t time_idx) const {
  if (!balanced_) raise(ErrorKind::UnbalancedPanel, "dense indexing needs a balanced panel");
  return obs_[unit_idx * times_.size() + time_idx];
}

std::vector<long long> Panel::pre_periods() const {
  std::vector<long long> out;
  for (long long t : times_) {
    if (t < post_start_) out.push_back(t);
  }
  return out;
}

std::vector<long long> Panel::post_periods() const {
  std::vector<long long> out;
  for (long long t : times_) {
    if (t >= post_start_) out.push_back(t);
  }
  return out;
}

Panel load_panel(std::istream& source, const Schema& schema, long long post_start) {
  std::string header_line;
  if (!std::getline(source, header_line)) {
    raise(ErrorKind::ParseError, "empty input: missing header row");
  }
  const std::vector<std::string> header = split_csv_line(header_line);

  auto column_of = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) raise(ErrorKind::MissingColumn, "column '" + name + "' not in header");
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t unit_col = column_of(schema.unit_column);
  const std::size_t time_col = column_of(schema.time_column);
  const std::size_t treat_col = column_of(schema.treat_column);
  const std::size_t group_col = column_of(schema.group_column);
  const std::size_t outcome_col = column_of(schema.outcome_column);

  // Covariates: declared order wins; otherwise x1, x2, ... as found.
  std::vector<std::string> cov_names = schema.covariate_columns;
  if (cov_names.empty()) {
    for (int k = 1;; ++k) {
      const std::string name = "x" + std::to_string(k);
      if (std::find(header.begin(), header.end(), name) == header.end()) break;
      cov_names.push_back(name);
    }
  }
  std::vector<std::size_t> cov_cols;
  cov_cols.reserve(cov_names.size());
  for (const auto& name : cov_names) cov_cols.push_back(column_of(name));

  std::vector<Observation> rows;
  std::string line;
  std::size_t row_number = 1;  // header was row 1
  while (std::getline(source, line)) {
    ++row_number;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      raise(ErrorKind::ParseError, "row " + std::to_string(row_number) + ": expected " +
                                       std::to_string(header.size()) + " fields, got " +
                                       std::to_string(fields.size()));
    }
    Observation ob;
    ob.unit = fields[unit_col];
    ob.time = parse_integer(fields[time_col], row_number, schema.time_column);
    ob.treat = parse_flag(fields[treat_col], row_number, schema.treat_column);
    ob.group = parse_flag(fields[group_col], row_number, schema.group_column);
    ob.outcome = parse_double(fields[outcome_col], row_number, schema.outcome_column);
    ob.covariates.reserve(cov_cols.size());
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
      ob.covariates.push_back(parse_double(fields[cov_cols[k]], row_number, cov_names[k]));
    }
    rows.push_back(std::move(ob));
  }
  return Panel(std::move(rows), post_start);
}

Panel load_panel_file(const std::string& path, const Schema& schema, long long post_start) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::MissingInput, "cannot open '" + path + "'");
  return load_panel(in, schema, post_start);
}

std::pair<Panel, BalanceReport> validate_balanced(const Panel& panel, BalancePolicy policy) {
  BalanceReport report;

  std::vector<std::vector<bool>> seen(panel.n_units(),
                                      std::vector<bool>(panel.n_periods(), false));
  for (const auto& ob : panel.observations()) {
    seen[panel.unit_index(ob.unit)][panel.time_index(ob.time)] = true;
  }
  std::vector<bool> unit_complete(panel.n_units(), true);
  for (std::size_t u = 0; u < panel.n_units(); ++u) {
    for (std::size_t t = 0; t < panel.n_periods(); ++t) {
      if (!seen[u][t]) {
        report.missing_pairs.emplace_back(panel.units()[u].id, panel.times()[t]);
        unit_complete[u] = false;
      }
    }
  }
  report.is_balanced = report.missing_pairs.empty();

  if (report.is_balanced) return {panel, report};

  if (policy == BalancePolicy::Reject) {
    raise(ErrorKind::UnbalancedPanel, std::to_string(report.missing_pairs.size()) +
                                          " missing (unit, time) pairs");
  }

  std::vector<Observation> kept;
  for (const auto& ob : panel.observations()) {
    if (unit_complete[panel.unit_index(ob.unit)]) kept.push_back(ob);
  }
  for (std::size_t u = 0; u < panel.n_units(); ++u) {
    if (!unit_complete[u]) report.dropped_units.push_back(panel.units()[u].id);
  }
  if (kept.empty()) {
    raise(ErrorKind::EmptyAfterDrop, "no unit has a complete trajectory");
  }
  return {Panel(std::move(kept), panel.post_start()), report};
}

double cell_mean(const Panel& panel, const CellKey& key) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& ob : panel.observations()) {
    if (ob.treat == key.treat && ob.group == key.group && ob.time == key.time) {
      total += ob.outcome;
      ++count;
    }
  }
  if (count == 0) {
    raise(ErrorKind::EmptyCell, "cell (treat=" + std::to_string(key.treat) +
                                    ", group=" + std::to_string(key.group) +
                                    ", t=" + std::to_string(key.time) + ") is empty");
  }
  return total / static_cast<double>(count);
}

void write_panel_csv(const Panel& panel, std::ostream& out) {
  out << "unit,time,treat,group,outcome";
  for (std::size_t k = 1; k <= panel.n_covariates(); ++k) out << ",x" << k;
  out << "\n";
  out << std::setprecision(17);
  for (const auto& ob : panel.observations()) {
    out << ob.unit << ',' << ob.time << ',' << ob.treat << ',' << ob.group << ','
        << ob.outcome;
    for (double x : ob.covariates) out << ',' << x;
    out << "\n";
  }
}

Panel filter_positive_outcome(const Panel& panel) {
  std::vector<Observation> kept;
  for (const auto& ob : panel.observations()) {
    if (ob.outcome > 0.0) kept.push_back(ob);
  }
  if (kept.empty()) raise(ErrorKind::EmptyAfterDrop, "no observation has a positive outcome");
  return Panel(std::move(kept), panel.post_start());
}

Panel with_outcome(const Panel& panel,
                   const std::map<std::pair<std::string, long long>, double>& values,
                   bool keep_covariates) {
  std::vector<Observation> kept;
  for (const auto& ob : panel.observations()) {
    auto it = values.find({ob.unit, ob.time});
    if (it == values.end()) continue;
    Observation copy = ob;
    copy.outcome = it->second;
    if (!keep_covariates) copy.covariates.clear();
    kept.push_back(std::move(copy));
  }
  if (kept.empty()) raise(ErrorKind::EmptyCell, "outcome substitution matched no observation");
  return Panel(std::move(kept), panel.post_start());
}

}  // namespace tripled
