#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "oracles.hpp"
#include "tripled/estimators.hpp"
#include "tripled/simgen.hpp"
#include "tripled/transform.hpp"

using namespace tripled;

namespace {

Panel tiny_did_panel() {
  // treated a, controls b/c; t=1 pre, t=2 post
  std::vector<Observation> rows = {
      {"a", 1, 1, 0, 5.0, {}}, {"a", 2, 1, 0, 9.0, {}},
      {"b", 1, 0, 0, 1.0, {}}, {"b", 2, 0, 0, 2.0, {}},
      {"c", 1, 0, 0, 3.0, {}}, {"c", 2, 0, 0, 6.0, {}},
  };
  return Panel(std::move(rows), 2);
}

Panel generated(std::uint64_t seed, int k_covariates = 0, double noise = 1.5) {
  DgpConfig config;
  config.n_units_per_cell = 8;
  config.periods = {1, 2, 3, 4, 5};
  config.post_start = 4;
  config.true_delta = 3.0;
  config.true_gamma1 = 1.0;
  config.true_gamma2 = 0.5;
  config.growth = {0.05, 0.1, 0.15, 0.2};
  config.noise_sd = noise;
  config.k_covariates = k_covariates;
  config.seed = seed;
  return generate(config);
}

}  // namespace

TEST_CASE("demean_did subtracts the per-period control mean") {
  const Panel panel = tiny_did_panel();
  const TransformedSeries series = demean_did(panel);
  CHECK(series.kind == TransformKind::Z);
  // control means: t1 -> 2, t2 -> 4
  CHECK(series.values.at({"a", 1}) == doctest::Approx(3.0));
  CHECK(series.values.at({"a", 2}) == doctest::Approx(5.0));
  // complement carries the controls, same subtraction
  CHECK(series.complement_values.at({"b", 1}) == doctest::Approx(-1.0));
  CHECK(series.complement_values.at({"c", 2}) == doctest::Approx(2.0));
  CHECK(series.baseline_provenance.count({0, 1}) == 1);
}

TEST_CASE("demean_did wipes a common time trend") {
  std::vector<Observation> rows;
  const double trend[3] = {4.0, -1.0, 7.5};
  for (int u = 0; u < 4; ++u) {
    for (long long t = 0; t < 3; ++t) {
      rows.push_back({"u" + std::to_string(u), t, u < 2 ? 1 : 0, 0, trend[t], {}});
    }
  }
  const Panel panel(std::move(rows), 2);
  const TransformedSeries series = demean_did(panel);
  for (const auto& [key, z] : series.values) CHECK(z == doctest::Approx(0.0));
}

TEST_CASE("demean_did: per-period control mean of Z vanishes") {
  const Panel panel = generated(11);
  const TransformedSeries series = demean_did(panel);
  std::map<long long, std::pair<double, std::size_t>> acc;
  for (const auto& [key, z] : series.complement_values) {
    acc[key.second].first += z;
    acc[key.second].second += 1;
  }
  CHECK(acc.size() == panel.n_periods());
  for (const auto& [t, sum_count] : acc) {
    CHECK(std::abs(sum_count.first / sum_count.second) < 1e-12);
  }
}

TEST_CASE("demean_did needs controls in every period") {
  std::vector<Observation> rows = {
      {"a", 1, 1, 0, 1.0, {}}, {"a", 2, 1, 0, 2.0, {}},
      {"b", 1, 1, 0, 3.0, {}}, {"b", 2, 1, 0, 4.0, {}},
  };
  const Panel panel(std::move(rows), 2);
  CHECK_THROWS_AS(demean_did(panel), Error);
}

TEST_CASE("demean_ddd subtracts the matching non-target cell mean") {
  // G=1 unit in treat arm 1 with Y=10 where the (G=0, treat=1, t) mean is 4
  std::vector<Observation> rows = {
      {"g1", 1, 1, 1, 10.0, {}}, {"g1", 2, 1, 1, 12.0, {}},
      {"n1", 1, 1, 0, 4.0, {}},  {"n1", 2, 1, 0, 5.0, {}},
      {"g0", 1, 0, 1, 7.0, {}},  {"g0", 2, 0, 1, 8.0, {}},
      {"n0", 1, 0, 0, 1.0, {}},  {"n0", 2, 0, 0, 2.0, {}},
  };
  const Panel panel(std::move(rows), 2);
  const TransformedSeries series = demean_ddd(panel);
  CHECK(series.kind == TransformKind::W);
  CHECK(series.values.at({"g1", 1}) == doctest::Approx(6.0));
  CHECK(series.values.at({"g1", 2}) == doctest::Approx(7.0));
  CHECK(series.values.at({"g0", 1}) == doctest::Approx(6.0));
  // complement = G=0 rows minus their own cell mean (single obs per cell -> 0)
  CHECK(series.complement_values.at({"n1", 1}) == doctest::Approx(0.0));
}

TEST_CASE("demean_ddd is zero when G groups coincide within every (j, t) cell") {
  std::vector<Observation> rows;
  Rng rng(44);
  for (long long t = 1; t <= 3; ++t) {
    const double level[2] = {rng.normal(0.0, 5.0), rng.normal(0.0, 5.0)};
    for (int treat = 0; treat < 2; ++treat) {
      for (int g = 0; g < 2; ++g) {
        for (int u = 0; u < 3; ++u) {
          rows.push_back({"t" + std::to_string(treat) + "g" + std::to_string(g) +
                              "u" + std::to_string(u),
                          t, treat, g, level[treat], {}});
        }
      }
    }
  }
  const Panel panel(std::move(rows), 3);
  const TransformedSeries series = demean_ddd(panel);
  for (const auto& [key, w] : series.values) CHECK(w == doctest::Approx(0.0));
}

TEST_CASE("demean_ddd matches the two-pass oracle on a generated panel") {
  const Panel panel = generated(5);
  const TransformedSeries series = demean_ddd(panel);

  // first pass: collect cell means by row scan; second pass: subtract
  std::map<std::pair<int, long long>, double> oracle_mean;
  for (const auto& ob : panel.observations()) {
    if (ob.group == 0) oracle_mean[{ob.treat, ob.time}] = 0.0;
  }
  for (auto& [key, mean] : oracle_mean) {
    mean = oracles::row_scan_cell_mean(panel, key.first, 0, key.second);
  }
  std::size_t checked = 0;
  for (const auto& ob : panel.observations()) {
    if (ob.group != 1) continue;
    const double expected = ob.outcome - oracle_mean.at({ob.treat, ob.time});
    CHECK(series.values.at({ob.unit, ob.time}) ==
          doctest::Approx(expected).epsilon(1e-14));
    ++checked;
  }
  CHECK(checked == series.values.size());
}

TEST_CASE("demean_ddd reports the empty cell") {
  std::vector<Observation> rows = {
      {"g1", 1, 1, 1, 10.0, {}}, {"g1", 2, 1, 1, 12.0, {}},
      {"g0", 1, 0, 1, 7.0, {}},  {"g0", 2, 0, 1, 8.0, {}},
      {"n0", 1, 0, 0, 1.0, {}},  {"n0", 2, 0, 0, 2.0, {}},
  };
  const Panel panel(std::move(rows), 2);
  try {
    demean_ddd(panel);
    FAIL("missing (G=0, treat=1) cells should throw");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::EmptyCell);
    CHECK(std::string(err.what()).find("treat=1") != std::string::npos);
  }
}

TEST_CASE("fit_cell_regressions recovers an exact linear relation") {
  std::vector<Observation> rows;
  for (int treat = 0; treat < 2; ++treat) {
    for (long long t = 1; t <= 2; ++t) {
      for (int u = 0; u < 4; ++u) {
        const double x = static_cast<double>(u);
        rows.push_back({"t" + std::to_string(treat) + "u" + std::to_string(u), t,
                        treat, 0, 1.0 + 2.0 * x, {x}});
      }
      rows.push_back({"t" + std::to_string(treat) + "g", t, treat, 1, 0.0, {1.0}});
    }
  }
  const Panel panel(std::move(rows), 2);
  const CellRegressionSet regs = fit_cell_regressions(panel);
  CHECK(regs.coefficients.size() == 4);
  for (const auto& [key, beta] : regs.coefficients) {
    REQUIRE(beta.size() == 2);
    CHECK(beta(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(beta(1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(regs.n_obs.at(key) == 4);
    CHECK(regs.condition_diag.at(key) >= 1.0);  // ratio of extreme R pivots
  }
}

TEST_CASE("fit_cell_regressions rejects a constant covariate") {
  std::vector<Observation> rows;
  for (int treat = 0; treat < 2; ++treat) {
    for (long long t = 1; t <= 2; ++t) {
      for (int u = 0; u < 4; ++u) {
        rows.push_back({"t" + std::to_string(treat) + "u" + std::to_string(u), t,
                        treat, 0, static_cast<double>(u), {3.0}});
      }
      rows.push_back({"t" + std::to_string(treat) + "g", t, treat, 1, 0.0, {1.0}});
    }
  }
  const Panel panel(std::move(rows), 2);
  try {
    fit_cell_regressions(panel);
    FAIL("constant covariate is collinear with the intercept");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::RankDeficient);
  }
}

TEST_CASE("fit_cell_regressions flags a cell below K+2 observations") {
  std::vector<Observation> rows;
  for (int treat = 0; treat < 2; ++treat) {
    for (long long t = 1; t <= 2; ++t) {
      const int n = treat == 1 ? 2 : 4;  // K=1 needs 3
      for (int u = 0; u < n; ++u) {
        const double x = static_cast<double>(u);
        rows.push_back({"t" + std::to_string(treat) + "u" + std::to_string(u), t,
                        treat, 0, x, {x}});
      }
      rows.push_back({"t" + std::to_string(treat) + "g", t, treat, 1, 0.0, {1.0}});
    }
  }
  const Panel panel(std::move(rows), 2);
  try {
    fit_cell_regressions(panel);
    FAIL("2-observation cell cannot support K+2 = 3");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::InsufficientCell);
  }
}

TEST_CASE("fit_cell_regressions: noisy slope lands near truth and on the oracle") {
  // one (treat=1, t=1) cell of 50 rows, Y = 3 + 0.5 x + noise(0.1)
  Rng rng(2);
  std::vector<Observation> rows;
  for (int u = 0; u < 50; ++u) {
    const double x = rng.uniform(-2.0, 2.0);
    const double y = 3.0 + 0.5 * x + rng.normal(0.0, 0.1);
    rows.push_back({"u" + std::to_string(u), 1, 1, 0, y, {x}});
    rows.push_back({"u" + std::to_string(u), 2, 1, 0, y + 1.0, {x}});
  }
  rows.push_back({"target", 1, 1, 1, 0.0, {0.0}});
  rows.push_back({"target", 2, 1, 1, 0.0, {0.0}});
  const Panel panel(std::move(rows), 2);
  const CellRegressionSet regs = fit_cell_regressions(panel);
  const Eigen::VectorXd beta = regs.coefficients.at({1, 1});
  CHECK(std::abs(beta(0) - 3.0) < 0.15);
  CHECK(std::abs(beta(1) - 0.5) < 0.15);

  Eigen::MatrixXd X(50, 2);
  Eigen::VectorXd y(50);
  Eigen::Index r = 0;
  for (const auto& ob : panel.observations()) {
    if (ob.group == 0 && ob.time == 1) {
      X(r, 0) = 1.0;
      X(r, 1) = ob.covariates[0];
      y(r) = ob.outcome;
      ++r;
    }
  }
  const Eigen::VectorXd oracle = oracles::normal_equations_ols(X, y);
  CHECK(beta(0) == doctest::Approx(oracle(0)).epsilon(1e-8));
  CHECK(beta(1) == doctest::Approx(oracle(1)).epsilon(1e-8));
}

TEST_CASE("demean_ddd_cov subtracts the fitted prediction") {
  // exact relation in the non-target cells: Y = 1 + 2 x
  std::vector<Observation> rows;
  for (int treat = 0; treat < 2; ++treat) {
    for (long long t = 1; t <= 2; ++t) {
      for (int u = 0; u < 4; ++u) {
        const double x = static_cast<double>(u);
        rows.push_back({"t" + std::to_string(treat) + "u" + std::to_string(u), t,
                        treat, 0, 1.0 + 2.0 * x, {x}});
      }
    }
  }
  // a target unit with Y=10 and x=3: prediction 7, so W = 3
  rows.push_back({"g", 1, 1, 1, 10.0, {3.0}});
  rows.push_back({"g", 2, 1, 1, 7.0, {3.0}});
  const Panel panel(std::move(rows), 2);
  const TransformedSeries series = demean_ddd_cov(panel, fit_cell_regressions(panel));
  CHECK(series.kind == TransformKind::WCov);
  CHECK(series.values.at({"g", 1}) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(series.values.at({"g", 2}) == doctest::Approx(0.0));
}

TEST_CASE("demean_ddd_cov is zero when targets follow the non-target model") {
  Rng rng(91);
  std::vector<Observation> rows;
  std::map<std::pair<int, long long>, std::pair<double, double>> cell_model;
  for (int treat = 0; treat < 2; ++treat) {
    for (long long t = 1; t <= 3; ++t) {
      cell_model[{treat, t}] = {rng.normal(0.0, 1.0), rng.normal(1.0, 0.5)};
    }
  }
  for (int treat = 0; treat < 2; ++treat) {
    for (int u = 0; u < 5; ++u) {
      for (long long t = 1; t <= 3; ++t) {
        const auto [a, b] = cell_model[{treat, t}];
        const double x = rng.uniform(-1.0, 1.0);
        rows.push_back({"n" + std::to_string(treat) + std::to_string(u), t, treat, 0,
                        a + b * x, {x}});
      }
    }
    for (int u = 0; u < 3; ++u) {
      for (long long t = 1; t <= 3; ++t) {
        const auto [a, b] = cell_model[{treat, t}];
        const double x = rng.uniform(-1.0, 1.0);
        rows.push_back({"g" + std::to_string(treat) + std::to_string(u), t, treat, 1,
                        a + b * x, {x}});
      }
    }
  }
  const Panel panel(std::move(rows), 3);
  const TransformedSeries series = demean_ddd_cov(panel, fit_cell_regressions(panel));
  CHECK(series.values.size() == 2 * 3 * 3);
  for (const auto& [key, w] : series.values) {
    CHECK(w == doctest::Approx(0.0).epsilon(1e-10));
  }
}

TEST_CASE("demean_ddd_cov matches the predict-then-subtract oracle") {
  const Panel panel = generated(9, 2);
  const CellRegressionSet regs = fit_cell_regressions(panel);
  const TransformedSeries series = demean_ddd_cov(panel, regs);
  for (const auto& ob : panel.observations()) {
    if (ob.group != 1) continue;
    const Eigen::VectorXd& beta = regs.coefficients.at({ob.treat, ob.time});
    double prediction = beta(0);
    for (std::size_t k = 0; k < ob.covariates.size(); ++k) {
      prediction += beta(k + 1) * ob.covariates[k];
    }
    CHECK(series.values.at({ob.unit, ob.time}) ==
          doctest::Approx(ob.outcome - prediction).epsilon(1e-10));
  }
}

TEST_CASE("demean_ddd_cov refuses a target cell without a fit") {
  std::vector<Observation> rows;
  for (long long t = 1; t <= 2; ++t) {
    for (int u = 0; u < 4; ++u) {
      const double x = static_cast<double>(u);
      rows.push_back({"n" + std::to_string(u), t, 0, 0, 1.0 + x, {x}});
    }
    rows.push_back({"g", t, 1, 1, 5.0, {1.0}});  // treat arm 1 has no G=0 rows
  }
  const Panel panel(std::move(rows), 2);
  CHECK_THROWS_AS(demean_ddd_cov(panel, fit_cell_regressions(panel)), Error);
}

TEST_CASE("W-identity: complement means vanish per (j, t) cell") {
  const Panel panel = generated(6);
  const TransformedSeries series = demean_ddd(panel);
  std::map<std::pair<int, long long>, std::pair<double, std::size_t>> acc;
  for (const auto& [key, w] : series.complement_values) {
    const auto& info = panel.units()[panel.unit_index(key.first)];
    auto& slot = acc[{info.treat, key.second}];
    slot.first += w;
    slot.second += 1;
  }
  for (const auto& [cell, sum_count] : acc) {
    CHECK(std::abs(sum_count.first / sum_count.second) < 1e-12);
  }

  // same identity for the covariate version: OLS residuals sum to zero
  const Panel panel_cov = generated(6, 2);
  const TransformedSeries cov =
      demean_ddd_cov(panel_cov, fit_cell_regressions(panel_cov));
  acc.clear();
  for (const auto& [key, w] : cov.complement_values) {
    const auto& info = panel_cov.units()[panel_cov.unit_index(key.first)];
    auto& slot = acc[{info.treat, key.second}];
    slot.first += w;
    slot.second += 1;
  }
  for (const auto& [cell, sum_count] : acc) {
    CHECK(std::abs(sum_count.first / sum_count.second) < 1e-10);
  }
}

TEST_CASE("location and scale equivariance of Z and W") {
  const Panel base = generated(13);
  const double shift = 11.5, factor = -2.5;
  std::vector<Observation> shifted_rows, scaled_rows;
  for (const auto& ob : base.observations()) {
    Observation s = ob;
    s.outcome += shift;
    shifted_rows.push_back(s);
    Observation m = ob;
    m.outcome *= factor;
    scaled_rows.push_back(m);
  }
  const Panel shifted(std::move(shifted_rows), base.post_start());
  const Panel scaled(std::move(scaled_rows), base.post_start());

  const TransformedSeries z0 = demean_did(base);
  const TransformedSeries z1 = demean_did(shifted);
  const TransformedSeries z2 = demean_did(scaled);
  for (const auto& [key, value] : z0.values) {
    CHECK(z1.values.at(key) == doctest::Approx(value).epsilon(1e-10));
    CHECK(z2.values.at(key) == doctest::Approx(factor * value).epsilon(1e-10));
  }
  const TransformedSeries w0 = demean_ddd(base);
  const TransformedSeries w1 = demean_ddd(shifted);
  const TransformedSeries w2 = demean_ddd(scaled);
  for (const auto& [key, value] : w0.values) {
    CHECK(w1.values.at(key) == doctest::Approx(value).epsilon(1e-10));
    CHECK(w2.values.at(key) == doctest::Approx(factor * value).epsilon(1e-10));
  }

  // W_cov scale equivariance holds when the cell fits are re-estimated on
  // the scaled data
  const Panel base_cov = generated(13, 1);
  std::vector<Observation> scaled_cov_rows;
  for (const auto& ob : base_cov.observations()) {
    Observation m = ob;
    m.outcome *= factor;
    scaled_cov_rows.push_back(m);
  }
  const Panel scaled_cov(std::move(scaled_cov_rows), base_cov.post_start());
  const TransformedSeries wc0 = demean_ddd_cov(base_cov, fit_cell_regressions(base_cov));
  const TransformedSeries wc2 =
      demean_ddd_cov(scaled_cov, fit_cell_regressions(scaled_cov));
  for (const auto& [key, value] : wc0.values) {
    CHECK(wc2.values.at(key) == doctest::Approx(factor * value).epsilon(1e-10));
  }
}

TEST_CASE("zero-covariate pathway: intercept-only cell fit is the cell mean") {
  const Panel panel = generated(21);
  for (int treat = 0; treat < 2; ++treat) {
    for (long long t : panel.times()) {
      std::vector<double> ys;
      for (const auto& ob : panel.observations()) {
        if (ob.group == 0 && ob.treat == treat && ob.time == t) ys.push_back(ob.outcome);
      }
      Eigen::MatrixXd X = Eigen::MatrixXd::Ones(ys.size(), 1);
      Eigen::VectorXd y(ys.size());
      for (std::size_t i = 0; i < ys.size(); ++i) y(i) = ys[i];
      const OlsResult fit = ols_solve(X, y);
      CHECK(fit.coefficients(0) ==
            doctest::Approx(cell_mean(panel, {treat, 0, t})).epsilon(1e-12));
    }
  }
}

TEST_CASE("write_series_csv emits unit,time,value rows") {
  const Panel panel = tiny_did_panel();
  const TransformedSeries series = demean_did(panel);
  std::ostringstream out;
  write_series_csv(series, out);
  CHECK(out.str().rfind("unit,time,value\n", 0) == 0);
  CHECK(out.str().find("a,1,3\n") != std::string::npos);
}
