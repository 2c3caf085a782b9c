#include <doctest.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "encdns/errors.hpp"
#include "encdns/flow.hpp"
#include "encdns/trend_stats.hpp"
#include "series_gen.hpp"

using namespace encdns;
using namespace encdns::stats;
using nlohmann::json;
using testdata::generate;

namespace {

const json& fixtures() {
  static const json doc = [] {
    std::ifstream in(ENCDNS_TEST_DATA "/adf_fixtures.json");
    REQUIRE(in.good());
    return json::parse(in);
  }();
  return doc;
}

flow::DailyCounts day(int offset, std::uint64_t doh, std::uint64_t total) {
  flow::DailyCounts d;
  d.date = flow::parse_date("2023-01-01") + std::chrono::days{offset};
  d.doh = doh;
  d.total = total;
  d.port443 = doh;
  return d;
}

}  // namespace

TEST_CASE("fixture series regenerate from the documented generator") {
  for (const auto& s : fixtures()["series"]) {
    auto values = generate(s["kind"], s["seed"], s["n"], s["params"]);
    auto frozen = s["values"].get<std::vector<double>>();
    REQUIRE(values.size() == frozen.size());
    for (std::size_t i = 0; i < values.size(); ++i) REQUIRE(values[i] == doctest::Approx(frozen[i]).epsilon(1e-13));
  }
}

TEST_CASE("ADF matches the reference implementation on every fixture") {
  for (const auto& s : fixtures()["series"]) {
    INFO(s["name"].get<std::string>());
    auto values = s["values"].get<std::vector<double>>();
    auto r = adf_test(values);
    CHECK(r.used_lag == s["used_lag"].get<std::size_t>());
    CHECK(r.n_obs == s["n_obs"].get<std::size_t>());
    CHECK(std::abs(r.statistic - s["statistic"].get<double>()) <= 1e-6);
    CHECK(std::abs(r.p_value - s["p_value"].get<double>()) <= 1e-3);
    CHECK(r.aic == doctest::Approx(s["aic"].get<double>()).epsilon(1e-9));
    CHECK(r.max_lag == default_max_lag(values.size()));

    const auto& capped = s["max_lag2"];
    auto c = adf_test(values, 2);
    CHECK(c.max_lag == 2);
    CHECK(c.used_lag == capped["used_lag"].get<std::size_t>());
    CHECK(c.n_obs == capped["n_obs"].get<std::size_t>());
    CHECK(std::abs(c.statistic - capped["statistic"].get<double>()) <= 1e-6);
    CHECK(std::abs(c.p_value - capped["p_value"].get<double>()) <= 1e-3);
  }
}

TEST_CASE("seed-42 white noise is stationary, the random walk is not") {
  const auto& series = fixtures()["series"];
  auto find = [&](const char* name) {
    for (const auto& s : series)
      if (s["name"] == name) return s["values"].get<std::vector<double>>();
    FAIL("missing fixture " << name);
    return std::vector<double>{};
  };
  auto white = adf_test(find("white_noise"));
  CHECK(white.verdict == Verdict::Stationary);
  CHECK(find("white_noise").size() == 100);
  CHECK(adf_test(find("random_walk")).verdict == Verdict::NonStationary);
  CHECK(adf_test(find("walk_drift")).verdict == Verdict::NonStationary);
  CHECK(adf_test(find("ar2_year")).verdict == Verdict::Stationary);
}

TEST_CASE("MacKinnon p-values follow the reference table") {
  for (const auto& pt : fixtures()["mackinnon"]) {
    double tau = pt["tau"], p = pt["p"];
    INFO("tau " << tau);
    if (p == 0.0 || p == 1.0)
      CHECK(mackinnon_p(tau) == p);
    else
      CHECK(mackinnon_p(tau) == doctest::Approx(p).epsilon(1e-9));
  }
  double prev = 0;
  for (double t = -25; t <= 4; t += 0.01) {
    double p = mackinnon_p(t);
    CHECK(p >= prev - 1e-12);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    prev = p;
  }
}

TEST_CASE("published statistics lead to the published verdicts") {
  CHECK(classify_stationarity(mackinnon_p(-8.7)) == Verdict::Stationary);
  CHECK(classify_stationarity(mackinnon_p(-2.7)) == Verdict::NonStationary);
  CHECK(classify_stationarity(2.66e-14, 0.05) == Verdict::Stationary);
  CHECK(classify_stationarity(0.0595, 0.05) == Verdict::NonStationary);
  CHECK(classify_stationarity(0.05, 0.05) == Verdict::NonStationary);
  CHECK(to_string(Verdict::Stationary) == "Stationary");
  CHECK(to_string(Verdict::NonStationary) == "Non-Stationary");
}

TEST_CASE("ADF lag bound and input errors") {
  CHECK(default_max_lag(12) == 4);
  CHECK(default_max_lag(20) == 8);
  CHECK(default_max_lag(25) == 9);
  CHECK(default_max_lag(60) == 11);
  CHECK(default_max_lag(100) == 12);
  CHECK(default_max_lag(101) == 13);
  CHECK(default_max_lag(365) == 17);
  CHECK(default_max_lag(1000) == 22);

  CHECK_THROWS_AS(adf_test(std::vector<double>(50, 3.0)), DegenerateInputError);
  CHECK_THROWS_AS(adf_test({1, 2}), ValidationError);
  CHECK_THROWS_AS(adf_test({1, 5, 2, 8, 3}), ValidationError);
  auto values = fixtures()["series"][0]["values"].get<std::vector<double>>();
  CHECK_THROWS_AS(adf_test(values, 49), ValidationError);
  values[3] = std::nan("");
  CHECK_THROWS_AS(adf_test(values), ValidationError);
}

TEST_CASE("mean and sample standard deviation") {
  auto ms = mean_std({2, 4, 6});
  CHECK(ms.mean == doctest::Approx(4.0));
  CHECK(ms.std == doctest::Approx(2.0));
  CHECK(mean_std({7, 7, 7, 7}).std == 0.0);
  CHECK_THROWS_AS(mean_std({1}), DegenerateInputError);
  CHECK_THROWS_AS(mean({}), DegenerateInputError);

  const auto& d = fixtures()["descriptive"];
  auto values = generate("white", d["seed"], d["n"], d["params"]);
  auto big = mean_std(values);
  CHECK(std::abs(big.mean - d["mean"].get<double>()) <= 1e-9);
  CHECK(std::abs(big.std - d["std"].get<double>()) <= 1e-9);
}

TEST_CASE("least-squares trend") {
  auto fit = ols_fit(TimeSeries::from_values({1, 2, 3, 4}));
  CHECK(fit.slope == doctest::Approx(1.0));
  CHECK(fit.intercept == doctest::Approx(1.0));
  CHECK(fit.residual_std_error == doctest::Approx(0.0));
  auto flat = ols_fit(TimeSeries::from_values({5, 5, 5}));
  CHECK(flat.slope == 0.0);
  CHECK(flat.intercept == doctest::Approx(5.0));
  CHECK_THROWS_AS(ols_fit(TimeSeries::from_values({5})), DegenerateInputError);

  const auto& o = fixtures()["ols"];
  auto noise = generate("white", o["seed"], o["n"], json{{"mean", 0.0}, {"sigma", 2.0}});
  std::vector<double> values;
  for (std::size_t i = 0; i < noise.size(); ++i) values.push_back(3.0 + 0.25 * static_cast<double>(i) + noise[i]);
  CHECK(values == o["values"].get<std::vector<double>>());
  auto noisy = ols_fit(TimeSeries::from_values(values));
  CHECK(std::abs(noisy.slope - o["slope"].get<double>()) <= 1e-9);
  CHECK(std::abs(noisy.intercept - o["intercept"].get<double>()) <= 1e-9);
  CHECK(std::abs(noisy.residual_std_error - o["residual_std_error"].get<double>()) <= 1e-9);

  // x is measured in days, so a missing day changes the slope
  TimeSeries gapped;
  gapped.dates = {flow::parse_date("2023-01-01"), flow::parse_date("2023-01-02"), flow::parse_date("2023-01-05")};
  gapped.values = {0, 1, 4};
  CHECK(ols_fit(gapped).slope == doctest::Approx(1.0));
}

TEST_CASE("series extraction and gap policy") {
  std::vector<flow::DailyCounts> days{day(0, 10, 1'000'000), day(1, 0, 0), day(2, 30, 2'000'000)};
  auto doh = extract_series(days, "doh");
  CHECK(doh.values == std::vector<double>{10, 30});
  CHECK(extract_series(days, "doh", GapPolicy::Keep).values == std::vector<double>{10, 0, 30});
  auto ratio = extract_series(days, "doh_per_million", GapPolicy::Keep);
  CHECK(ratio.values == std::vector<double>{10.0, 15.0});
  CHECK(extract_series(days, "total").size() == 2);
  CHECK_THROWS_AS(extract_series(days, "bogus"), ValidationError);
  CHECK_THROWS_AS(extract_series({day(0, 0, 0)}, "doh"), DegenerateInputError);
  CHECK(std::find(series_columns().begin(), series_columns().end(), "unique_src_ips") != series_columns().end());

  TimeSeries bad;
  bad.dates = {flow::parse_date("2023-01-02"), flow::parse_date("2023-01-01")};
  bad.values = {1, 2};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("MAD trimming") {
  auto ts = TimeSeries::from_values({10, 11, 9, 10, 12, 10, 500, 11, 9});
  auto trimmed = trim_mad(ts);
  CHECK(trimmed.size() == 8);
  CHECK(std::find(trimmed.values.begin(), trimmed.values.end(), 500.0) == trimmed.values.end());
  CHECK(trimmed.dates[6] == ts.dates[7]);
  auto constant = TimeSeries::from_values({4, 4, 4, 4, 90});
  CHECK(trim_mad(constant).size() == 5);
  CHECK_THROWS_AS(trim_mad(ts, 0), ValidationError);
}

TEST_CASE("metric reports") {
  std::vector<flow::DailyCounts> days;
  auto values = fixtures()["series"][0]["values"].get<std::vector<double>>();
  for (std::size_t i = 0; i < values.size(); ++i)
    days.push_back(day(static_cast<int>(i), static_cast<std::uint64_t>(std::llround(values[i])), 1'000'000));
  days.push_back(day(static_cast<int>(values.size()), 0, 0));

  auto rep = analyze_metric(days, "doh");
  CHECK(rep.n == values.size());
  REQUIRE(rep.adf);
  REQUIRE(rep.trend);
  CHECK(rep.error.empty());
  CHECK(rep.adf->verdict == Verdict::Stationary);

  auto constant = analyze_metric(days, "dns");
  CHECK_FALSE(constant.adf);
  CHECK_FALSE(constant.error.empty());
  CHECK(constant.std == 0.0);

  auto j = json::parse(stats_report_json({rep, constant}));
  REQUIRE(j.size() == 2);
  CHECK(j[0]["value"] == "doh");
  CHECK(j[0]["conclusion"] == "Stationary");
  CHECK(j[0]["n"] == values.size());
  CHECK(j[0]["adf_stat"].get<double>() == doctest::Approx(rep.adf->statistic));
  CHECK(j[1]["adf_stat"].is_null());
  CHECK(j[1].contains("error"));
}

TEST_CASE("rejection rates over 100 seeds of length 200") {
  int walk_kept = 0, noise_rejected = 0;
  for (std::uint32_t seed = 1; seed <= 100; ++seed) {
    auto walk = generate("walk", seed, 200, json{{"start", 0.0}, {"drift", 0.0}, {"sigma", 1.0}});
    auto noise = generate("white", seed + 1000, 200, json{{"mean", 0.0}, {"sigma", 1.0}});
    if (adf_test(walk).verdict == Verdict::NonStationary) ++walk_kept;
    if (adf_test(noise).verdict == Verdict::Stationary) ++noise_rejected;
  }
  MESSAGE("random walk not rejected: " << walk_kept << "/100, white noise rejected: " << noise_rejected << "/100");
  CHECK(walk_kept >= 90);
  CHECK(noise_rejected >= 90);
}
