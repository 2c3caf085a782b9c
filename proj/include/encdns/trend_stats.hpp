#pragma once

// Descriptive statistics, linear trend, and the augmented Dickey-Fuller test
// (constant-only regression, AIC lag selection, MacKinnon p-values).

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "encdns/flow.hpp"

namespace encdns::stats {

enum class GapPolicy : std::uint8_t {
  /// Days with no capture (total == 0 in the daily file) are removed.
  Drop,
  /// Every row is used as-is.
  Keep,
};

struct TimeSeries {
  std::vector<std::chrono::sys_days> dates;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  /// Dates strictly increasing, sizes equal, length >= 1; throws ValidationError.
  void validate() const;
  /// Consecutive days starting at 1970-01-01.
  static TimeSeries from_values(std::vector<double> values);
};

/// Column names of the daily file plus "doh_per_million" (doh / total * 1e6).
const std::vector<std::string>& series_columns();

/// Throws ValidationError for an unknown column, DegenerateInputError when
/// nothing is left after applying the gap policy.
TimeSeries extract_series(const std::vector<flow::DailyCounts>& days, std::string_view column,
                          GapPolicy policy = GapPolicy::Drop);

struct MeanStd {
  double mean = 0;
  double std = 0;
};

/// Sample standard deviation (n - 1). Throws DegenerateInputError below 2 points.
MeanStd mean_std(const std::vector<double>& values);
double mean(const std::vector<double>& values);

struct TrendFit {
  double slope = 0;      ///< value units per day
  double intercept = 0;  ///< value at the first date
  double residual_std_error = 0;
};

/// x = days since the first date. Throws DegenerateInputError when fewer than
/// two distinct x positions exist.
TrendFit ols_fit(const TimeSeries& series);

enum class Verdict : std::uint8_t { Stationary, NonStationary };
std::string_view to_string(Verdict v);

struct AdfResult {
  double statistic = 0;
  double p_value = 1;
  std::size_t used_lag = 0;
  std::size_t n_obs = 0;
  std::size_t max_lag = 0;
  double aic = 0;
  Verdict verdict = Verdict::NonStationary;
};

inline constexpr double kDefaultAlpha = 0.05;
inline constexpr std::size_t kMinAdfObservations = 10;

/// Default upper bound for the lag search on n points.
std::size_t default_max_lag(std::size_t n);

/// Δy_t = α + γ·y_{t-1} + Σ β_i·Δy_{t-i} + ε_t with the lag picked by AIC over
/// 0..max_lag on a common sample, then refit. Throws DegenerateInputError for
/// constant input, ValidationError when too short or max_lag too large.
AdfResult adf_test(const std::vector<double>& values, std::optional<std::size_t> max_lag = std::nullopt,
                   double alpha = kDefaultAlpha);

/// Approximate p-value of an ADF statistic, constant-only case, one variable.
double mackinnon_p(double statistic);

Verdict classify_stationarity(double p_value, double alpha = kDefaultAlpha);

/// Drop values outside median ± k·MAD. Nothing is dropped when MAD is zero.
TimeSeries trim_mad(const TimeSeries& series, double k = 5.0);

struct MetricReport {
  std::string value;
  std::size_t n = 0;
  double mean = 0;
  double std = 0;
  std::optional<TrendFit> trend;
  std::optional<AdfResult> adf;
  /// Set when the ADF test could not be computed (e.g. constant series).
  std::string error;
};

struct StatsOptions {
  GapPolicy gaps = GapPolicy::Drop;
  std::optional<double> trim_k;
  double alpha = kDefaultAlpha;
  std::optional<std::size_t> max_lag;
};

MetricReport analyze_metric(const std::vector<flow::DailyCounts>& days, std::string_view column,
                            const StatsOptions& options = {});

/// JSON array of {value, n, mean, std, slope, intercept, adf_stat, p_value, used_lag, conclusion}.
std::string stats_report_json(const std::vector<MetricReport>& reports);

}  // namespace encdns::stats
