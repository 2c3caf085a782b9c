#include "encdns/trend_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "encdns/errors.hpp"

namespace encdns::stats {

using namespace std::chrono;

void TimeSeries::validate() const {
  if (values.empty()) throw ValidationError("time series is empty");
  if (dates.size() != values.size()) throw ValidationError("time series dates and values differ in length");
  for (std::size_t i = 1; i < dates.size(); ++i)
    if (dates[i] <= dates[i - 1]) throw ValidationError("time series dates must be strictly increasing");
}

TimeSeries TimeSeries::from_values(std::vector<double> values) {
  TimeSeries ts;
  ts.values = std::move(values);
  for (std::size_t i = 0; i < ts.values.size(); ++i) ts.dates.push_back(sys_days{days{static_cast<int>(i)}});
  return ts;
}

const std::vector<std::string>& series_columns() {
  static const std::vector<std::string> cols{"doh",     "dot",           "doq",   "dns",
                                             "total",   "tls_established", "port443", "unique_src_ips",
                                             "doh_per_million"};
  return cols;
}

TimeSeries extract_series(const std::vector<flow::DailyCounts>& rows, std::string_view column, GapPolicy policy) {
  const auto& cols = series_columns();
  if (std::find(cols.begin(), cols.end(), column) == cols.end())
    throw ValidationError("unknown column '" + std::string(column) + "'");
  TimeSeries ts;
  for (const auto& r : rows) {
    if (policy == GapPolicy::Drop && r.total == 0) continue;
    double v = 0;
    if (column == "doh") v = static_cast<double>(r.doh);
    else if (column == "dot") v = static_cast<double>(r.dot);
    else if (column == "doq") v = static_cast<double>(r.doq);
    else if (column == "dns") v = static_cast<double>(r.dns);
    else if (column == "total") v = static_cast<double>(r.total);
    else if (column == "tls_established") v = static_cast<double>(r.tls_established);
    else if (column == "port443") v = static_cast<double>(r.port443);
    else if (column == "unique_src_ips") v = static_cast<double>(r.unique_src_ips);
    else {
      if (r.total == 0) continue;  // ratio undefined on empty days under either policy
      v = flow::ratio_per_million(r.doh, r.total);
    }
    ts.dates.push_back(r.date);
    ts.values.push_back(v);
  }
  if (ts.values.empty()) throw DegenerateInputError("no data for column '" + std::string(column) + "'");
  return ts;
}

double mean(const std::vector<double>& values) {
  if (values.empty()) throw DegenerateInputError("mean of an empty series");
  double s = 0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.size() < 2) throw DegenerateInputError("standard deviation needs at least two values");
  MeanStd r;
  r.mean = mean(values);
  double ss = 0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return r;
}

TrendFit ols_fit(const TimeSeries& series) {
  series.validate();
  const std::size_t n = series.size();
  if (n < 2) throw DegenerateInputError("trend fit needs at least two points");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>((series.dates[i] - series.dates.front()).count());
  double mx = mean(x), my = mean(series.values);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (series.values[i] - my);
  }
  if (sxx == 0) throw DegenerateInputError("trend fit needs two distinct days");
  TrendFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double ssr = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = series.values[i] - (fit.intercept + fit.slope * x[i]);
      ssr += e * e;
    }
    fit.residual_std_error = std::sqrt(ssr / static_cast<double>(n - 2));
  }
  return fit;
}

std::string_view to_string(Verdict v) { return v == Verdict::Stationary ? "Stationary" : "Non-Stationary"; }

Verdict classify_stationarity(double p_value, double alpha) {
  return p_value < alpha ? Verdict::Stationary : Verdict::NonStationary;
}

// --- ADF ------------------------------------------------------------------

namespace {

struct OlsResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  double ssr = 0;
  std::size_t nobs = 0;
  std::size_t k = 0;

  double llf() const {
    const double n = static_cast<double>(nobs);
    return -n / 2.0 * (std::log(2.0 * std::numbers::pi) + std::log(ssr / n) + 1.0);
  }
  double aic() const { return -2.0 * llf() + 2.0 * static_cast<double>(k); }
};

OlsResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> piv(X);
  if (piv.rank() < X.cols()) throw DegenerateInputError("regressors are collinear");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  OlsResult r;
  r.nobs = static_cast<std::size_t>(X.rows());
  r.k = static_cast<std::size_t>(X.cols());
  r.beta = qr.solve(y);
  Eigen::VectorXd resid = y - X * r.beta;
  r.ssr = resid.squaredNorm();
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  double sigma2 = r.ssr / static_cast<double>(X.rows() - p);
  r.se = (Rinv.rowwise().squaredNorm() * sigma2).cwiseSqrt();
  return r;
}

// Regression of Δy_t on [const, y_{t-1}, Δy_{t-1} .. Δy_{t-lag}] using the
// last `nobs` differences.
OlsResult adf_regression(const std::vector<double>& y, std::size_t lag, std::size_t nobs) {
  const std::size_t ndiff = y.size() - 1;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(nobs), static_cast<Eigen::Index>(lag + 2));
  Eigen::VectorXd dy(static_cast<Eigen::Index>(nobs));
  for (std::size_t r = 0; r < nobs; ++r) {
    std::size_t i = ndiff - nobs + r;  // index into the differences
    auto row = static_cast<Eigen::Index>(r);
    dy(row) = y[i + 1] - y[i];
    X(row, 0) = 1.0;
    X(row, 1) = y[i];
    for (std::size_t j = 1; j <= lag; ++j) X(row, static_cast<Eigen::Index>(j + 1)) = y[i - j + 1] - y[i - j];
  }
  return ols(X, dy);
}

}  // namespace

std::size_t default_max_lag(std::size_t n) {
  auto schwert = static_cast<long long>(std::ceil(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
  long long cap = static_cast<long long>(n / 2) - 2;
  long long m = std::min(cap, schwert);
  if (m < 0) throw ValidationError("series too short for the ADF test");
  return static_cast<std::size_t>(m);
}

AdfResult adf_test(const std::vector<double>& y, std::optional<std::size_t> max_lag, double alpha) {
  if (y.size() < 3) throw ValidationError("series too short for the ADF test");
  for (double v : y)
    if (!std::isfinite(v)) throw ValidationError("series contains non-finite values");
  auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (*lo == *hi) throw DegenerateInputError("series is constant");

  const std::size_t n = y.size();
  std::size_t maxlag = 0;
  if (max_lag) {
    if (static_cast<long long>(*max_lag) > static_cast<long long>(n / 2) - 2)
      throw ValidationError("max_lag must be less than n/2 - 1");
    maxlag = *max_lag;
  } else {
    maxlag = default_max_lag(n);
  }
  const long long common = static_cast<long long>(n) - 1 - static_cast<long long>(maxlag);
  if (common < static_cast<long long>(maxlag) + 3) throw ValidationError("series too short for the ADF test");

  std::size_t best_lag = 0;
  double best_aic = std::numeric_limits<double>::infinity();
  for (std::size_t lag = 0; lag <= maxlag; ++lag) {
    auto fit = adf_regression(y, lag, static_cast<std::size_t>(common));
    double a = fit.aic();
    if (a < best_aic) {
      best_aic = a;
      best_lag = lag;
    }
  }

  const std::size_t nobs = n - 1 - best_lag;
  if (nobs < kMinAdfObservations) throw ValidationError("series too short for the ADF test");
  auto fit = adf_regression(y, best_lag, nobs);
  if (!(fit.ssr > 0)) throw DegenerateInputError("regression fits exactly; statistic undefined");

  AdfResult r;
  r.statistic = fit.beta(1) / fit.se(1);
  r.p_value = mackinnon_p(r.statistic);
  r.used_lag = best_lag;
  r.n_obs = nobs;
  r.max_lag = maxlag;
  r.aic = best_aic;
  r.verdict = classify_stationarity(r.p_value, alpha);
  return r;
}

double mackinnon_p(double t) {
  constexpr double kTauMax = 2.74;
  constexpr double kTauMin = -18.83;
  constexpr double kTauStar = -1.61;
  constexpr double kSmall[] = {2.1659, 1.4412, 3.8269e-2};
  constexpr double kLarge[] = {1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2};
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (t > kTauMax) return 1.0;
  if (t < kTauMin) return 0.0;
  double z = 0;
  if (t <= kTauStar) {
    z = kSmall[0] + t * (kSmall[1] + t * kSmall[2]);
  } else {
    z = kLarge[0] + t * (kLarge[1] + t * (kLarge[2] + t * kLarge[3]));
  }
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

// --- trimming -------------------------------------------------------------

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TimeSeries trim_mad(const TimeSeries& series, double k) {
  series.validate();
  if (!(k > 0)) throw ValidationError("trim factor must be positive");
  double med = median(series.values);
  std::vector<double> dev;
  dev.reserve(series.size());
  for (double v : series.values) dev.push_back(std::fabs(v - med));
  double mad = median(dev);
  if (mad == 0) return series;
  TimeSeries out;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (std::fabs(series.values[i] - med) <= k * mad) {
      out.dates.push_back(series.dates[i]);
      out.values.push_back(series.values[i]);
    }
  }
  return out;
}

// --- report ---------------------------------------------------------------

MetricReport analyze_metric(const std::vector<flow::DailyCounts>& days, std::string_view column,
                            const StatsOptions& options) {
  MetricReport rep;
  rep.value = std::string(column);
  TimeSeries ts = extract_series(days, column, options.gaps);
  if (options.trim_k) ts = trim_mad(ts, *options.trim_k);
  rep.n = ts.size();
  if (ts.size() >= 2) {
    auto ms = mean_std(ts.values);
    rep.mean = ms.mean;
    rep.std = ms.std;
    rep.trend = ols_fit(ts);
  } else {
    rep.mean = ts.values.front();
  }
  try {
    rep.adf = adf_test(ts.values, options.max_lag, options.alpha);
  } catch (const Error& e) {
    rep.error = e.what();
  }
  return rep;
}

std::string stats_report_json(const std::vector<MetricReport>& reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["value"] = r.value;
    j["n"] = r.n;
    j["mean"] = r.mean;
    j["std"] = r.std;
    if (r.trend) {
      j["slope"] = r.trend->slope;
      j["intercept"] = r.trend->intercept;
    } else {
      j["slope"] = nullptr;
      j["intercept"] = nullptr;
    }
    if (r.adf) {
      j["adf_stat"] = r.adf->statistic;
      j["p_value"] = r.adf->p_value;
      j["used_lag"] = r.adf->used_lag;
      j["conclusion"] = std::string(to_string(r.adf->verdict));
    } else {
      j["adf_stat"] = nullptr;
      j["p_value"] = nullptr;
      j["used_lag"] = nullptr;
      j["conclusion"] = nullptr;
      j["error"] = r.error;
    }
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

}  // namespace encdns::stats
