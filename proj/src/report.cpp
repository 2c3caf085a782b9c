#include "encdns/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "encdns/errors.hpp"
#include "text_util.hpp"

namespace encdns::report {

using nlohmann::ordered_json;

Format parse_format(std::string_view text) {
  auto t = util::to_lower(util::trim(text));
  if (t == "text") return Format::Text;
  if (t == "json") return Format::Json;
  if (t == "csv") return Format::Csv;
  throw ValidationError("unknown format '" + std::string(text) + "' (expected text, json or csv)");
}

std::string format_percent(std::uint64_t count, std::uint64_t total) {
  if (total == 0) throw DegenerateInputError("percentage of an empty total");
  // tenths of a percent, rounded half-up in exact integer arithmetic
  unsigned __int128 num = static_cast<unsigned __int128>(count) * 2000 + total;
  auto tenths = static_cast<std::uint64_t>(num / (static_cast<unsigned __int128>(total) * 2));
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10) + " %";
}

const Row* ReportTable::find(std::string_view label) const {
  for (const auto& r : rows)
    if (r.label == label) return &r;
  return nullptr;
}

namespace {

Cell make_cell(std::uint64_t count, std::uint64_t total) {
  Cell c;
  c.count = count;
  if (total > 0) c.percent = format_percent(count, total);
  return c;
}

struct Combination {
  const char* label;
  bool json, get, post;
};

constexpr Combination kCombinations[] = {
    {"JSON", true, false, false},      {"GET", false, true, false},       {"POST", false, false, true},
    {"JSON, GET", true, true, false},  {"JSON, POST", true, false, true}, {"POST, GET", false, true, true},
    {"JSON, GET, POST", true, true, true},
};

bool supports(const probe::VerificationMatrix& m, probe::HttpVersion v, const Combination& c) {
  auto ok = [&](probe::Encoding e) { return m.at({e, v}).success; };
  return (!c.json || ok(probe::Encoding::Json)) && (!c.get || ok(probe::Encoding::WireGet)) &&
         (!c.post || ok(probe::Encoding::WirePost));
}

bool any_version(const probe::VerificationMatrix& m, probe::HttpVersion v) {
  for (auto e : {probe::Encoding::Json, probe::Encoding::WireGet, probe::Encoding::WirePost})
    if (m.at({e, v}).success) return true;
  return false;
}

std::string cell_text(const Cell& c) { return c.percent.empty() ? std::to_string(c.count) : std::to_string(c.count) + " (" + c.percent + ")"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string fmt_double(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string text_grid(const std::string& title, const std::vector<std::vector<std::string>>& grid) {
  std::vector<std::size_t> width;
  for (const auto& row : grid)
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (width.size() <= i) width.push_back(0);
      width[i] = std::max(width[i], row[i].size());
    }
  std::ostringstream out;
  if (!title.empty()) out << title << '\n';
  for (std::size_t r = 0; r < grid.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < grid[r].size(); ++i) {
      if (i) line += "  ";
      std::string cell = grid[r][i];
      if (i + 1 < grid[r].size()) cell.resize(width[i], ' ');
      line += cell;
    }
    out << line << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      total += 2 * (width.empty() ? 0 : width.size() - 1);
      out << std::string(total, '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace

ReportTable method_support_report(const std::vector<probe::VerificationMatrix>& matrices) {
  ReportTable t;
  t.title = "Supported DoH methods";
  t.columns = {"Method", "HTTP/1", "HTTP/2"};
  t.total = matrices.size();
  t.no_data = matrices.empty();
  for (const auto& c : kCombinations) {
    Row row;
    row.label = c.label;
    for (auto v : {probe::HttpVersion::Http1_1, probe::HttpVersion::Http2}) {
      std::uint64_t n = 0;
      for (const auto& m : matrices)
        if (supports(m, v, c)) ++n;
      row.cells.push_back(make_cell(n, t.total));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

ReportTable http_version_report(const std::vector<probe::VerificationMatrix>& matrices) {
  std::uint64_t only1 = 0, only2 = 0, both = 0;
  for (const auto& m : matrices) {
    bool h1 = any_version(m, probe::HttpVersion::Http1_1);
    bool h2 = any_version(m, probe::HttpVersion::Http2);
    if (h1 && h2) ++both;
    else if (h1) ++only1;
    else if (h2) ++only2;
  }
  ReportTable t;
  t.title = "Supported HTTP versions";
  t.columns = {"HTTP Version support", "Number of servers"};
  t.total = only1 + only2 + both;
  t.no_data = t.total == 0;
  t.rows.push_back({"Only HTTP/1", {make_cell(only1, t.total)}});
  t.rows.push_back({"Only HTTP/2", {make_cell(only2, t.total)}});
  t.rows.push_back({"HTTP/1 and HTTP/2", {make_cell(both, t.total)}});
  return t;
}

ReportTable catalog_summary_table(const intel::CatalogSummary& s) {
  ReportTable t;
  t.title = "Well-known DoH providers";
  t.columns = {"", "Number"};
  t.no_data = s.total == 0;
  t.rows = {
      {"Total Unique Servers", {make_cell(s.total, 0)}},
      {"Total Unique IPv4 Servers", {make_cell(s.ipv4_count, 0)}},
      {"Total Unique IPv6 Servers", {make_cell(s.ipv6_count, 0)}},
      {"Unique Autonomous Systems", {make_cell(s.unique_asn, 0)}},
      {"Unique Domain Names", {make_cell(s.unique_domains, 0)}},
  };
  return t;
}

ReportTable grouping_table(const intel::GroupingReport& r) {
  ReportTable t;
  t.title = "Features of discovered resolver addresses";
  t.columns = {"Feature", "Amount"};
  t.total = r.total;
  t.no_data = r.total == 0;
  t.rows = {
      {"Total number of unique IP addresses", {make_cell(r.total, r.total)}},
      {"IP addresses with PTR records", {make_cell(r.with_ptr, r.total)}},
      {"IP addresses without PTR records", {make_cell(r.without_ptr, r.total)}},
      {"IP addresses with a hostname", {make_cell(r.with_hostname, r.total)}},
      {"Unique SLD", {make_cell(r.unique_sld, r.total)}},
      {"Unique /24 prefixes", {make_cell(r.unique_prefixes, r.total)}},
      {"Assumed # of unique providers", {make_cell(r.provider_estimate, r.total)}},
      {"Number of discovered well-known resolvers", {make_cell(r.known_found, r.total)}},
      {"Number of discovered \"unknown\" resolvers", {make_cell(r.unknown_found, r.total)}},
  };
  return t;
}

std::string render(const ReportTable& t, Format format) {
  switch (format) {
    case Format::Json: {
      ordered_json j;
      j["title"] = t.title;
      j["columns"] = t.columns;
      j["total"] = t.total;
      j["no_data"] = t.no_data;
      ordered_json rows = ordered_json::array();
      for (const auto& r : t.rows) {
        ordered_json row;
        row["label"] = r.label;
        for (std::size_t i = 0; i < r.cells.size(); ++i) {
          std::string col = i + 1 < t.columns.size() ? t.columns[i + 1] : "value" + std::to_string(i);
          ordered_json cell;
          cell["count"] = r.cells[i].count;
          if (!r.cells[i].percent.empty()) cell["percent"] = r.cells[i].percent;
          row[col] = std::move(cell);
        }
        rows.push_back(std::move(row));
      }
      j["rows"] = std::move(rows);
      return j.dump(2) + "\n";
    }
    case Format::Csv: {
      std::ostringstream out;
      out << csv_field(t.columns.empty() || t.columns[0].empty() ? "label" : t.columns[0]);
      for (std::size_t i = 1; i < t.columns.size(); ++i) {
        out << ',' << csv_field(t.columns[i]);
        if (t.total > 0) out << ',' << csv_field(t.columns[i] + " %");
      }
      out << '\n';
      if (t.no_data) return out.str();
      for (const auto& r : t.rows) {
        out << csv_field(r.label);
        for (const auto& c : r.cells) {
          out << ',' << c.count;
          if (t.total > 0) out << ',' << csv_field(c.percent);
        }
        out << '\n';
      }
      return out.str();
    }
    case Format::Text:
      break;
  }
  if (t.no_data) return t.title + "\n(no data)\n";
  std::vector<std::vector<std::string>> grid;
  grid.push_back(t.columns);
  for (const auto& r : t.rows) {
    std::vector<std::string> line{r.label};
    for (const auto& c : r.cells) line.push_back(cell_text(c));
    grid.push_back(std::move(line));
  }
  return text_grid(t.title, grid);
}

std::string render_stats(const std::vector<stats::MetricReport>& reports, Format format) {
  if (format == Format::Json) return stats::stats_report_json(reports) + "\n";
  const char* title = "Augmented Dickey-Fuller test for stationarity (alpha 0.05)";
  if (format == Format::Csv) {
    std::ostringstream out;
    out << "value,n,mean,std,slope,intercept,adf_stat,p_value,used_lag,conclusion\n";
    for (const auto& r : reports) {
      out << csv_field(r.value) << ',' << r.n << ',' << fmt_double(r.mean, "%.6g") << ','
          << fmt_double(r.std, "%.6g") << ',';
      if (r.trend)
        out << fmt_double(r.trend->slope, "%.6g") << ',' << fmt_double(r.trend->intercept, "%.6g");
      else
        out << ',';
      out << ',';
      if (r.adf)
        out << fmt_double(r.adf->statistic, "%.6g") << ',' << fmt_double(r.adf->p_value, "%.6g") << ','
            << r.adf->used_lag << ',' << stats::to_string(r.adf->verdict);
      else
        out << ",,," << csv_field("error: " + r.error);
      out << '\n';
    }
    return out.str();
  }
  if (reports.empty()) return std::string(title) + "\n(no data)\n";
  std::vector<std::vector<std::string>> grid{{"Value", "N", "Mean", "STD", "Slope/day", "ADF Stat", "p-value", "Conclusion"}};
  for (const auto& r : reports) {
    std::vector<std::string> line{r.value, std::to_string(r.n), fmt_double(r.mean, "%.6g"), fmt_double(r.std, "%.6g"),
                                  r.trend ? fmt_double(r.trend->slope, "%.4g") : "-"};
    if (r.adf) {
      line.push_back(fmt_double(r.adf->statistic, "%.3f"));
      line.push_back(fmt_double(r.adf->p_value, "%.3g"));
      line.push_back(std::string(stats::to_string(r.adf->verdict)));
    } else {
      line.insert(line.end(), {"-", "-", "error: " + r.error});
    }
    grid.push_back(std::move(line));
  }
  return text_grid(title, grid);
}

std::string render_nse(const probe::ProbeTarget& target, const probe::VerificationMatrix& m) {
  bool reached = false;
  for (const auto& d : m.methods)
    if (d.reason != probe::FailureReason::ConnectionFailed && d.reason != probe::FailureReason::Excluded) reached = true;
  std::string port = std::to_string(target.port) + "/tcp";
  std::string state = reached ? "open" : "closed";
  std::string service = target.port == probe::kDohPort ? "https" : "unknown";
  std::ostringstream out;
  std::string p = port;
  p.resize(std::max<std::size_t>(8, port.size() + 1), ' ');
  std::string s = state;
  s.resize(std::max<std::size_t>(6, state.size() + 1), ' ');
  out << "PORT    STATE SERVICE\n" << p << s << service << '\n';
  out << "| dns-doh-check: \n";
  for (std::size_t i = 0; i < 6; ++i) {
    out << (i == 5 ? "|_  " : "|   ") << probe::kMethodLabels[i] << ": " << (m.methods[i].success ? "true" : "false")
        << '\n';
  }
  return out.str();
}

std::string render_details(const probe::VerificationMatrix& m) {
  std::ostringstream out;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& d = m.methods[i];
    out << probe::kMethodLabels[i] << ": " << probe::describe(d.reason);
    if (d.http_status) out << ", http " << d.http_status;
    out << ", " << fmt_double(d.latency_ms, "%.1f") << " ms, attempts " << d.attempts;
    if (d.certificate_valid) out << ", certificate " << (*d.certificate_valid ? "valid" : "not valid");
    if (!d.message.empty()) out << " (" << d.message << ")";
    out << '\n';
  }
  return out.str();
}

}  // namespace encdns::report
