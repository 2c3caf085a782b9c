#pragma once

// Tabular reports over scan, enrichment and statistics results, rendered as
// text, JSON or CSV.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "encdns/prober.hpp"
#include "encdns/resolver_intel.hpp"
#include "encdns/trend_stats.hpp"

namespace encdns::report {

enum class Format : std::uint8_t { Text, Json, Csv };
Format parse_format(std::string_view text);  ///< throws ValidationError

/// count/total*100 to one decimal, half-up, as "35.2 %". Throws
/// DegenerateInputError when total is zero.
std::string format_percent(std::uint64_t count, std::uint64_t total);

struct Cell {
  std::uint64_t count = 0;
  std::string percent;  ///< empty when the table has no denominator
};

struct Row {
  std::string label;
  std::vector<Cell> cells;
};

struct ReportTable {
  std::string title;
  /// First entry names the label column.
  std::vector<std::string> columns;
  std::vector<Row> rows;
  std::uint64_t total = 0;
  /// Set when the input was empty; renderers print an explicit marker.
  bool no_data = false;

  const Row* find(std::string_view label) const;
};

/// Rows JSON, GET, POST, and their combinations; columns HTTP/1 and HTTP/2.
/// A combination row counts a resolver iff every named method succeeded.
/// Percentages are relative to the number of matrices.
ReportTable method_support_report(const std::vector<probe::VerificationMatrix>& matrices);

/// Only HTTP/1, Only HTTP/2, HTTP/1 and HTTP/2. Resolvers without any
/// successful method are left out; percentages use the remaining count.
ReportTable http_version_report(const std::vector<probe::VerificationMatrix>& matrices);

ReportTable catalog_summary_table(const intel::CatalogSummary& summary);
ReportTable grouping_table(const intel::GroupingReport& report);

std::string render(const ReportTable& table, Format format);

/// Stats rows as a table: value, ADF stat, p-value, conclusion.
std::string render_stats(const std::vector<stats::MetricReport>& reports, Format format);

/// Port/state header followed by one "label: true|false" line per method.
std::string render_nse(const probe::ProbeTarget& target, const probe::VerificationMatrix& matrix);

/// Per-method detail lines (reason, status, latency) for verbose output.
std::string render_details(const probe::VerificationMatrix& matrix);

}  // namespace encdns::report
