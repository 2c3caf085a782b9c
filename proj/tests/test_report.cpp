#include <doctest.h>

#include <nlohmann/json.hpp>

#include "encdns/errors.hpp"
#include "encdns/report.hpp"
#include "published_tables.hpp"

using namespace encdns;
using namespace encdns::report;
using probe::VerificationMatrix;

namespace {

std::uint64_t count(const ReportTable& t, const char* label, std::size_t col = 0) {
  const Row* r = t.find(label);
  REQUIRE_MESSAGE(r, "missing row " << label);
  return r->cells.at(col).count;
}

std::string percent(const ReportTable& t, const char* label, std::size_t col = 0) {
  const Row* r = t.find(label);
  REQUIRE(r);
  return r->cells.at(col).percent;
}

}  // namespace

TEST_CASE("percent formatting rounds half up to one decimal") {
  CHECK(format_percent(328, 931) == "35.2 %");
  CHECK(format_percent(865, 931) == "92.9 %");
  CHECK(format_percent(800, 931) == "85.9 %");
  CHECK(format_percent(0, 931) == "0.0 %");
  CHECK(format_percent(931, 931) == "100.0 %");
  CHECK(format_percent(1, 8) == "12.5 %");
  CHECK(format_percent(1, 16) == "6.3 %");   // 6.25 rounds up
  CHECK(format_percent(1, 1600) == "0.1 %");  // 0.0625
  CHECK(format_percent(1, 2001) == "0.0 %");
  CHECK_THROWS_AS(format_percent(1, 0), DegenerateInputError);
}

TEST_CASE("method support over three hand-enumerated matrices") {
  std::vector<VerificationMatrix> ms{VerificationMatrix::from_mask(0x3F), VerificationMatrix::from_mask(0b000010),
                                     VerificationMatrix::from_mask(0)};
  auto t = method_support_report(ms);
  CHECK(t.total == 3);
  CHECK(t.columns == std::vector<std::string>{"Method", "HTTP/1", "HTTP/2"});
  CHECK(count(t, "GET") == 2);
  CHECK(count(t, "GET", 1) == 1);
  CHECK(count(t, "JSON") == 1);
  CHECK(count(t, "JSON, GET, POST") == 1);
  CHECK(count(t, "POST, GET") == 1);
  CHECK(percent(t, "GET") == "66.7 %");

  auto none = method_support_report({VerificationMatrix{}, VerificationMatrix{}});
  for (const auto& r : none.rows)
    for (const auto& c : r.cells) CHECK(c.count == 0);
  auto all = method_support_report({VerificationMatrix::from_mask(0x3F)});
  REQUIRE(all.rows.size() == 7);
  for (const auto& r : all.rows)
    for (const auto& c : r.cells) CHECK(c.count == 1);
}

TEST_CASE("HTTP version buckets") {
  auto one = http_version_report({VerificationMatrix::from_mask(0b000010)});
  CHECK(count(one, "Only HTTP/1") == 1);
  auto both = http_version_report({VerificationMatrix::from_mask(0b010010)});
  CHECK(count(both, "HTTP/1 and HTTP/2") == 1);
  auto with_empty = http_version_report({VerificationMatrix::from_mask(0b100000), VerificationMatrix{}});
  CHECK(with_empty.total == 1);
  CHECK(count(with_empty, "Only HTTP/2") == 1);
  CHECK(percent(with_empty, "Only HTTP/2") == "100.0 %");
  auto empty = http_version_report({});
  CHECK(empty.no_data);
  CHECK(render(empty, Format::Text).find("(no data)") != std::string::npos);
}

TEST_CASE("reconstructed scan reproduces the published method and version tables") {
  auto ms = testdata::published_scan_matrices();
  REQUIRE(ms.size() == 931);
  auto t = method_support_report(ms);
  struct Expect {
    const char* label;
    std::uint64_t h1, h2;
    const char* p1;
    const char* p2;
  };
  const Expect rows[] = {
      {"JSON", 328, 324, "35.2 %", "34.8 %"},       {"GET", 830, 865, "89.2 %", "92.9 %"},
      {"POST", 836, 840, "89.8 %", "90.2 %"},       {"JSON, GET", 328, 324, "35.2 %", "34.8 %"},
      {"JSON, POST", 327, 322, "35.1 %", "34.6 %"}, {"POST, GET", 821, 819, "88.2 %", "88.0 %"},
      {"JSON, GET, POST", 327, 322, "35.1 %", "34.6 %"},
  };
  for (const auto& e : rows) {
    INFO(e.label);
    CHECK(count(t, e.label, 0) == e.h1);
    CHECK(count(t, e.label, 1) == e.h2);
    CHECK(percent(t, e.label, 0) == e.p1);
    CHECK(percent(t, e.label, 1) == e.p2);
  }
  auto v = http_version_report(ms);
  CHECK(v.total == 931);
  CHECK(count(v, "Only HTTP/1") == 45);
  CHECK(count(v, "Only HTTP/2") == 86);
  CHECK(count(v, "HTTP/1 and HTTP/2") == 800);
  CHECK(percent(v, "Only HTTP/1") == "4.8 %");
  CHECK(percent(v, "Only HTTP/2") == "9.2 %");
  CHECK(percent(v, "HTTP/1 and HTTP/2") == "85.9 %");
}

TEST_CASE("text, JSON and CSV renderings") {
  auto t = method_support_report({VerificationMatrix::from_mask(0x3F), VerificationMatrix::from_mask(0b000010)});
  auto text = render(t, Format::Text);
  CHECK(text.find("JSON, GET, POST") != std::string::npos);
  CHECK(text.find("2 (100.0 %)") != std::string::npos);
  CHECK(render(t, Format::Text) == text);

  auto j = nlohmann::json::parse(render(t, Format::Json));
  CHECK(j["total"] == 2);
  CHECK(j["rows"][1]["label"] == "GET");
  CHECK(j["rows"][1]["HTTP/1"]["count"] == 2);
  CHECK(j["rows"][1]["HTTP/1"]["percent"] == "100.0 %");

  auto csv = render(t, Format::Csv);
  CHECK(csv.rfind("Method,HTTP/1,HTTP/1 %,HTTP/2,HTTP/2 %\n", 0) == 0);
  CHECK(csv.find("\"JSON, GET\",1,50.0 %,1,50.0 %\n") != std::string::npos);

  CHECK(parse_format("json") == Format::Json);
  CHECK(parse_format("TEXT") == Format::Text);
  CHECK(parse_format("csv") == Format::Csv);
  CHECK_THROWS_AS(parse_format("xml"), ValidationError);
}

TEST_CASE("catalog and grouping tables") {
  auto c = catalog_summary_table({234, 131, 103, 52, 110});
  CHECK(count(c, "Total Unique Servers") == 234);
  CHECK(count(c, "Total Unique IPv4 Servers") + count(c, "Total Unique IPv6 Servers") == 234);
  CHECK(percent(c, "Unique Domain Names").empty());
  CHECK(catalog_summary_table({}).no_data);

  intel::GroupingReport g;
  g.total = 931;
  g.with_ptr = 680;
  g.without_ptr = 251;
  g.with_hostname = 685;
  g.unique_sld = 131;
  g.unique_prefixes = 142;
  g.provider_estimate = 273;
  g.known_found = 32;
  g.unknown_found = 899;
  auto t = grouping_table(g);
  CHECK(count(t, "Assumed # of unique providers") == 273);
  CHECK(percent(t, "IP addresses with a hostname") == "73.6 %");
  CHECK(percent(t, "IP addresses without PTR records") == "27.0 %");
  CHECK(count(t, "Number of discovered well-known resolvers") + count(t, "Number of discovered \"unknown\" resolvers") ==
        931);
  auto csv = render(t, Format::Csv);
  CHECK(csv.find("\"Number of discovered \"\"unknown\"\" resolvers\",899,96.6 %") != std::string::npos);
}

TEST_CASE("NSE-style output lists the six labels") {
  probe::ProbeTarget target;
  target.ip = net::IpAddress::parse("1.1.1.1");
  auto m = VerificationMatrix::from_mask(0b110110);
  auto out = render_nse(target, m);
  CHECK(out ==
        "PORT    STATE SERVICE\n"
        "443/tcp open  https\n"
        "| dns-doh-check: \n"
        "|   DoH-JSON: false\n"
        "|   DoH-GET: true\n"
        "|   DoH-POST: true\n"
        "|   DoH2-JSON: false\n"
        "|   DoH2-GET: true\n"
        "|_  DoH2-POST: true\n");
  VerificationMatrix unreachable;
  for (auto& d : unreachable.methods) d.reason = probe::FailureReason::ConnectionFailed;
  CHECK(render_nse(target, unreachable).find("443/tcp closed https") != std::string::npos);

  auto details = render_details(m);
  CHECK(details.find("DoH-GET: ok") != std::string::npos);
}

TEST_CASE("stats rendering") {
  stats::MetricReport ok;
  ok.value = "doh";
  ok.n = 100;
  ok.mean = 15.2;
  ok.std = 3;
  stats::AdfResult adf;
  adf.statistic = -8.7;
  adf.p_value = 3.8e-14;
  adf.verdict = stats::Verdict::Stationary;
  ok.adf = adf;
  stats::MetricReport bad;
  bad.value = "dns";
  bad.error = "series is constant";
  auto text = render_stats({ok, bad}, Format::Text);
  CHECK(text.find("-8.700") != std::string::npos);
  CHECK(text.find("Stationary") != std::string::npos);
  CHECK(text.find("error: series is constant") != std::string::npos);
  auto csv = render_stats({ok, bad}, Format::Csv);
  CHECK(csv.rfind("value,n,mean,std,slope,intercept,adf_stat,p_value,used_lag,conclusion\n", 0) == 0);
  CHECK(render_stats({}, Format::Text).find("(no data)") != std::string::npos);
  CHECK(nlohmann::json::parse(render_stats({ok}, Format::Json))[0]["conclusion"] == "Stationary");
}
