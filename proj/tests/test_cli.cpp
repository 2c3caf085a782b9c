#include <doctest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "encdns/flow.hpp"
#include "encdns/mock_resolver.hpp"
#include "series_gen.hpp"

using namespace encdns;
namespace fs = std::filesystem;

namespace {

struct Run {
  int rc = -1;
  std::string out;
};

Run run(const std::string& args) {
  std::string cmd = std::string(ENCDNS_CLI) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  Run r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  int status = pclose(p);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("encdns-cli-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("verify prints the six labels for a mock resolver") {
  mock::MockResolver m(mock::MockConfig::from_mask(0b101101));
  auto port = std::to_string(m.endpoint().doh_port);
  auto r = run("verify 127.0.0.1 --port " + port + " --timeout-ms 3000 --retries 0");
  CHECK(r.rc == 0);
  CHECK(r.out.find("|   DoH-JSON: true\n") != std::string::npos);
  CHECK(r.out.find("|   DoH-GET: false\n") != std::string::npos);
  CHECK(r.out.find("|   DoH-POST: true\n") != std::string::npos);
  CHECK(r.out.find("|   DoH2-JSON: true\n") != std::string::npos);
  CHECK(r.out.find("|   DoH2-GET: false\n") != std::string::npos);
  CHECK(r.out.find("|_  DoH2-POST: true\n") != std::string::npos);

  auto j = run("verify 127.0.0.1 --port " + port + " --format json --retries 0");
  REQUIRE(j.rc == 0);
  auto doc = nlohmann::json::parse(j.out);
  CHECK(doc["DoH-POST"] == true);
  CHECK(doc["DoH-GET"] == false);
}

TEST_CASE("scan, report and enrich form a pipeline") {
  mock::MockResolver full(mock::MockConfig::from_mask(0x3F));
  mock::MockResolver h2(mock::MockConfig::from_mask(0b110000));
  auto targets = scratch("targets.txt");
  {
    std::ofstream out(targets);
    out << "127.0.0.1," << full.endpoint().doh_port << "\n127.0.0.1," << h2.endpoint().doh_port << "\n";
  }
  auto results = scratch("results.jsonl");
  auto s = run("scan " + targets.string() + " --allow-non-public --retries 0 --concurrency 2 -o " + results.string());
  REQUIRE(s.rc == 0);

  auto v = run("report versions " + results.string() + " --format json");
  REQUIRE(v.rc == 0);
  auto vj = nlohmann::json::parse(v.out);
  CHECK(vj["total"] == 2);

  auto m = run("report methods " + results.string() + " --format csv");
  CHECK(m.rc == 0);
  CHECK(m.out.find("GET,1,50.0 %,2,100.0 %\n") != std::string::npos);

  auto records = scratch("records.jsonl");
  auto e = run("enrich " + results.string() + " --ptr none -o " + records.string() + " --format json");
  REQUIRE(e.rc == 0);
  // both mocks share 127.0.0.1, and records are per address
  CHECK(nlohmann::json::parse(e.out)["total"] == 1);
  auto lines = slurp(records);
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 1);
  auto g = run("report grouping " + records.string());
  CHECK(g.rc == 0);
  CHECK(g.out.find("IP addresses without PTR records") != std::string::npos);
}

TEST_CASE("analyze reproduces the frozen daily counts") {
  auto out = scratch("daily.csv");
  auto r = run("analyze " ENCDNS_TEST_DATA "/flows.csv --official 10.0.0.53,2001:db8:100::53"
               " --local 10.0.0.0/8,2001:db8:100::/48 -o " + out.string());
  REQUIRE(r.rc == 0);
  CHECK(slurp(out) == slurp(ENCDNS_TEST_DATA "/expected_daily.csv"));
}

TEST_CASE("stats exits 2 on a constant series and 0 otherwise") {
  auto noise = testdata::generate("white", 3, 40, nlohmann::json{{"mean", 100.0}, {"sigma", 5.0}});
  std::vector<flow::DailyCounts> days;
  for (int i = 0; i < 40; ++i) {
    flow::DailyCounts d;
    d.date = flow::parse_date("2023-05-01") + std::chrono::days{i};
    d.doh = static_cast<std::uint64_t>(std::llround(noise[static_cast<std::size_t>(i)]));
    d.dns = 500;
    d.total = 1000;
    days.push_back(d);
  }
  auto path = scratch("constant.csv");
  {
    std::ofstream out(path);
    flow::write_daily_csv(out, days);
  }
  CHECK(run("stats " + path.string() + " --columns dns").rc == 2);
  auto ok = run("stats " + path.string() + " --columns doh --format json");
  CHECK(ok.rc == 0);
  CHECK(nlohmann::json::parse(ok.out)[0]["n"] == 40);
}

TEST_CASE("usage and input errors exit 1") {
  CHECK(run("").rc == 1);
  CHECK(run("--help").rc == 0);
  CHECK(run("frobnicate").rc == 1);
  CHECK(run("stats /nonexistent/daily.csv").rc == 1);
  CHECK(run("verify not-an-ip").rc == 1);
  CHECK(run("verify 127.0.0.1 --port 70000").rc == 1);
  CHECK(run("catalog --format xml").rc == 1);
  CHECK(run("report methods " ENCDNS_TEST_DATA "/expected_daily.csv").rc == 1);
  CHECK(run("mock --mask 0x40").rc == 1);
}

TEST_CASE("catalog summarizes the bundled providers") {
  auto r = run("catalog --format json");
  REQUIRE(r.rc == 0);
  CHECK(nlohmann::json::parse(r.out)["rows"].size() == 5);
  auto csv = run("catalog --format csv");
  CHECK(csv.out.find("Total Unique Servers,29\n") != std::string::npos);
  CHECK(csv.out.find("Total Unique IPv4 Servers,19\n") != std::string::npos);
  CHECK(csv.out.find("Total Unique IPv6 Servers,10\n") != std::string::npos);
  CHECK(csv.out.find("Unique Domain Names,11") != std::string::npos);
}
