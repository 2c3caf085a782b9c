#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "encdns/errors.hpp"
#include "encdns/mock_resolver.hpp"
#include "encdns/scan.hpp"

using namespace encdns;
using namespace encdns::scan;
using namespace std::chrono_literals;

namespace {

net::IpAddress ip(const char* s) { return net::IpAddress::parse(s); }

probe::ProbeTarget target(const char* addr, std::uint16_t port = 443) {
  probe::ProbeTarget t;
  t.ip = ip(addr);
  t.port = port;
  return t;
}

void check_cover(const AddressRange& range, const std::vector<RangePartition>& parts, int n, std::uint64_t unit = 1) {
  REQUIRE(parts.size() == static_cast<std::size_t>(n));
  CHECK(parts.front().first == range.first);
  CHECK(parts.back().last == range.last);
  std::uint64_t lo = UINT64_MAX, hi = 0, total = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    CHECK(parts[i].worker_id == static_cast<int>(i));
    CHECK(parts[i].first <= parts[i].last);
    if (i) CHECK(std::uint64_t{parts[i - 1].last} + 1 == parts[i].first);
    lo = std::min(lo, parts[i].size());
    hi = std::max(hi, parts[i].size());
    total += parts[i].size();
  }
  CHECK(total == range.size());
  CHECK(hi - lo <= unit);
}

ScanConfig loopback_config() {
  ScanConfig cfg;
  cfg.exclude_non_public = false;
  cfg.timeout = probe::Millis{3000};
  cfg.rate_limit = 1000;
  return cfg;
}

Verifier fake_verifier(std::uint8_t mask) {
  return [mask](const probe::ProbeTarget&, const ScanConfig&) { return probe::VerificationMatrix::from_mask(mask); };
}

}  // namespace

TEST_CASE("address ranges parse from CIDR and dash forms") {
  CHECK(AddressRange::parse("10.0.0.0/8") == AddressRange{0x0A000000u, 0x0AFFFFFFu});
  CHECK(AddressRange::parse("1.2.3.4-1.2.3.10").size() == 7);
  CHECK(AddressRange::parse("0.0.0.0/0").size() == (std::uint64_t{1} << 32));
  CHECK_THROWS_AS(AddressRange::parse("1.2.3.10-1.2.3.4"), ValidationError);
  CHECK_THROWS_AS(AddressRange::parse("::/64"), ValidationError);
}

TEST_CASE("even partitions are a disjoint cover for every size up to 2^16 and n up to 16") {
  std::uint64_t checked = 0;
  for (std::uint32_t size = 1; size <= 65536; ++size) {
    std::uint32_t start = (size * 2654435761u) & 0x7FFFFFFFu;
    AddressRange range{start, start + size - 1};
    for (int n = 1; n <= 16; ++n) {
      if (static_cast<std::uint32_t>(n) > size) {
        CHECK_THROWS_AS(partition_ranges(range, n), ValidationError);
        continue;
      }
      auto parts = partition_ranges(range, n);
      // inline checks keep the exhaustive loop fast; check_cover runs on a sample
      bool ok = parts.size() == static_cast<std::size_t>(n) && parts.front().first == range.first &&
                parts.back().last == range.last;
      for (std::size_t i = 1; ok && i < parts.size(); ++i)
        ok = std::uint64_t{parts[i - 1].last} + 1 == parts[i].first && parts[i].size() <= parts[0].size() &&
             parts[0].size() - parts[i].size() <= 1;
      REQUIRE_MESSAGE(ok, "size " << size << " n " << n);
      if (size % 4099 == 0) check_cover(range, parts, n);
      ++checked;
    }
  }
  CHECK(checked > 1000000);
}

TEST_CASE("whole address space splits on /8 boundaries") {
  AddressRange all{0, 0xFFFFFFFFu};
  auto parts = partition_ranges(all, 5, PartitionMode::FirstOctet);
  std::vector<std::uint32_t> ends;
  for (const auto& p : parts) ends.push_back(p.last >> 24);
  CHECK(ends == std::vector<std::uint32_t>{51, 102, 153, 204, 255});
  check_cover(all, parts, 5, 1u << 24);
  for (const auto& p : parts) CHECK((p.first & 0xFFFFFFu) == 0);
  for (int n = 1; n <= 16; ++n) check_cover(all, partition_ranges(all, n, PartitionMode::FirstOctet), n, 1u << 24);
  CHECK_THROWS_AS(partition_ranges(AddressRange::parse("10.0.0.0/9"), 1, PartitionMode::FirstOctet), ValidationError);
  CHECK_THROWS_AS(partition_ranges(AddressRange::parse("10.0.0.0/8"), 2, PartitionMode::FirstOctet), ValidationError);
}

TEST_CASE("explicit first-octet end points reproduce a published five-way split") {
  auto parts = partition_by_octet_ends({51, 103, 154, 205, 255});
  REQUIRE(parts.size() == 5);
  std::vector<std::uint64_t> blocks;
  for (const auto& p : parts) blocks.push_back(p.size() >> 24);
  CHECK(blocks == std::vector<std::uint64_t>{52, 52, 51, 51, 50});
  CHECK(parts[1].first == (52u << 24));
  CHECK(parts[4].last == 0xFFFFFFFFu);
  CHECK_THROWS_AS(partition_by_octet_ends({51, 200}), ValidationError);
  CHECK_THROWS_AS(partition_by_octet_ends({100, 50, 255}), ValidationError);
}

TEST_CASE("target ingestion deduplicates, excludes and reports bad lines") {
  ScanConfig cfg;
  cfg.exclusions = {net::Cidr::parse("198.51.100.0/24")};
  std::istringstream in(
      "# candidates\n"
      "1.1.1.1\n"
      "8.8.8.8,8443\n"
      "1.1.1.1   # duplicate\n"
      "198.51.100.9\n"
      "10.0.0.1\n"
      "\n"
      "2606:4700:4700::1111\n");
  auto targets = ingest_targets(in, cfg);
  REQUIRE(targets.size() == 3);
  CHECK(targets[0].ip == ip("1.1.1.1"));
  CHECK(targets[0].port == 443);
  CHECK(targets[1].port == 8443);
  CHECK(targets[2].ip.is_v6());

  std::istringstream bad("1.1.1.1\nnot-an-ip\n");
  try {
    ingest_targets(bad, cfg);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 2);
  }
  std::istringstream bad_port("1.1.1.1,70000\n");
  CHECK_THROWS_AS(ingest_targets(bad_port, cfg), ParseError);
  CHECK_THROWS_AS(ingest_targets(std::string("/nonexistent/targets.txt"), cfg), IoError);
}

TEST_CASE("result records round-trip through JSON lines") {
  ScanResult r;
  r.index = 17;
  r.target = target("93.184.216.34");
  r.target.sni = "dns.example";
  r.matrix = probe::VerificationMatrix::from_mask(0b100110);
  r.matrix.methods[1].http_status = 200;
  r.matrix.methods[1].attempts = 1;
  r.matrix.methods[1].answers = {"93.184.216.34"};
  r.matrix.methods[0].reason = probe::FailureReason::HttpStatus;
  r.matrix.methods[0].http_status = 404;
  r.matrix.methods[0].certificate_valid = false;
  auto line = to_json_line(r);
  CHECK(line.find("\"DoH-GET\":true") != std::string::npos);
  CHECK(line.find("\"DoH2-JSON\":false") != std::string::npos);
  auto back = parse_json_line(line);
  CHECK(back.index == 17);
  CHECK(back.target == r.target);
  CHECK(back.matrix.mask() == 0b100110);
  CHECK(back.matrix.methods[0].reason == probe::FailureReason::HttpStatus);
  CHECK(back.matrix.methods[0].http_status == 404);
  CHECK(back.matrix.methods[0].certificate_valid == false);
  CHECK(back.matrix.methods[1].answers == r.matrix.methods[1].answers);
  CHECK_THROWS_AS(parse_json_line("{\"ip\": \"1.1.1.1\"}"), ParseError);
  CHECK_THROWS_AS(parse_json_line("[]"), ParseError);
}

TEST_CASE("config validation and consent") {
  ScanConfig cfg;
  cfg.concurrency = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.rate_limit = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  std::vector<probe::ProbeTarget> two_nets{target("203.0.113.1"), target("198.51.100.1")};
  CHECK(spans_multiple_networks(two_nets));
  CHECK_FALSE(spans_multiple_networks({target("203.0.113.1"), target("203.0.113.200")}));
  CallbackSink sink([](const ScanResult&) {});
  ScanConfig c;
  c.exclude_non_public = false;  // documentation prefixes; the fake verifier never connects
  RunOptions opts;
  opts.verifier = fake_verifier(0);
  CHECK_THROWS_AS(run_scan(two_nets, c, sink, opts), ValidationError);
  c.consent = true;
  CHECK(run_scan(two_nets, c, sink, opts).probed == 2);
}

TEST_CASE("scan of mock resolvers streams one record per target") {
  std::vector<std::unique_ptr<mock::MockResolver>> mocks;
  std::vector<probe::ProbeTarget> targets;
  for (std::uint8_t mask : {0x3F, 0x12, 0x00, 0x24, 0x09}) {
    mocks.push_back(mock::start_mock(mock::MockConfig::from_mask(mask)));
    targets.push_back(mocks.back()->doh_target());
  }
  auto cfg = loopback_config();
  cfg.concurrency = 4;
  std::ostringstream out;
  JsonlSink sink(out);
  auto summary = run_scan(targets, cfg, sink);
  CHECK(summary.targets == 5);
  CHECK(summary.probed == 5);
  CHECK(summary.with_any_method == 4);

  std::istringstream lines(out.str());
  std::string line;
  std::vector<ScanResult> results;
  while (std::getline(lines, line)) results.push_back(parse_json_line(line));
  REQUIRE(results.size() == 5);
  std::sort(results.begin(), results.end(), [](auto& a, auto& b) { return a.index < b.index; });
  const std::uint8_t expected[] = {0x3F, 0x12, 0x00, 0x24, 0x09};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(results[i].target == targets[i]);
    CHECK(results[i].matrix.mask() == expected[i]);
    CHECK(results[i].matrix.connection_attempts() == static_cast<int>(mocks[i]->connection_log().size()));
  }
}

TEST_CASE("ten targets at concurrency four log one connection per attempted method") {
  std::vector<std::unique_ptr<mock::MockResolver>> mocks;
  std::vector<probe::ProbeTarget> targets;
  for (int i = 0; i < 10; ++i) {
    mocks.push_back(mock::start_mock(mock::MockConfig::all_methods()));
    targets.push_back(mocks.back()->doh_target());
  }
  auto cfg = loopback_config();
  cfg.concurrency = 4;
  CallbackSink sink([](const ScanResult&) {});
  run_scan(targets, cfg, sink);
  std::size_t total = 0;
  for (auto& m : mocks) total += m->connection_log().size();
  CHECK(total == 10 * 6);
}

TEST_CASE("excluded addresses are never contacted") {
  auto cfg_a = mock::MockConfig::all_methods();
  cfg_a.bind_address = "127.0.0.2";
  auto cfg_b = mock::MockConfig::all_methods();
  cfg_b.bind_address = "127.0.0.3";
  mock::MockResolver allowed(cfg_a), forbidden(cfg_b);

  auto cfg = loopback_config();
  cfg.exclusions = {net::Cidr::parse("127.0.0.3/32")};
  std::vector<ScanResult> results;
  CallbackSink sink([&](const ScanResult& r) { results.push_back(r); });
  auto summary = run_scan({allowed.doh_target(), forbidden.doh_target()}, cfg, sink);
  CHECK(summary.probed == 1);
  CHECK(summary.skipped_excluded == 1);
  CHECK(allowed.connection_log().size() == 6);
  CHECK(forbidden.connection_log().empty());
  REQUIRE(results.size() == 2);
  for (const auto& r : results) {
    if (r.target.ip == ip("127.0.0.3")) {
      CHECK(r.excluded);
      CHECK(r.matrix.mask() == 0);
      CHECK(r.matrix.methods[0].reason == probe::FailureReason::Excluded);
    } else {
      CHECK_FALSE(r.excluded);
      CHECK(r.matrix.mask() == 0x3F);
    }
  }

  // the default non-public filter also keeps loopback out
  ScanConfig defaults;
  CallbackSink ignore([](const ScanResult&) {});
  forbidden.clear_log();
  run_scan({forbidden.doh_target()}, defaults, ignore);
  CHECK(forbidden.connection_log().empty());
}

TEST_CASE("connection rate stays under the configured limit") {
  std::vector<std::unique_ptr<mock::MockResolver>> mocks;
  std::vector<probe::ProbeTarget> targets;
  for (int i = 0; i < 20; ++i) {
    mocks.push_back(mock::start_mock(mock::MockConfig::from_mask(0x01)));
    targets.push_back(mocks.back()->doh_target());
  }
  auto cfg = loopback_config();
  cfg.concurrency = 8;
  cfg.retries = 0;
  cfg.rate_limit = 20;
  CallbackSink sink([](const ScanResult&) {});
  run_scan(targets, cfg, sink);
  std::vector<std::chrono::steady_clock::time_point> stamps;
  for (auto& m : mocks)
    for (auto& e : m->connection_log()) stamps.push_back(e.at);
  REQUIRE(stamps.size() == 20 * 6);
  std::sort(stamps.begin(), stamps.end());
  double seconds = std::chrono::duration<double>(stamps.back() - stamps.front()).count();
  double rate = static_cast<double>(stamps.size() - 1) / seconds;
  CHECK(rate <= 20 * 1.2);
  CHECK(rate >= 20 * 0.8);
}

TEST_CASE("checkpoints allow an interrupted scan to resume") {
  std::vector<probe::ProbeTarget> targets;
  for (int i = 1; i <= 40; ++i) targets.push_back(target(("203.0.113." + std::to_string(i)).c_str()));
  auto path = (std::filesystem::temp_directory_path() / "encdns_checkpoint_test.json").string();
  std::filesystem::remove(path);
  CHECK_FALSE(Checkpoint::load(path).completed_through);

  ScanConfig cfg;
  cfg.exclude_non_public = false;
  cfg.consent = true;
  cfg.concurrency = 1;
  cfg.checkpoint_every = 1;
  std::set<std::size_t> seen;
  int budget = 15;
  CallbackSink failing([&](const ScanResult& r) {
    if (budget-- == 0) throw IoError("disk full");
    seen.insert(r.index);
  });
  RunOptions opts;
  opts.checkpoint_path = path;
  opts.verifier = fake_verifier(0x02);
  CHECK_THROWS_AS(run_scan(targets, cfg, failing, opts), IoError);
  auto cp = Checkpoint::load(path);
  REQUIRE(cp.completed_through);
  CHECK(*cp.completed_through == 14);

  opts.resume_after = cp.completed_through;
  CallbackSink rest([&](const ScanResult& r) {
    CHECK_FALSE(seen.count(r.index));
    seen.insert(r.index);
  });
  cfg.concurrency = 6;
  auto summary = run_scan(targets, cfg, rest, opts);
  CHECK(summary.skipped_resumed == 15);
  CHECK(summary.probed == 25);
  CHECK(seen.size() == 40);
  CHECK(*Checkpoint::load(path).completed_through == 39);
  std::filesystem::remove(path);

  std::ofstream(path) << "not json";
  CHECK_THROWS_AS(Checkpoint::load(path), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("sink failure stops the pool and propagates") {
  std::vector<probe::ProbeTarget> targets;
  for (int i = 1; i <= 200; ++i) targets.push_back(target(("203.0.113." + std::to_string(i)).c_str()));
  ScanConfig cfg;
  cfg.exclude_non_public = false;
  cfg.concurrency = 16;
  std::atomic<int> calls{0};
  RunOptions opts;
  opts.verifier = [&](const probe::ProbeTarget&, const ScanConfig&) {
    std::this_thread::sleep_for(1ms);
    return probe::VerificationMatrix{};
  };
  CallbackSink sink([&](const ScanResult&) {
    if (++calls == 5) throw IoError("boom");
  });
  CHECK_THROWS_AS(run_scan(targets, cfg, sink, opts), IoError);
  CHECK(calls.load() < 200);
}
