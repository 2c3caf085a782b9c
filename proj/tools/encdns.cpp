// encdns: command-line front end for scanning, enrichment, flow analysis and
// reporting. Exit status: 0 success, 1 usage or input error, 2 runtime failure.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "encdns/errors.hpp"
#include "encdns/flow.hpp"
#include "encdns/mock_resolver.hpp"
#include "encdns/report.hpp"
#include "encdns/resolver_intel.hpp"
#include "encdns/scan.hpp"
#include "encdns/trend_stats.hpp"

using namespace encdns;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitRuntime = 2;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

// Output goes to the named file, or stdout for "" and "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw IoError("cannot write " + path);
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void close() {
    if (!file_) {
      std::cout.flush();
      return;
    }
    file_->close();
    if (!*file_) throw IoError("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

intel::Catalog load_providers(const std::string& path) {
  return path.empty() ? intel::Catalog::major_providers() : intel::Catalog::load_csv(path);
}

struct ProbeFlags {
  int timeout_ms = 3000;
  int retries = 1;
  bool strict = false;
  std::string ca_file;

  void add(CLI::App* cmd) {
    cmd->add_option("--timeout-ms", timeout_ms, "per-connection timeout")->check(CLI::Range(1, 600000));
    cmd->add_option("--retries", retries, "extra attempts per failing method")->check(CLI::Range(0, 10));
    cmd->add_flag("--strict-tls", strict, "require a valid certificate chain and name");
    cmd->add_option("--ca-file", ca_file, "extra PEM trust anchor for --strict-tls")->check(CLI::ExistingFile);
  }
  probe::ProbeOptions options() const {
    probe::ProbeOptions o;
    o.strict_tls = strict;
    o.ca_file = ca_file;
    return o;
  }
};

// --- scan -------------------------------------------------------------------

struct ScanArgs {
  std::string targets;
  std::string output;
  std::string exclude;
  std::string checkpoint;
  bool resume = false;
  bool allow_non_public = false;
  bool consent = false;
  int concurrency = 64;
  double rate = 100.0;
  int port = probe::kDohPort;
  ProbeFlags probe;
};

int run_scan_cmd(const ScanArgs& a) {
  scan::ScanConfig cfg;
  cfg.concurrency = a.concurrency;
  cfg.rate_limit = a.rate;
  cfg.timeout = probe::Millis{a.probe.timeout_ms};
  cfg.retries = a.probe.retries;
  cfg.consent = a.consent;
  cfg.exclude_non_public = !a.allow_non_public;
  cfg.probe_options = a.probe.options();
  if (!a.exclude.empty()) cfg.exclusions = net::load_cidr_file(a.exclude);
  cfg.validate();

  // Ingest without exclusions so excluded targets still appear in the output.
  scan::ScanConfig ingest_cfg;
  ingest_cfg.exclude_non_public = false;
  auto targets = scan::ingest_targets(a.targets, ingest_cfg, static_cast<std::uint16_t>(a.port));

  scan::RunOptions opts;
  opts.checkpoint_path = a.checkpoint;
  if (a.resume) {
    if (a.checkpoint.empty()) throw ValidationError("--resume needs --checkpoint");
    opts.resume_after = scan::Checkpoint::load(a.checkpoint).completed_through;
  }

  std::unique_ptr<std::ofstream> file;
  std::ostream* out = &std::cout;
  if (!a.output.empty() && a.output != "-") {
    file = std::make_unique<std::ofstream>(a.output, a.resume ? std::ios::app : std::ios::trunc);
    if (!*file) throw IoError("cannot write " + a.output);
    out = file.get();
  }
  scan::JsonlSink sink(*out);
  auto s = scan::run_scan(targets, cfg, sink, opts);
  out->flush();
  std::cerr << "targets " << s.targets << ", probed " << s.probed << ", excluded " << s.skipped_excluded
            << ", resumed past " << s.skipped_resumed << ", with any DoH method " << s.with_any_method << '\n';
  return 0;
}

// --- verify -----------------------------------------------------------------

struct VerifyArgs {
  std::string ip;
  int port = probe::kDohPort;
  std::string sni;
  std::string path = "/dns-query";
  std::string name = "www.example.com";
  bool dot = false;
  int dot_port = probe::kDotPort;
  bool details = false;
  std::string format = "text";
  ProbeFlags probe;
};

int run_verify(const VerifyArgs& a) {
  auto fmt = report::parse_format(a.format);
  probe::ProbeTarget t;
  t.ip = net::IpAddress::parse(a.ip);
  t.port = static_cast<std::uint16_t>(a.port);
  if (!a.sni.empty()) t.sni = a.sni;
  t.path = a.path;
  t.probe_name = a.name;
  t.validate();
  auto opts = a.probe.options();
  auto m = probe::verify_endpoint(t, probe::Millis{a.probe.timeout_ms}, a.probe.retries, opts);

  std::optional<probe::DotResult> dot;
  if (a.dot) {
    auto dt = t;
    dt.port = static_cast<std::uint16_t>(a.dot_port);
    dot = probe::probe_dot(dt, probe::Millis{a.probe.timeout_ms}, opts);
  }

  if (fmt == report::Format::Text) {
    std::cout << report::render_nse(t, m);
    if (a.details) std::cout << report::render_details(m);
    if (dot)
      std::cout << "DoT " << t.ip.to_string() << ':' << a.dot_port << ": "
                << (dot->answered ? "true" : "false") << " (" << probe::describe(dot->reason) << ")\n";
    return 0;
  }
  scan::ScanResult r;
  r.target = t;
  r.matrix = m;
  if (fmt == report::Format::Json) {
    std::cout << scan::to_json_line(r) << '\n';
    return 0;
  }
  std::cout << "method,supported,reason,http_status,latency_ms,attempts\n";
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& d = m.methods[i];
    std::cout << probe::kMethodLabels[i] << ',' << (d.success ? "true" : "false") << ','
              << probe::describe(d.reason) << ',' << d.http_status << ',' << d.latency_ms << ',' << d.attempts
              << '\n';
  }
  return 0;
}

// --- enrich -----------------------------------------------------------------

struct EnrichArgs {
  std::string results;
  std::string ptr = "system";
  std::string passive;
  std::string asn;
  std::string providers;
  std::string output;
  std::string format = "text";
  bool include_unverified = false;
};

std::map<net::IpAddress, std::string> load_ptr_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::map<net::IpAddress, std::string> table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(path + ":" + std::to_string(lineno) + ": expected ip,hostname", lineno);
    auto ip = net::IpAddress::try_parse(line.substr(0, comma));
    if (!ip) {
      if (lineno == 1) continue;  // header
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad address", lineno);
    }
    table[*ip] = line.substr(comma + 1);
  }
  return table;
}

int run_enrich(const EnrichArgs& a) {
  auto fmt = report::parse_format(a.format);
  auto results = scan::load_results(a.results);
  auto catalog = load_providers(a.providers);

  std::unique_ptr<intel::PtrProvider> ptr;
  if (a.ptr == "system")
    ptr = std::make_unique<intel::SystemPtrProvider>();
  else if (a.ptr != "none")
    ptr = std::make_unique<intel::StaticPtrProvider>(load_ptr_csv(a.ptr));
  std::optional<intel::PassiveDnsTable> passive;
  if (!a.passive.empty()) passive = intel::PassiveDnsTable::load(a.passive);
  std::optional<intel::AsnTable> asn;
  if (!a.asn.empty()) asn = intel::AsnTable::load(a.asn);

  intel::EnrichmentSources src;
  src.ptr = ptr.get();
  src.passive = passive ? &*passive : nullptr;
  src.asn = asn ? &*asn : nullptr;

  std::vector<intel::ResolverRecord> records;
  std::set<net::IpAddress> seen;
  for (const auto& r : results) {
    if (r.excluded || (!a.include_unverified && !r.matrix.any())) continue;
    if (!seen.insert(r.target.ip).second) continue;  // one record per address, first port wins
    records.push_back(intel::enrich(r.target.ip, r.matrix, src));
  }
  if (!a.output.empty()) {
    Output out(a.output);
    for (const auto& r : records) out.stream() << intel::record_to_json_line(r) << '\n';
    out.close();
  }
  std::cout << report::render(report::grouping_table(intel::make_grouping_report(records, catalog)), fmt);
  return 0;
}

// --- catalog ----------------------------------------------------------------

struct CatalogArgs {
  std::vector<std::string> files;
  bool bundled = false;
  std::string output;
  std::string format = "text";
};

int run_catalog(const CatalogArgs& a) {
  auto fmt = report::parse_format(a.format);
  intel::Catalog merged;
  if (a.bundled || a.files.empty()) merged.merge(intel::Catalog::major_providers());
  for (const auto& f : a.files) merged.merge(intel::Catalog::load_csv(f));
  if (!a.output.empty()) {
    Output out(a.output);
    merged.write_csv(out.stream());
    out.close();
  }
  std::cout << report::render(report::catalog_summary_table(intel::summarize_catalog(merged)), fmt);
  return 0;
}

// --- analyze ----------------------------------------------------------------

struct AnalyzeArgs {
  std::string flows;
  std::string providers;
  std::string official;
  std::string local;
  std::string suffixes;
  std::string output;
  bool summary = false;
};

int run_analyze(const AnalyzeArgs& a) {
  auto cfg = flow::ClassifierConfig::from_catalog(load_providers(a.providers));
  for (const auto& s : split_list(a.official)) cfg.official_resolvers.insert(net::IpAddress::parse(s));
  for (const auto& s : split_list(a.local)) cfg.local_prefixes.push_back(net::Cidr::parse(s));
  cfg.provider_suffixes = split_list(a.suffixes);
  cfg.validate();

  std::ifstream in(a.flows);
  if (!in) throw IoError("cannot read " + a.flows);
  flow::DailyAggregator agg(cfg);
  try {
    flow::read_flow_csv(in, [&](const flow::FlowRecord& f) { agg.add(f); });
  } catch (const ParseError& e) {
    throw ParseError(a.flows + ": " + e.what(), e.offset());
  }
  auto days = agg.finish();
  Output out(a.output);
  flow::write_daily_csv(out.stream(), days);
  out.close();
  if (a.summary) {
    std::uint64_t kept = 0, doh = 0;
    for (const auto& d : days) {
      kept += d.total;
      doh += d.doh;
    }
    std::cerr << "days " << days.size() << ", flows kept " << kept << ", dropped (not local) "
              << agg.dropped_not_local();
    if (kept > 0) std::cerr << ", DoH per million flows " << flow::ratio_per_million(doh, kept);
    std::cerr << '\n';
  }
  return 0;
}

// --- stats ------------------------------------------------------------------

struct StatsArgs {
  std::string daily;
  std::string columns = "doh,dot,doq,dns,doh_per_million";
  std::string gaps = "drop";
  double trim = 0;
  double alpha = stats::kDefaultAlpha;
  int max_lag = -1;
  std::string format = "text";
};

int run_stats(const StatsArgs& a) {
  auto fmt = report::parse_format(a.format);
  stats::StatsOptions opts;
  if (a.gaps == "drop")
    opts.gaps = stats::GapPolicy::Drop;
  else if (a.gaps == "keep")
    opts.gaps = stats::GapPolicy::Keep;
  else
    throw ValidationError("--gaps must be drop or keep");
  if (a.trim > 0) opts.trim_k = a.trim;
  opts.alpha = a.alpha;
  if (a.max_lag >= 0) opts.max_lag = static_cast<std::size_t>(a.max_lag);

  auto days = flow::load_daily_csv(a.daily);
  auto columns = split_list(a.columns);
  if (columns.empty()) throw ValidationError("--columns is empty");
  std::vector<stats::MetricReport> reports;
  for (const auto& c : columns) reports.push_back(stats::analyze_metric(days, c, opts));
  std::cout << report::render_stats(reports, fmt);
  int rc = 0;
  for (const auto& r : reports) {
    if (!r.error.empty()) {
      std::cerr << "encdns: " << r.value << ": " << r.error << '\n';
      rc = kExitRuntime;
    }
  }
  return rc;
}

// --- report -----------------------------------------------------------------

struct ReportArgs {
  std::string kind;
  std::string input;
  std::string providers;
  std::string format = "text";
};

int run_report(const ReportArgs& a) {
  auto fmt = report::parse_format(a.format);
  if (a.kind == "grouping") {
    auto records = intel::load_records(a.input);
    std::cout << report::render(report::grouping_table(intel::make_grouping_report(records, load_providers(a.providers))),
                                fmt);
    return 0;
  }
  auto results = scan::load_results(a.input);
  std::vector<probe::VerificationMatrix> matrices;
  for (const auto& r : results)
    if (!r.excluded) matrices.push_back(r.matrix);
  if (a.kind == "methods") {
    std::cout << report::render(report::method_support_report(matrices), fmt);
  } else if (a.kind == "versions") {
    std::cout << report::render(report::http_version_report(matrices), fmt);
  } else if (a.kind == "nse") {
    for (const auto& r : results) std::cout << r.target.ip.to_string() << '\n' << report::render_nse(r.target, r.matrix);
  } else {
    throw ValidationError("unknown report '" + a.kind + "'");
  }
  return 0;
}

// --- mock -------------------------------------------------------------------

struct MockArgs {
  std::string mask = "0x3f";
  std::string bind = "127.0.0.1";
  std::string misbehave = "none";
  std::string answer = "93.184.216.34";
  double duration_s = 0;
  bool no_dot = false;
};

int run_mock(const MockArgs& a) {
  unsigned long mask = std::stoul(a.mask, nullptr, 0);
  if (mask > 0x3F) throw ValidationError("--mask must be in 0..0x3f");
  auto cfg = mock::MockConfig::from_mask(static_cast<std::uint8_t>(mask));
  cfg.bind_address = a.bind;
  cfg.dot_enabled = !a.no_dot;
  static const std::map<std::string, mock::Misbehavior> kModes{
      {"none", mock::Misbehavior::None},       {"html", mock::Misbehavior::HtmlBody},
      {"wrong-id", mock::Misbehavior::WrongId}, {"empty", mock::Misbehavior::Empty200},
      {"slow", mock::Misbehavior::Slow},       {"echo", mock::Misbehavior::Echo}};
  auto mode = kModes.find(a.misbehave);
  if (mode == kModes.end()) throw ValidationError("unknown --misbehave '" + a.misbehave + "'");
  cfg.misbehavior = mode->second;
  if (cfg.misbehavior == mock::Misbehavior::Slow) cfg.slow_delay = std::chrono::milliseconds{2000};
  auto ans = net::IpAddress::parse(a.answer);
  if (!ans.is_v4()) throw ValidationError("--answer must be an IPv4 address");
  std::copy_n(ans.bytes().begin(), 4, cfg.answer.begin());

  mock::MockResolver m(cfg);
  const auto& ep = m.endpoint();
  std::cout << "doh " << ep.address << ' ' << ep.doh_port << '\n';
  if (ep.dot_port) std::cout << "dot " << ep.address << ' ' << ep.dot_port << '\n';
  std::cout << "cert " << ep.certificate_path << std::endl;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(a.duration_s);
  while (!g_stop && (a.duration_s <= 0 || std::chrono::steady_clock::now() < deadline))
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  std::cerr << "connections " << m.connection_log().size() << ", requests " << m.requests_served() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Encrypted DNS resolver discovery and traffic analysis"};
  app.set_version_flag("--version", ENCDNS_VERSION);
  app.require_subcommand(1);

  ScanArgs scan_args;
  auto* scan_cmd = app.add_subcommand("scan", "verify candidate addresses and stream JSON-lines results");
  scan_cmd->add_option("targets", scan_args.targets, "file with one ip or ip,port per line")
      ->required()
      ->check(CLI::ExistingFile);
  scan_cmd->add_option("-o,--output", scan_args.output, "results file (default stdout)");
  scan_cmd->add_option("--exclude", scan_args.exclude, "file of CIDRs never to contact")->check(CLI::ExistingFile);
  scan_cmd->add_option("--concurrency", scan_args.concurrency, "worker threads")->check(CLI::Range(1, 4096));
  scan_cmd->add_option("--rate-limit", scan_args.rate, "new connections per second")->check(CLI::PositiveNumber);
  scan_cmd->add_option("--port", scan_args.port, "port for lines without one")->check(CLI::Range(1, 65535));
  scan_cmd->add_option("--checkpoint", scan_args.checkpoint, "checkpoint file");
  scan_cmd->add_flag("--resume", scan_args.resume, "skip targets already recorded in the checkpoint");
  scan_cmd->add_flag("--consent", scan_args.consent, "confirm scanning beyond a single /24");
  scan_cmd->add_flag("--allow-non-public", scan_args.allow_non_public, "do not skip private and loopback space");
  scan_args.probe.add(scan_cmd);

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "probe one endpoint with all six DoH methods");
  verify_cmd->add_option("ip", verify_args.ip, "resolver address")->required();
  verify_cmd->add_option("--port", verify_args.port, "DoH port")->check(CLI::Range(1, 65535));
  verify_cmd->add_option("--sni", verify_args.sni, "TLS server name and HTTP authority");
  verify_cmd->add_option("--path", verify_args.path, "URI path");
  verify_cmd->add_option("--name", verify_args.name, "name to query");
  verify_cmd->add_flag("--dot", verify_args.dot, "also try DNS over TLS");
  verify_cmd->add_option("--dot-port", verify_args.dot_port, "DoT port")->check(CLI::Range(1, 65535));
  verify_cmd->add_flag("--details", verify_args.details, "per-method reason, status and latency");
  verify_cmd->add_option("--format", verify_args.format, "text, json or csv");
  verify_args.probe.add(verify_cmd);

  EnrichArgs enrich_args;
  auto* enrich_cmd = app.add_subcommand("enrich", "attach hostnames and ASNs to verified resolvers and group them");
  enrich_cmd->add_option("results", enrich_args.results, "scan results (JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  enrich_cmd->add_option("--ptr", enrich_args.ptr, "system, none, or a CSV of ip,hostname");
  enrich_cmd->add_option("--passive", enrich_args.passive, "passive DNS snapshot (JSON lines)")
      ->check(CLI::ExistingFile);
  enrich_cmd->add_option("--asn", enrich_args.asn, "prefix,asn table")->check(CLI::ExistingFile);
  enrich_cmd->add_option("--providers", enrich_args.providers, "well-known catalog CSV (default bundled)")
      ->check(CLI::ExistingFile);
  enrich_cmd->add_option("-o,--output", enrich_args.output, "write records as JSON lines");
  enrich_cmd->add_flag("--include-unverified", enrich_args.include_unverified, "keep results without any method");
  enrich_cmd->add_option("--format", enrich_args.format, "text, json or csv");

  CatalogArgs catalog_args;
  auto* catalog_cmd = app.add_subcommand("catalog", "merge provider lists and summarize them");
  catalog_cmd->add_option("files", catalog_args.files, "catalog CSV files")->check(CLI::ExistingFile);
  catalog_cmd->add_flag("--bundled", catalog_args.bundled, "include the bundled provider list");
  catalog_cmd->add_option("-o,--output", catalog_args.output, "write the merged catalog");
  catalog_cmd->add_option("--format", catalog_args.format, "text, json or csv");

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "classify flows and write daily counts");
  analyze_cmd->add_option("flows", analyze_args.flows, "flow CSV")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--providers", analyze_args.providers, "DoH provider catalog (default bundled)")
      ->check(CLI::ExistingFile);
  analyze_cmd->add_option("--official", analyze_args.official, "comma-separated resolvers excluded from DNS counts");
  analyze_cmd->add_option("--local", analyze_args.local, "comma-separated source prefixes to keep");
  analyze_cmd->add_option("--sni-suffix", analyze_args.suffixes, "comma-separated SNI suffixes counted as DoH");
  analyze_cmd->add_option("-o,--output", analyze_args.output, "daily CSV (default stdout)");
  analyze_cmd->add_flag("--summary", analyze_args.summary, "print totals and the DoH ratio to stderr");

  StatsArgs stats_args;
  auto* stats_cmd = app.add_subcommand("stats", "mean, trend and ADF stationarity per column");
  stats_cmd->add_option("daily", stats_args.daily, "daily counts CSV")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--columns", stats_args.columns, "comma-separated columns");
  stats_cmd->add_option("--gaps", stats_args.gaps, "drop or keep days without capture");
  stats_cmd->add_option("--trim-mad", stats_args.trim, "drop points beyond k median absolute deviations");
  stats_cmd->add_option("--alpha", stats_args.alpha, "significance level")->check(CLI::Range(0.0, 1.0));
  stats_cmd->add_option("--max-lag", stats_args.max_lag, "upper bound for the lag search");
  stats_cmd->add_option("--format", stats_args.format, "text, json or csv");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "tables over scan results or enriched records");
  report_cmd->add_option("kind", report_args.kind, "methods, versions, nse or grouping")
      ->required()
      ->check(CLI::IsMember({"methods", "versions", "nse", "grouping"}));
  report_cmd->add_option("input", report_args.input, "results or records (JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  report_cmd->add_option("--providers", report_args.providers, "well-known catalog CSV for grouping")
      ->check(CLI::ExistingFile);
  report_cmd->add_option("--format", report_args.format, "text, json or csv");

  MockArgs mock_args;
  auto* mock_cmd = app.add_subcommand("mock", "run a loopback DoH/DoT resolver for testing");
  mock_cmd->add_option("--mask", mock_args.mask, "supported methods, bit i = method i");
  mock_cmd->add_option("--bind", mock_args.bind, "loopback address");
  mock_cmd->add_option("--misbehave", mock_args.misbehave, "none, html, wrong-id, empty, slow or echo");
  mock_cmd->add_option("--answer", mock_args.answer, "A record to serve");
  mock_cmd->add_option("--duration-s", mock_args.duration_s, "exit after this many seconds (0: until signalled)");
  mock_cmd->add_flag("--no-dot", mock_args.no_dot, "do not open a DoT listener");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (*scan_cmd) return run_scan_cmd(scan_args);
    if (*verify_cmd) return run_verify(verify_args);
    if (*enrich_cmd) return run_enrich(enrich_args);
    if (*catalog_cmd) return run_catalog(catalog_args);
    if (*analyze_cmd) return run_analyze(analyze_args);
    if (*stats_cmd) return run_stats(stats_args);
    if (*report_cmd) return run_report(report_args);
    if (*mock_cmd) return run_mock(mock_args);
  } catch (const ValidationError& e) {
    std::cerr << "encdns: " << e.what() << '\n';
    return kExitInput;
  } catch (const ParseError& e) {
    std::cerr << "encdns: " << e.what() << '\n';
    return kExitInput;
  } catch (const IoError& e) {
    std::cerr << "encdns: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "encdns: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInput;
}
