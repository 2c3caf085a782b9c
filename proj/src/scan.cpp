#include "encdns/scan.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "encdns/errors.hpp"
#include "text_util.hpp"

namespace encdns::scan {

using nlohmann::ordered_json;

void ScanConfig::validate() const {
  if (concurrency < 1) throw ValidationError("concurrency must be >= 1");
  if (!(rate_limit > 0)) throw ValidationError("rate limit must be > 0");
  if (retries < 0) throw ValidationError("retries must be >= 0");
  if (timeout.count() <= 0) throw ValidationError("timeout must be > 0");
}

bool ScanConfig::excluded(const net::IpAddress& ip) const {
  if (net::matches_any(ip, exclusions)) return true;
  return exclude_non_public && net::matches_any(ip, net::non_public_ranges());
}

AddressRange AddressRange::parse(std::string_view text) {
  text = util::trim(text);
  if (auto dash = text.find('-'); dash != std::string_view::npos) {
    auto a = net::IpAddress::parse(text.substr(0, dash));
    auto b = net::IpAddress::parse(text.substr(dash + 1));
    if (!a.is_v4() || !b.is_v4()) throw ValidationError("address ranges are IPv4 only");
    if (a.to_u32() > b.to_u32()) throw ValidationError("range start after end: " + std::string(text));
    return {a.to_u32(), b.to_u32()};
  }
  auto cidr = net::Cidr::parse(text);
  if (!cidr.network().is_v4()) throw ValidationError("address ranges are IPv4 only");
  std::uint32_t first = cidr.network().to_u32();
  std::uint64_t count = std::uint64_t{1} << (32 - cidr.prefix_len());
  return {first, static_cast<std::uint32_t>(first + count - 1)};
}

std::string AddressRange::to_string() const {
  return net::IpAddress::v4(first).to_string() + "-" + net::IpAddress::v4(last).to_string();
}

std::vector<RangePartition> partition_ranges(AddressRange range, int n, PartitionMode mode) {
  if (n < 1) throw ValidationError("worker count must be >= 1");
  if (range.first > range.last) throw ValidationError("empty range");
  std::uint64_t unit = 1;
  if (mode == PartitionMode::FirstOctet) {
    unit = std::uint64_t{1} << 24;
    if ((range.first & 0x00FFFFFFu) != 0 || (range.last & 0x00FFFFFFu) != 0x00FFFFFFu)
      throw ValidationError("first-octet partitioning needs a range of whole /8 blocks");
  }
  const std::uint64_t units = range.size() / unit;
  if (static_cast<std::uint64_t>(n) > units)
    throw ValidationError("worker count " + std::to_string(n) + " exceeds range size " + std::to_string(units));
  const std::uint64_t base = units / static_cast<std::uint64_t>(n);
  const std::uint64_t extra = units % static_cast<std::uint64_t>(n);
  std::vector<RangePartition> out;
  std::uint64_t cursor = range.first;
  for (int i = 0; i < n; ++i) {
    std::uint64_t len = (base + (static_cast<std::uint64_t>(i) < extra ? 1 : 0)) * unit;
    out.push_back({i, static_cast<std::uint32_t>(cursor), static_cast<std::uint32_t>(cursor + len - 1)});
    cursor += len;
  }
  return out;
}

std::vector<RangePartition> partition_by_octet_ends(const std::vector<int>& ends) {
  if (ends.empty() || ends.back() != 255) throw ValidationError("octet end points must finish at 255");
  std::vector<RangePartition> out;
  int start = 0;
  for (std::size_t i = 0; i < ends.size(); ++i) {
    if (ends[i] < start || ends[i] > 255) throw ValidationError("octet end points must increase within 0-255");
    out.push_back({static_cast<int>(i), static_cast<std::uint32_t>(start) << 24,
                   (static_cast<std::uint32_t>(ends[i]) << 24) | 0x00FFFFFFu});
    start = ends[i] + 1;
  }
  return out;
}

std::vector<probe::ProbeTarget> ingest_targets(std::istream& in, const ScanConfig& config,
                                               std::uint16_t default_port) {
  std::vector<probe::ProbeTarget> out;
  std::set<std::pair<net::IpAddress, std::uint16_t>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = util::trim(util::strip_comment(line));
    if (body.empty()) continue;
    probe::ProbeTarget t;
    t.port = default_port;
    auto comma = body.find(',');
    auto ip = net::IpAddress::try_parse(body.substr(0, comma));
    if (!ip) throw ParseError("unparseable target '" + std::string(body) + "'", line_no);
    t.ip = *ip;
    if (comma != std::string_view::npos) {
      auto port = util::parse_int(body.substr(comma + 1));
      if (!port || *port < 1 || *port > 65535)
        throw ParseError("bad port in '" + std::string(body) + "'", line_no);
      t.port = static_cast<std::uint16_t>(*port);
    }
    if (config.excluded(t.ip)) continue;
    if (!seen.emplace(t.ip, t.port).second) continue;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<probe::ProbeTarget> ingest_targets(const std::string& path, const ScanConfig& config,
                                               std::uint16_t default_port) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return ingest_targets(in, config, default_port);
}

std::string to_json_line(const ScanResult& r) {
  ordered_json j;
  j["index"] = r.index;
  j["ip"] = r.target.ip.to_string();
  j["port"] = r.target.port;
  if (r.target.sni) j["sni"] = *r.target.sni;
  for (std::size_t i = 0; i < 6; ++i) j[std::string(probe::kMethodLabels[i])] = r.matrix.methods[i].success;
  j["excluded"] = r.excluded;
  ordered_json details = ordered_json::object();
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& d = r.matrix.methods[i];
    ordered_json e;
    e["status"] = d.http_status;
    e["latency_ms"] = std::round(d.latency_ms * 1000.0) / 1000.0;
    e["reason"] = std::string(probe::describe(d.reason));
    e["attempts"] = d.attempts;
    if (!d.message.empty()) e["message"] = d.message;
    if (!d.answers.empty()) e["answers"] = d.answers;
    if (d.certificate_valid) e["certificate_valid"] = *d.certificate_valid;
    details[std::string(probe::kMethodLabels[i])] = std::move(e);
  }
  j["details"] = std::move(details);
  return j.dump();
}

ScanResult parse_json_line(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("result line is not a JSON object", 0);
  ScanResult r;
  try {
    r.index = j.value("index", std::size_t{0});
    r.target.ip = net::IpAddress::parse(j.at("ip").get<std::string>());
    r.target.port = j.value("port", probe::kDohPort);
    if (j.contains("sni")) r.target.sni = j["sni"].get<std::string>();
    r.excluded = j.value("excluded", false);
    for (std::size_t i = 0; i < 6; ++i) {
      auto& d = r.matrix.methods[i];
      std::string label(probe::kMethodLabels[i]);
      d.success = j.at(label).get<bool>();
      if (auto det = j.find("details"); det != j.end() && det->contains(label)) {
        const auto& e = (*det)[label];
        d.http_status = e.value("status", 0);
        d.latency_ms = e.value("latency_ms", 0.0);
        d.attempts = e.value("attempts", 0);
        d.message = e.value("message", std::string{});
        if (e.contains("answers")) d.answers = e["answers"].get<std::vector<std::string>>();
        auto reason = e.value("reason", std::string{});
        for (int k = 0; k <= static_cast<int>(probe::FailureReason::TransportError); ++k)
          if (probe::describe(static_cast<probe::FailureReason>(k)) == reason) d.reason = static_cast<probe::FailureReason>(k);
        if (e.contains("certificate_valid")) d.certificate_valid = e["certificate_valid"].get<bool>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad result record: ") + e.what(), 0);
  } catch (const ValidationError& e) {
    throw ParseError(std::string("bad result record: ") + e.what(), 0);
  }
  return r;
}

std::vector<ScanResult> load_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<ScanResult> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    try {
      out.push_back(parse_json_line(line));
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what(), line_no);
    }
  }
  return out;
}

void JsonlSink::write(const ScanResult& result) {
  auto line = to_json_line(result);
  std::lock_guard lock(mutex_);
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw IoError("result sink write failed");
}

void CallbackSink::write(const ScanResult& result) {
  std::lock_guard lock(mutex_);
  fn_(result);
}

Checkpoint Checkpoint::load(const std::string& path) {
  Checkpoint c;
  std::ifstream in(path);
  if (!in) return c;
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("corrupt checkpoint " + path, 0);
  if (j.contains("completed_through") && !j["completed_through"].is_null())
    c.completed_through = j["completed_through"].get<std::size_t>();
  return c;
}

void Checkpoint::save(const std::string& path) const {
  nlohmann::json j;
  j["completed_through"] = completed_through ? nlohmann::json(*completed_through) : nlohmann::json(nullptr);
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << j.dump() << '\n';
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot replace " + path);
}

bool spans_multiple_networks(const std::vector<probe::ProbeTarget>& targets) {
  std::set<net::Cidr> nets;
  for (const auto& t : targets) {
    nets.insert(net::grouping_prefix(t.ip));
    if (nets.size() > 1) return true;
  }
  return false;
}

ScanSummary run_scan(const std::vector<probe::ProbeTarget>& targets, const ScanConfig& config, ResultSink& sink,
                     const RunOptions& options) {
  config.validate();
  if (!config.consent && spans_multiple_networks(targets))
    throw ValidationError("targets span more than one /24; scanning them requires explicit consent");

  probe::RateLimiter limiter(config.rate_limit);
  probe::ProbeOptions probe_options = config.probe_options;
  probe_options.limiter = &limiter;
  Verifier verify = options.verifier ? options.verifier
                                     : Verifier([&](const probe::ProbeTarget& t, const ScanConfig& c) {
                                         return probe::verify_endpoint(t, c.timeout, c.retries, probe_options);
                                       });

  ScanSummary summary;
  summary.targets = targets.size();
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  std::mutex state_mutex;
  std::vector<char> done(targets.size(), 0);
  std::size_t watermark = 0;  // number of leading indices known complete
  std::size_t since_checkpoint = 0;
  Checkpoint checkpoint;
  if (options.resume_after) {
    std::size_t upto = std::min(*options.resume_after + 1, targets.size());
    std::fill(done.begin(), done.begin() + static_cast<std::ptrdiff_t>(upto), 1);
    watermark = upto;
    summary.skipped_resumed = upto;
  }

  auto record_done = [&](std::size_t index, const ScanResult& r) {
    std::lock_guard lock(state_mutex);
    done[index] = 1;
    if (r.excluded)
      ++summary.skipped_excluded;
    else
      ++summary.probed;
    if (r.matrix.any()) ++summary.with_any_method;
    while (watermark < done.size() && done[watermark]) ++watermark;
    if (!options.checkpoint_path.empty() && ++since_checkpoint >= config.checkpoint_every) {
      since_checkpoint = 0;
      if (watermark > 0) checkpoint.completed_through = watermark - 1;
      checkpoint.save(options.checkpoint_path);
    }
  };

  auto worker = [&] {
    while (!abort.load()) {
      std::size_t i = next.fetch_add(1);
      if (i >= targets.size()) return;
      if (options.resume_after && i <= *options.resume_after) continue;
      ScanResult r;
      r.index = i;
      r.target = targets[i];
      try {
        if (config.excluded(r.target.ip)) {
          r.excluded = true;
          for (auto& m : r.matrix.methods) m.reason = probe::FailureReason::Excluded;
        } else {
          r.matrix = verify(r.target, config);
        }
        sink.write(r);
        record_done(i, r);
      } catch (...) {
        std::lock_guard lock(state_mutex);
        if (!failure) failure = std::current_exception();
        abort.store(true);
        return;
      }
    }
  };

  std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(config.concurrency), targets.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  if (!options.checkpoint_path.empty()) {
    if (watermark > 0) checkpoint.completed_through = watermark - 1;
    checkpoint.save(options.checkpoint_path);
  }
  return summary;
}

}  // namespace encdns::scan
