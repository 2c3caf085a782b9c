// pybind11 bindings. Plain Python types (bytes, dict, list) cross the
// boundary; library errors map onto the exception classes defined here.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <memory>

#include "encdns/dns_codec.hpp"
#include "encdns/errors.hpp"
#include "encdns/flow.hpp"
#include "encdns/mock_resolver.hpp"
#include "encdns/report.hpp"
#include "encdns/resolver_intel.hpp"
#include "encdns/scan.hpp"
#include "encdns/trend_stats.hpp"

namespace py = pybind11;
using namespace encdns;

namespace {

dns::Bytes to_bytes(const py::bytes& b) {
  std::string s = b;
  return dns::Bytes(s.begin(), s.end());
}

py::bytes from_bytes(const dns::Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

py::dict message_dict(const dns::DnsMessage& m) {
  py::dict d;
  d["id"] = m.id;
  d["qr"] = m.qr;
  d["rd"] = m.rd;
  d["ra"] = m.ra;
  d["rcode"] = m.rcode;
  py::list qs;
  for (const auto& q : m.questions) qs.append(py::make_tuple(q.qname, q.qtype, q.qclass));
  d["questions"] = qs;
  py::list as;
  for (const auto& a : m.answers) {
    py::dict r;
    r["name"] = a.name;
    r["type"] = a.rtype;
    r["ttl"] = a.ttl;
    r["address"] = a.address_text() ? py::cast(*a.address_text()) : py::none();
    r["rdata"] = from_bytes(a.rdata);
    as.append(r);
  }
  d["answers"] = as;
  return d;
}

py::dict matrix_dict(const probe::VerificationMatrix& m) {
  py::dict d;
  for (std::size_t i = 0; i < 6; ++i) d[py::str(std::string(probe::kMethodLabels[i]))] = m.methods[i].success;
  return d;
}

py::dict adf_dict(const stats::AdfResult& r) {
  py::dict d;
  d["statistic"] = r.statistic;
  d["p_value"] = r.p_value;
  d["used_lag"] = r.used_lag;
  d["n_obs"] = r.n_obs;
  d["max_lag"] = r.max_lag;
  d["aic"] = r.aic;
  d["conclusion"] = std::string(stats::to_string(r.verdict));
  return d;
}

py::dict daily_dict(const flow::DailyCounts& c) {
  py::dict d;
  d["date"] = flow::format_date(c.date);
  d["doh"] = c.doh;
  d["dot"] = c.dot;
  d["doq"] = c.doq;
  d["dns"] = c.dns;
  d["total"] = c.total;
  d["tls_established"] = c.tls_established;
  d["port443"] = c.port443;
  d["unique_src_ips"] = c.unique_src_ips;
  return d;
}

probe::ProbeTarget make_target(const std::string& ip, int port, std::optional<std::string> sni) {
  probe::ProbeTarget t;
  t.ip = net::IpAddress::parse(ip);
  if (port < 1 || port > 65535) throw ValidationError("port out of range");
  t.port = static_cast<std::uint16_t>(port);
  t.sni = std::move(sni);
  t.validate();
  return t;
}

// Loopback resolver owned by Python; stops when closed or collected.
class PyMock {
 public:
  explicit PyMock(unsigned mask) {
    if (mask > 0x3F) throw ValidationError("mask must be in 0..0x3f");
    mock_ = std::make_unique<mock::MockResolver>(mock::MockConfig::from_mask(static_cast<std::uint8_t>(mask)));
  }
  int port() const { return mock_->endpoint().doh_port; }
  int dot_port() const { return mock_->endpoint().dot_port; }
  std::string address() const { return mock_->endpoint().address; }
  std::size_t connections() const { return mock_->connection_log().size(); }
  void close() { mock_->stop(); }

 private:
  std::unique_ptr<mock::MockResolver> mock_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "DoH probing, resolver grouping, flow classification and ADF statistics";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());

  m.attr("METHOD_LABELS") = [] {
    py::list l;
    for (auto s : probe::kMethodLabels) l.append(std::string(s));
    return l;
  }();

  m.def(
      "encode_query",
      [](const std::string& name, std::uint16_t qtype, std::uint16_t id, bool rd) {
        return from_bytes(dns::encode_query({name, qtype}, id, rd));
      },
      py::arg("name"), py::arg("qtype") = dns::rrtype::A, py::arg("id") = 0, py::arg("rd") = true);
  m.def("decode_message", [](const py::bytes& wire) { return message_dict(dns::decode_message(to_bytes(wire))); });
  m.def("to_base64url", [](const py::bytes& b) { return dns::to_base64url(to_bytes(b)); });
  m.def("from_base64url", [](const std::string& s) { return from_bytes(dns::from_base64url(s)); });
  m.def("from_hex_dump", [](const std::string& s) { return from_bytes(dns::from_hex_dump(s)); });

  m.def(
      "verify_endpoint",
      [](const std::string& ip, int port, std::optional<std::string> sni, int timeout_ms, int retries,
         bool strict_tls, const std::string& ca_file) {
        auto t = make_target(ip, port, std::move(sni));
        probe::ProbeOptions o;
        o.strict_tls = strict_tls;
        o.ca_file = ca_file;
        py::gil_scoped_release release;
        auto matrix = probe::verify_endpoint(t, probe::Millis{timeout_ms}, retries, o);
        py::gil_scoped_acquire acquire;
        return matrix_dict(matrix);
      },
      py::arg("ip"), py::arg("port") = 443, py::arg("sni") = py::none(), py::arg("timeout_ms") = 3000,
      py::arg("retries") = 1, py::arg("strict_tls") = false, py::arg("ca_file") = "");

  py::class_<PyMock>(m, "MockResolver")
      .def(py::init<unsigned>(), py::arg("mask") = 0x3F)
      .def_property_readonly("port", &PyMock::port)
      .def_property_readonly("dot_port", &PyMock::dot_port)
      .def_property_readonly("address", &PyMock::address)
      .def_property_readonly("connections", &PyMock::connections)
      .def("close", &PyMock::close)
      .def("__enter__", [](PyMock& self) -> PyMock& { return self; }, py::return_value_policy::reference)
      .def("__exit__", [](PyMock& self, py::args) { self.close(); });

  m.def(
      "partition_range",
      [](const std::string& range, int n) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& p : scan::partition_ranges(scan::AddressRange::parse(range), n))
          out.emplace_back(net::IpAddress::v4(p.first).to_string(), net::IpAddress::v4(p.last).to_string());
        return out;
      },
      py::arg("range"), py::arg("n"));

  m.def("format_percent", &report::format_percent, py::arg("count"), py::arg("total"));
  m.def("extract_sld", [](const std::string& h) { return intel::extract_sld(h); });
  m.def(
      "select_hostname",
      [](std::optional<std::string> ptr, std::vector<std::string> passive) {
        return intel::select_hostname(ptr, passive);
      },
      py::arg("ptr"), py::arg("passive") = std::vector<std::string>{});
  m.def("grouping_prefix", [](const std::string& ip) { return net::grouping_prefix(net::IpAddress::parse(ip)).to_string(); });
  m.def("catalog_summary", [](std::optional<std::string> path) {
    auto c = path ? intel::Catalog::load_csv(*path) : intel::Catalog::major_providers();
    auto s = intel::summarize_catalog(c);
    py::dict d;
    d["total"] = s.total;
    d["ipv4"] = s.ipv4_count;
    d["ipv6"] = s.ipv6_count;
    d["asn"] = s.unique_asn;
    d["domains"] = s.unique_domains;
    return d;
  }, py::arg("path") = py::none());

  m.def(
      "analyze_flows",
      [](const std::string& path, std::vector<std::string> official, std::vector<std::string> local) {
        auto cfg = flow::ClassifierConfig::defaults();
        for (const auto& s : official) cfg.official_resolvers.insert(net::IpAddress::parse(s));
        for (const auto& s : local) cfg.local_prefixes.push_back(net::Cidr::parse(s));
        auto days = flow::aggregate_daily(flow::load_flow_csv(path), cfg);
        py::list out;
        for (const auto& d : days) out.append(daily_dict(d));
        return out;
      },
      py::arg("path"), py::arg("official") = std::vector<std::string>{}, py::arg("local") = std::vector<std::string>{});
  m.def("ratio_per_million", &flow::ratio_per_million, py::arg("part"), py::arg("whole"));

  m.def(
      "adf_test",
      [](const std::vector<double>& values, std::optional<std::size_t> max_lag, double alpha) {
        return adf_dict(stats::adf_test(values, max_lag, alpha));
      },
      py::arg("values"), py::arg("max_lag") = py::none(), py::arg("alpha") = stats::kDefaultAlpha);
  m.def("mackinnon_p", &stats::mackinnon_p, py::arg("statistic"));
  m.def("default_max_lag", &stats::default_max_lag, py::arg("n"));
  m.def("mean_std", [](const std::vector<double>& v) {
    auto r = stats::mean_std(v);
    return py::make_tuple(r.mean, r.std);
  });
}
