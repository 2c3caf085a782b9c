// Bundled subset of the public-suffix list: multi-label suffixes under which
// registrations happen one level down. Single-label TLDs need no entry since
// the fallback (last two labels) already handles them.

#include <set>
#include <string>
#include <string_view>

#include "encdns/errors.hpp"
#include "encdns/resolver_intel.hpp"
#include "text_util.hpp"

namespace encdns::intel {
namespace {

const std::set<std::string, std::less<>>& suffixes() {
  static const std::set<std::string, std::less<>> table = {
      "ac.uk",  "co.uk",  "gov.uk", "ltd.uk", "me.uk",  "net.uk", "org.uk", "plc.uk", "sch.uk",
      "com.au", "net.au", "org.au", "edu.au", "gov.au", "id.au",
      "co.nz",  "net.nz", "org.nz", "ac.nz",
      "co.jp",  "ne.jp",  "or.jp",  "ac.jp",  "go.jp",  "gr.jp",
      "co.kr",  "ne.kr",  "or.kr",
      "com.br", "net.br", "org.br",
      "com.cn", "net.cn", "org.cn", "gov.cn", "edu.cn",
      "com.hk", "net.hk", "org.hk",
      "com.tw", "net.tw", "org.tw", "idv.tw",
      "com.sg", "net.sg", "org.sg",
      "com.my", "net.my",
      "co.in",  "net.in", "org.in", "firm.in",
      "co.id",  "net.id", "or.id",
      "co.il",  "org.il", "net.il",
      "co.za",  "org.za", "net.za",
      "com.mx", "net.mx", "org.mx",
      "com.ar", "net.ar", "org.ar",
      "com.tr", "net.tr", "org.tr",
      "com.ua", "net.ua", "org.ua",
      "com.pl", "net.pl", "org.pl",
      "com.ru", "net.ru", "org.ru",
      "co.at",  "or.at",
      "com.es", "org.es",
      "com.gr", "net.gr", "org.gr",
      "com.cy", "net.cy",
      "github.io", "gitlab.io", "herokuapp.com", "netlify.app", "pages.dev", "workers.dev",
      "duckdns.org", "dyndns.org", "no-ip.org", "ddns.net", "azurewebsites.net", "cloudfront.net",
  };
  return table;
}

}  // namespace

std::string extract_sld(std::string_view hostname) {
  std::string name = util::to_lower(util::trim(hostname));
  if (!name.empty() && name.back() == '.') name.pop_back();
  if (name.empty()) throw ValidationError("empty hostname");
  if (name.front() == '.' || name.find("..") != std::string::npos)
    throw ValidationError("malformed hostname: " + name);
  auto last_dot = name.rfind('.');
  if (last_dot == std::string::npos) throw ValidationError("single-label hostname: " + name);
  if (suffixes().count(name)) throw ValidationError("hostname is a public suffix: " + name);

  // Longest listed suffix wins; scan from the leftmost candidate.
  std::size_t pos = 0;
  std::size_t prev_label = std::string::npos;
  while (true) {
    std::string_view rest = std::string_view(name).substr(pos);
    if (suffixes().count(rest) && prev_label != std::string::npos) return name.substr(prev_label);
    auto dot = name.find('.', pos);
    if (dot == std::string::npos) break;
    prev_label = pos;
    pos = dot + 1;
  }
  auto second_dot = name.rfind('.', last_dot - 1);
  return second_dot == std::string::npos ? name : name.substr(second_dot + 1);
}

}  // namespace encdns::intel
