#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "ccn/evidence/search.hpp"

namespace ccn {

HttpResponse NetworkHttpClient::get(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) return {0, "", "not an absolute URL: " + url};
  const std::size_t path = url.find('/', scheme + 3);
  const std::string origin = url.substr(0, path);
  const std::string target = path == std::string::npos ? "/" : url.substr(path);
  httplib::Client client(origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_follow_location(true);
  auto res = client.Get(target);
  if (!res) return {0, "", httplib::to_string(res.error())};
  return {res->status, res->body, ""};
}

}  // namespace ccn
