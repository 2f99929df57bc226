#include "ccn/evidence/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "ccn/errors.hpp"

namespace ccn {

using nlohmann::json;

namespace {

std::string string_field(const json& obj, const char* key, const char* what) {
  if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_string()) {
    throw FormatError(std::string(what) + ": every result needs a string '" + key + "'");
  }
  return obj.at(key).get<std::string>();
}

const json& array_field(const json& j, const char* key, const char* what) {
  static const json empty = json::array();
  if (!j.is_object()) throw FormatError(std::string(what) + ": response must be a JSON object");
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_array()) throw FormatError(std::string(what) + ": '" + key + "' must be an array");
  return j.at(key);
}

std::string timestamp_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

InverseSearchResult parse_inverse_search(const json& j) {
  InverseSearchResult r;
  for (const auto& e : array_field(j, "entities", "inverse image search")) {
    if (!e.is_string()) throw FormatError("inverse image search: entities must be strings");
    r.entities.push_back(e.get<std::string>());
  }
  for (const auto& p : array_field(j, "pages", "inverse image search")) {
    if (r.pages.size() == kMaxInverseSearchResults) break;
    r.pages.push_back({string_field(p, "page_url", "inverse image search"),
                       string_field(p, "image_url", "inverse image search")});
  }
  return r;
}

ImageSearchResult parse_image_search(const json& j) {
  ImageSearchResult r;
  for (const auto& i : array_field(j, "images", "image search")) {
    if (r.images.size() == kMaxImageSearchResults) break;
    r.images.push_back({string_field(i, "image_url", "image search"), string_field(i, "page_domain", "image search")});
  }
  return r;
}

json to_json(const InverseSearchResult& r) {
  json pages = json::array();
  for (const auto& p : r.pages) pages.push_back({{"page_url", p.page_url}, {"image_url", p.image_url}});
  return {{"entities", r.entities}, {"pages", pages}};
}

json to_json(const ImageSearchResult& r) {
  json images = json::array();
  for (const auto& i : r.images) images.push_back({{"image_url", i.image_url}, {"page_domain", i.page_domain}});
  return {{"images", images}};
}

std::string url_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 15];
    }
  }
  return out;
}

std::string url_host(std::string_view url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string_view::npos) return "";
  std::string_view rest = url.substr(scheme + 3);
  rest = rest.substr(0, rest.find_first_of("/?#"));
  if (const std::size_t at = rest.rfind('@'); at != std::string_view::npos) rest = rest.substr(at + 1);
  if (!rest.empty() && rest[0] == '[') {
    rest = rest.substr(0, rest.find(']') + 1);
  } else {
    rest = rest.substr(0, rest.find(':'));
  }
  std::string host(rest);
  for (char& c : host) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return host;
}

json HttpSearchClient::request(const std::string& url) {
  const HttpResponse r = http_.get(url);
  if (r.status != 200) {
    throw IoError("search request failed (" + (r.status ? "HTTP " + std::to_string(r.status) : r.error) + "): " + url);
  }
  try {
    return json::parse(r.body);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("search response is not JSON: ") + e.what());
  }
}

InverseSearchResult HttpSearchClient::inverse_image_search(const std::string& image_url) {
  const char sep = inverse_.find('?') == std::string::npos ? '?' : '&';
  return parse_inverse_search(request(inverse_ + sep + "image_url=" + url_encode(image_url)));
}

ImageSearchResult HttpSearchClient::image_search(const std::string& query) {
  const char sep = image_.find('?') == std::string::npos ? '?' : '&';
  return parse_image_search(request(image_ + sep + "q=" + url_encode(query)));
}

std::vector<FetchResult> fetch_pages(const std::vector<std::string>& urls, HttpClient& http,
                                     const FetchOptions& options) {
  std::vector<std::string> order = urls;
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  std::vector<FetchResult> results(order.size());

  std::map<std::string, std::unique_ptr<std::mutex>> host_locks;
  for (const auto& u : order) {
    auto& m = host_locks[url_host(u)];
    if (!m) m = std::make_unique<std::mutex>();
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < order.size(); i = next++) {
      FetchResult& r = results[i];
      r.url = order[i];
      std::lock_guard<std::mutex> lock(*host_locks.at(url_host(order[i])));
      try {
        const HttpResponse resp = http.get(order[i]);
        if (resp.status == 200) {
          r.page = PageDocument::from_html(order[i], resp.body, timestamp_now());
        } else {
          r.error = resp.status ? "HTTP " + std::to_string(resp.status) : resp.error;
        }
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(options.max_concurrency, order.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  return results;
}

}  // namespace ccn
