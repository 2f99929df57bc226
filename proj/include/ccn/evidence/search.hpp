#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ccn/evidence/html.hpp"

namespace ccn {

inline constexpr std::size_t kMaxImageSearchResults = 10;

struct PageHit {
  std::string page_url;
  std::string image_url;
};

struct InverseSearchResult {
  std::vector<std::string> entities;
  std::vector<PageHit> pages;  // at most kMaxInverseSearchResults
};

struct ImageHit {
  std::string image_url;
  std::string page_domain;
};

struct ImageSearchResult {
  std::vector<ImageHit> images;  // at most kMaxImageSearchResults
};

// Wire mapping: {"entities": [string], "pages": [{"page_url", "image_url"}]}
// and {"images": [{"image_url", "page_domain"}]}. Results beyond the caps are
// dropped. Throws FormatError on a malformed response.
InverseSearchResult parse_inverse_search(const nlohmann::json& j);
ImageSearchResult parse_image_search(const nlohmann::json& j);
nlohmann::json to_json(const InverseSearchResult& r);
nlohmann::json to_json(const ImageSearchResult& r);

class SearchClient {
 public:
  virtual ~SearchClient() = default;
  // Pages containing the image at `image_url`, plus detected entities.
  virtual InverseSearchResult inverse_image_search(const std::string& image_url) = 0;
  // Images found for a text query.
  virtual ImageSearchResult image_search(const std::string& query) = 0;
};

struct HttpResponse {
  int status = 0;  // 0 when the request failed before a response
  std::string body;
  std::string error;
};

class HttpClient {
 public:
  virtual ~HttpClient() = default;
  virtual HttpResponse get(const std::string& url) = 0;
};

/// Blocking HTTP(S) GET with connection and read timeouts.
class NetworkHttpClient final : public HttpClient {
 public:
  explicit NetworkHttpClient(std::chrono::milliseconds timeout = std::chrono::seconds(10)) : timeout_(timeout) {}
  HttpResponse get(const std::string& url) override;

 private:
  std::chrono::milliseconds timeout_;
};

/// SearchClient over HTTP GET endpoints that answer with the wire mapping
/// above: `{inverse}?image_url=...` and `{image}?q=...`.
class HttpSearchClient final : public SearchClient {
 public:
  HttpSearchClient(HttpClient& http, std::string inverse_endpoint, std::string image_endpoint)
      : http_(http), inverse_(std::move(inverse_endpoint)), image_(std::move(image_endpoint)) {}

  InverseSearchResult inverse_image_search(const std::string& image_url) override;
  ImageSearchResult image_search(const std::string& query) override;

 private:
  nlohmann::json request(const std::string& url);

  HttpClient& http_;
  std::string inverse_;
  std::string image_;
};

// Percent-encodes everything outside the unreserved set.
std::string url_encode(std::string_view s);
// Lowercased host of an absolute URL, "" when there is none.
std::string url_host(std::string_view url);

struct FetchOptions {
  std::size_t max_concurrency = 4;
};

struct FetchResult {
  std::string url;
  std::optional<PageDocument> page;
  std::string error;
};

// Fetches every URL with at most `max_concurrency` requests in flight and at
// most one per host. Results are returned in URL order.
std::vector<FetchResult> fetch_pages(const std::vector<std::string>& urls, HttpClient& http,
                                     const FetchOptions& options = {});

}  // namespace ccn
