#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ccn/evidence/filter.hpp"
#include "ccn/evidence/search.hpp"

namespace ccn {

/// Raw crawl output for one claim: the search responses, the fetched pages
/// and the hashes of every downloaded image.
///
/// JSON form (one object per line):
///   id, query_image_id, query_image_url, query_caption : string
///   query_page_url | query_domain                        : string, optional
///   label, split                                         : optional
///   query_image_hash                                     : 16 hex digits, optional
///   inverse_search : {"entities": [...], "pages": [{"page_url", "image_url"}]}
///   image_search   : {"images": [{"image_url", "page_domain"}]}
///   pages          : [{"url", "html" | "html_file", "fetched_at"?}]
///   image_hashes   : {image url: 16 hex digits}
///   image_ids      : {image url: image id}, optional (default: the URL)
/// html_file paths are relative to the crawl file's directory.
struct CrawlRecord {
  std::string id;
  std::string query_image_id;
  std::string query_image_url;
  std::string query_caption;
  std::string query_domain;
  std::optional<Label> label;
  Split split = Split::train;
  std::optional<PerceptualHash> query_image_hash;
  InverseSearchResult inverse_search;
  ImageSearchResult image_search;
  std::vector<PageDocument> pages;
  std::map<std::string, PerceptualHash> image_hashes;
  std::map<std::string, std::string> image_ids;
};

// Throws ValidationError naming the record and field.
CrawlRecord crawl_record_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
std::vector<CrawlRecord> load_crawl(const std::filesystem::path& path);

struct IngestStats {
  std::size_t pages = 0;
  std::size_t pages_missing = 0;
  std::size_t pages_dropped_language = 0;
  std::size_t pages_image_not_found = 0;
  std::size_t sentences = 0;
  std::size_t evidence_images = 0;

  IngestStats& operator+=(const IngestStats& o);
};

nlohmann::json to_json(const IngestStats& s);

// Textual evidence from every inverse-search page that survives the language
// gate (captions and title, deduplicated across pages), entities from the
// inverse search, and visual evidence from the image search.
ExampleRecord ingest_record(const CrawlRecord& crawl, const LanguageIdentifier& identifier,
                            IngestStats* stats = nullptr);

// Hashes of the query and evidence images of a crawl keyed by image id.
std::map<std::string, PerceptualHash> crawl_image_hashes(const CrawlRecord& crawl);

/// Accepts every title.
class AcceptAllLanguages final : public LanguageIdentifier {
 public:
  bool is_english(std::string_view) const override { return true; }
};

}  // namespace ccn
