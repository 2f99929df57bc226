#include "ccn/evidence/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ccn/data/domain_vocab.hpp"
#include "ccn/errors.hpp"
#include "ccn/evidence/text.hpp"

namespace ccn {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

CrawlRecord crawl_record_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ValidationError("crawl record must be a JSON object");
  const std::string id = j.contains("id") && j.at("id").is_string() ? j.at("id").get<std::string>() : "?";
  auto fail = [&](const std::string& field, const std::string& why) -> ValidationError {
    return ValidationError("crawl record '" + id + "': field '" + field + "' " + why);
  };
  static const std::vector<std::string> known{"id",           "query_image_id", "query_image_url", "query_caption",
                                              "query_page_url", "query_domain", "label",           "split",
                                              "query_image_hash", "inverse_search", "image_search", "pages",
                                              "image_hashes", "image_ids"};
  for (const auto& [key, v] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw fail(key, "is unknown");
  }
  auto str = [&](const char* key, bool required) {
    if (!j.contains(key)) {
      if (required) throw fail(key, "is required");
      return std::string();
    }
    if (!j.at(key).is_string()) throw fail(key, "must be a string");
    return j.at(key).get<std::string>();
  };

  CrawlRecord c;
  c.id = str("id", true);
  c.query_image_id = str("query_image_id", true);
  c.query_image_url = str("query_image_url", true);
  c.query_caption = str("query_caption", true);
  const std::string page_url = str("query_page_url", false);
  c.query_domain = page_url.empty() ? fold_case(str("query_domain", false)) : registrable_domain(page_url);
  try {
    if (j.contains("label")) c.label = parse_label(str("label", false));
    if (j.contains("split")) c.split = parse_split(str("split", false));
    if (j.contains("query_image_hash")) c.query_image_hash = PerceptualHash::from_hex(str("query_image_hash", false));
    if (j.contains("inverse_search")) c.inverse_search = parse_inverse_search(j.at("inverse_search"));
    if (j.contains("image_search")) c.image_search = parse_image_search(j.at("image_search"));
  } catch (const Error& e) {
    throw ValidationError("crawl record '" + id + "': " + e.what());
  }
  if (j.contains("pages")) {
    if (!j.at("pages").is_array()) throw fail("pages", "must be an array");
    for (const auto& p : j.at("pages")) {
      if (!p.is_object() || !p.contains("url") || !p.at("url").is_string()) throw fail("pages", "entries need a url");
      std::string html;
      if (p.contains("html") && p.at("html").is_string()) {
        html = p.at("html").get<std::string>();
      } else if (p.contains("html_file") && p.at("html_file").is_string()) {
        html = read_file(base_dir / p.at("html_file").get<std::string>());
      } else {
        throw fail("pages", "entries need html or html_file");
      }
      c.pages.push_back(PageDocument::from_html(p.at("url").get<std::string>(), std::move(html),
                                                p.value("fetched_at", std::string())));
    }
  }
  for (const char* key : {"image_hashes", "image_ids"}) {
    if (!j.contains(key)) continue;
    if (!j.at(key).is_object()) throw fail(key, "must be an object");
    for (const auto& [url, v] : j.at(key).items()) {
      if (!v.is_string()) throw fail(key, "values must be strings");
      if (std::string(key) == "image_ids") {
        c.image_ids[url] = v.get<std::string>();
      } else {
        try {
          c.image_hashes[url] = PerceptualHash::from_hex(v.get<std::string>());
        } catch (const FormatError& e) {
          throw fail(key, e.what());
        }
      }
    }
  }
  return c;
}

std::vector<CrawlRecord> load_crawl(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<CrawlRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
    out.push_back(crawl_record_from_json(j, path.parent_path()));
  }
  return out;
}

IngestStats& IngestStats::operator+=(const IngestStats& o) {
  pages += o.pages;
  pages_missing += o.pages_missing;
  pages_dropped_language += o.pages_dropped_language;
  pages_image_not_found += o.pages_image_not_found;
  sentences += o.sentences;
  evidence_images += o.evidence_images;
  return *this;
}

json to_json(const IngestStats& s) {
  return {{"pages", s.pages},
          {"pages_missing", s.pages_missing},
          {"pages_dropped_language", s.pages_dropped_language},
          {"pages_image_not_found", s.pages_image_not_found},
          {"sentences", s.sentences},
          {"evidence_images", s.evidence_images}};
}

ExampleRecord ingest_record(const CrawlRecord& crawl, const LanguageIdentifier& identifier, IngestStats* stats) {
  IngestStats s;
  ExampleRecord ex;
  ex.id = crawl.id;
  ex.query_image_id = crawl.query_image_id;
  ex.query_caption = crawl.query_caption;
  ex.query_domain = crawl.query_domain;
  ex.label = crawl.label;
  ex.split = crawl.split;

  std::vector<std::string> seen_entities;
  for (const auto& e : crawl.inverse_search.entities) {
    const std::string norm = fold_case(collapse_whitespace(e));
    if (norm.empty() || std::find(seen_entities.begin(), seen_entities.end(), norm) != seen_entities.end()) continue;
    seen_entities.push_back(norm);
    ex.entities.push_back(collapse_whitespace(e));
  }

  std::vector<std::string> seen;
  for (const auto& hit : crawl.inverse_search.pages) {
    ++s.pages;
    const auto page = std::find_if(crawl.pages.begin(), crawl.pages.end(),
                                   [&](const PageDocument& p) { return p.url == hit.page_url; });
    if (page == crawl.pages.end()) {
      ++s.pages_missing;
      continue;
    }
    if (language_gate(page->title, identifier) == GateDecision::drop) {
      ++s.pages_dropped_language;
      continue;
    }
    const auto found = extract_captions(*page, hit.image_url, crawl.query_image_hash, crawl.image_hashes);
    if (found.empty() || found.front().image_matched_by == MatchedBy::none) ++s.pages_image_not_found;
    for (const auto& sentence : found) {
      const std::string norm = normalize_caption(sentence.text);
      if (std::find(seen.begin(), seen.end(), norm) != seen.end()) continue;
      seen.push_back(norm);
      ex.sentences.push_back(sentence);
    }
  }

  for (const auto& img : crawl.image_search.images) {
    const auto it = crawl.image_ids.find(img.image_url);
    ex.evidence_images.push_back({it == crawl.image_ids.end() ? img.image_url : it->second,
                                  registrable_domain(img.page_domain), ImageSource::direct_image_search});
  }
  s.sentences = ex.sentences.size();
  s.evidence_images = ex.evidence_images.size();
  if (stats) *stats += s;
  return ex;
}

std::map<std::string, PerceptualHash> crawl_image_hashes(const CrawlRecord& crawl) {
  std::map<std::string, PerceptualHash> out;
  if (crawl.query_image_hash) out[crawl.query_image_id] = *crawl.query_image_hash;
  for (const auto& [url, h] : crawl.image_hashes) {
    const auto it = crawl.image_ids.find(url);
    out[it == crawl.image_ids.end() ? url : it->second] = h;
  }
  return out;
}

}  // namespace ccn
