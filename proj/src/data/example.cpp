#include "ccn/data/example.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ccn/errors.hpp"

namespace ccn {

using nlohmann::json;

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& table,
             std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  throw ValidationError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, Label>, 2> kLabels{
    {{"pristine", Label::pristine}, {"falsified", Label::falsified}}};
constexpr std::array<std::pair<std::string_view, Split>, 3> kSplits{
    {{"train", Split::train}, {"val", Split::val}, {"test", Split::test}}};
constexpr std::array<std::pair<std::string_view, SentenceKind>, 2> kKinds{
    {{"caption", SentenceKind::caption}, {"title", SentenceKind::title}}};
constexpr std::array<std::pair<std::string_view, MatchedBy>, 3> kMatched{
    {{"url", MatchedBy::url}, {"perceptual_hash", MatchedBy::perceptual_hash}, {"none", MatchedBy::none}}};
constexpr std::array<std::pair<std::string_view, ImageSource>, 2> kSources{
    {{"inverse_search_page", ImageSource::inverse_search_page},
     {"direct_image_search", ImageSource::direct_image_search}}};

template <typename E, std::size_t N>
std::string_view enum_name(E v, const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, value] : table) {
    if (value == v) return name;
  }
  return "?";
}

// Field access that reports the record id and the field path on failure.
class Reader {
 public:
  Reader(const json& obj, std::string record_id, std::string path)
      : obj_(obj), id_(std::move(record_id)), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_, "expected an object");
  }

  void allow_only(std::initializer_list<std::string_view> fields) const {
    for (const auto& [key, _] : obj_.items()) {
      bool known = false;
      for (auto f : fields) known = known || f == key;
      if (!known) fail(field_path(key), "unknown field");
    }
  }

  bool has(std::string_view field) const { return obj_.contains(std::string(field)); }

  std::string string(std::string_view field, bool required = true) const {
    auto it = obj_.find(std::string(field));
    if (it == obj_.end()) {
      if (required) fail(field_path(field), "missing required field");
      return {};
    }
    if (!it->is_string()) fail(field_path(field), "expected a string");
    return it->get<std::string>();
  }

  const json& array(std::string_view field) const {
    auto it = obj_.find(std::string(field));
    if (it == obj_.end()) fail(field_path(field), "missing required field");
    if (!it->is_array()) fail(field_path(field), "expected an array");
    return *it;
  }

  std::string field_path(std::string_view field) const {
    return path_.empty() ? std::string(field) : path_ + "." + std::string(field);
  }

  [[noreturn]] void fail(const std::string& field, const std::string& msg) const {
    throw ValidationError("record '" + id_ + "' field '" + field + "': " + msg);
  }

  template <typename F>
  auto convert(const std::string& field, F&& f) const {
    try {
      return f();
    } catch (const ValidationError& e) {
      if (std::string(e.what()).rfind("record '", 0) == 0) throw;
      fail(field, e.what());
    }
  }

  const std::string& id() const { return id_; }

 private:
  const json& obj_;
  std::string id_;
  std::string path_;
};

void require_lowercase(const Reader& r, const std::string& field, const std::string& s) {
  for (char c : s) {
    if (c >= 'A' && c <= 'Z') r.fail(field, "domain must be lowercase");
  }
}

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string::npos;
}

}  // namespace

std::string_view to_string(Label v) { return enum_name(v, kLabels); }
std::string_view to_string(Split v) { return enum_name(v, kSplits); }
std::string_view to_string(SentenceKind v) { return enum_name(v, kKinds); }
std::string_view to_string(MatchedBy v) { return enum_name(v, kMatched); }
std::string_view to_string(ImageSource v) { return enum_name(v, kSources); }
Label parse_label(std::string_view s) { return parse_enum(s, kLabels, "label"); }
Split parse_split(std::string_view s) { return parse_enum(s, kSplits, "split"); }
SentenceKind parse_sentence_kind(std::string_view s) { return parse_enum(s, kKinds, "sentence kind"); }
MatchedBy parse_matched_by(std::string_view s) { return parse_enum(s, kMatched, "match method"); }
ImageSource parse_image_source(std::string_view s) { return parse_enum(s, kSources, "image source"); }

std::string caption_key(const ExampleRecord& ex) { return ex.id + "#q"; }
std::string sentence_key(const ExampleRecord& ex, std::size_t j) {
  return ex.id + "#s" + std::to_string(j);
}
std::string entity_key(const ExampleRecord& ex, std::size_t j) {
  return ex.id + "#e" + std::to_string(j);
}

json to_json(const ExampleRecord& ex) {
  json images = json::array();
  for (const auto& im : ex.evidence_images) {
    images.push_back({{"image_id", im.image_id},
                      {"domain", im.domain},
                      {"source", std::string(to_string(im.source))}});
  }
  json sentences = json::array();
  for (const auto& s : ex.sentences) {
    sentences.push_back({{"text", s.text},
                         {"kind", std::string(to_string(s.kind))},
                         {"domain", s.domain},
                         {"source_page_url", s.source_page_url},
                         {"image_matched_by", std::string(to_string(s.image_matched_by))}});
  }
  json j = {{"id", ex.id},
            {"query_image_id", ex.query_image_id},
            {"query_caption", ex.query_caption},
            {"evidence_images", images},
            {"entities", ex.entities},
            {"sentences", sentences},
            {"split", std::string(to_string(ex.split))}};
  if (!ex.query_domain.empty()) j["query_domain"] = ex.query_domain;
  if (ex.label) j["label"] = std::string(to_string(*ex.label));
  return j;
}

ExampleRecord example_from_json(const json& j, bool require_label) {
  std::string id = "?";
  if (j.is_object() && j.contains("id") && j["id"].is_string()) id = j["id"].get<std::string>();
  const Reader r(j, id, "");
  r.allow_only({"id", "query_image_id", "query_caption", "query_domain", "evidence_images",
                "entities", "sentences", "label", "split"});
  ExampleRecord ex;
  ex.id = r.string("id");
  if (ex.id.empty()) r.fail("id", "must be non-empty");
  ex.query_image_id = r.string("query_image_id");
  ex.query_caption = r.string("query_caption");
  ex.query_domain = r.string("query_domain", false);
  require_lowercase(r, "query_domain", ex.query_domain);
  ex.split = r.convert("split", [&] { return parse_split(r.string("split")); });
  if (r.has("label")) {
    ex.label = r.convert("label", [&] { return parse_label(r.string("label")); });
  } else if (require_label) {
    r.fail("label", "missing label for " + std::string(to_string(ex.split)) + " record");
  }

  const json& images = r.array("evidence_images");
  if (images.size() > kMaxVisualEvidence) {
    r.fail("evidence_images", "more than " + std::to_string(kMaxVisualEvidence) + " items");
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Reader ir(images[i], id, "evidence_images[" + std::to_string(i) + "]");
    ir.allow_only({"image_id", "domain", "source"});
    EvidenceImageMeta im;
    im.image_id = ir.string("image_id");
    im.domain = ir.string("domain", false);
    require_lowercase(ir, ir.field_path("domain"), im.domain);
    if (ir.has("source")) {
      im.source = ir.convert(ir.field_path("source"),
                             [&] { return parse_image_source(ir.string("source")); });
    }
    ex.evidence_images.push_back(std::move(im));
  }

  const json& entities = r.array("entities");
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (!entities[i].is_string()) r.fail("entities[" + std::to_string(i) + "]", "expected a string");
    ex.entities.push_back(entities[i].get<std::string>());
  }

  const json& sentences = r.array("sentences");
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const Reader sr(sentences[i], id, "sentences[" + std::to_string(i) + "]");
    sr.allow_only({"text", "kind", "domain", "source_page_url", "image_matched_by"});
    SentenceEvidence s;
    s.text = sr.string("text");
    if (blank(s.text)) sr.fail(sr.field_path("text"), "must be non-empty after trimming");
    s.kind = sr.convert(sr.field_path("kind"), [&] { return parse_sentence_kind(sr.string("kind")); });
    s.domain = sr.string("domain", false);
    require_lowercase(sr, sr.field_path("domain"), s.domain);
    s.source_page_url = sr.string("source_page_url", false);
    if (sr.has("image_matched_by")) {
      s.image_matched_by = sr.convert(sr.field_path("image_matched_by"), [&] {
        return parse_matched_by(sr.string("image_matched_by"));
      });
    }
    ex.sentences.push_back(std::move(s));
  }
  return ex;
}

std::vector<ExampleRecord> parse_dataset(std::string_view text, bool require_labels) {
  std::vector<ExampleRecord> out;
  std::set<std::string> seen;
  auto add = [&](const json& j) {
    ExampleRecord ex = example_from_json(j, require_labels);
    if (!seen.insert(ex.id).second) {
      throw ValidationError("record '" + ex.id + "' field 'id': duplicate id");
    }
    out.push_back(std::move(ex));
  };

  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return out;
  if (text[first] == '[') {
    json arr;
    try {
      arr = json::parse(text);
    } catch (const json::parse_error& e) {
      throw FormatError(std::string("dataset is not valid JSON: ") + e.what());
    }
    for (const auto& j : arr) add(j);
    return out;
  }
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw FormatError("dataset line " + std::to_string(line_no) + ": " + e.what());
      }
      add(j);
    }
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

std::vector<ExampleRecord> load_dataset(const std::filesystem::path& path, bool require_labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), require_labels);
}

std::string dataset_to_string(const std::vector<ExampleRecord>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += to_json(ex).dump();
    out += '\n';
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<ExampleRecord>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset " + path.string());
  out << dataset_to_string(examples);
}

std::vector<ExampleRecord> filter_split(const std::vector<ExampleRecord>& examples, Split split) {
  std::vector<ExampleRecord> out;
  for (const auto& ex : examples) {
    if (ex.split == split) out.push_back(ex);
  }
  return out;
}

}  // namespace ccn
