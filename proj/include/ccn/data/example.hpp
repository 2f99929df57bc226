#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ccn {

enum class Label { pristine, falsified };
enum class Split { train, val, test };
enum class SentenceKind { caption, title };
enum class MatchedBy { url, perceptual_hash, none };
enum class ImageSource { inverse_search_page, direct_image_search };

std::string_view to_string(Label v);
std::string_view to_string(Split v);
std::string_view to_string(SentenceKind v);
std::string_view to_string(MatchedBy v);
std::string_view to_string(ImageSource v);
Label parse_label(std::string_view s);
Split parse_split(std::string_view s);
SentenceKind parse_sentence_kind(std::string_view s);
MatchedBy parse_matched_by(std::string_view s);
ImageSource parse_image_source(std::string_view s);

inline double label_value(Label l) { return l == Label::falsified ? 1.0 : 0.0; }

// Ingestion limits on retrieved evidence.
inline constexpr std::size_t kMaxVisualEvidence = 10;
inline constexpr std::size_t kMaxInverseSearchResults = 20;

struct SentenceEvidence {
  std::string text;
  SentenceKind kind = SentenceKind::caption;
  std::string domain;
  std::string source_page_url;
  MatchedBy image_matched_by = MatchedBy::none;

  friend bool operator==(const SentenceEvidence&, const SentenceEvidence&) = default;
};

struct EvidenceImageMeta {
  std::string image_id;
  std::string domain;
  ImageSource source = ImageSource::direct_image_search;

  friend bool operator==(const EvidenceImageMeta&, const EvidenceImageMeta&) = default;
};

/// One claim (query image + caption) with its retrieved evidence.
struct ExampleRecord {
  std::string id;
  std::string query_image_id;
  std::string query_caption;
  std::string query_domain;  // may be empty when unknown
  std::vector<EvidenceImageMeta> evidence_images;
  std::vector<std::string> entities;
  std::vector<SentenceEvidence> sentences;
  std::optional<Label> label;
  Split split = Split::train;

  friend bool operator==(const ExampleRecord&, const ExampleRecord&) = default;
};

// Store keys for the text items of an example. Images are keyed by their
// image ids directly.
std::string caption_key(const ExampleRecord& ex);
std::string sentence_key(const ExampleRecord& ex, std::size_t j);
std::string entity_key(const ExampleRecord& ex, std::size_t j);

// Strict JSON mapping: unknown fields and bad types raise ValidationError
// naming the record id and the field. Dataset records always need a label;
// a single claim submitted for verification may omit it.
nlohmann::json to_json(const ExampleRecord& ex);
ExampleRecord example_from_json(const nlohmann::json& j, bool require_label = true);

// Reads JSON lines (one record per line, blank lines ignored) or a single JSON
// array. Rejects duplicate ids, and unless `require_labels` is false, records
// in any split that lack a label.
std::vector<ExampleRecord> load_dataset(const std::filesystem::path& path, bool require_labels = true);
std::vector<ExampleRecord> parse_dataset(std::string_view text, bool require_labels = true);
void write_dataset(const std::filesystem::path& path, const std::vector<ExampleRecord>& examples);
std::string dataset_to_string(const std::vector<ExampleRecord>& examples);

std::vector<ExampleRecord> filter_split(const std::vector<ExampleRecord>& examples, Split split);

// Reference split sizes of the full-scale corpus (train, val, test).
struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
};
inline constexpr SplitSizes kReferenceSplitSizes{71072, 7024, 7264};

}  // namespace ccn
