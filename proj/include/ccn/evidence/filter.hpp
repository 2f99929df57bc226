#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "ccn/data/example.hpp"
#include "ccn/evidence/image.hpp"

namespace ccn {

class LanguageIdentifier {
 public:
  virtual ~LanguageIdentifier() = default;
  virtual bool is_english(std::string_view text) const = 0;
};

/// Test-grade identifier: at least 90% of the letters are ASCII, and titles
/// of six or more words contain an English stopword.
class HeuristicLanguageIdentifier final : public LanguageIdentifier {
 public:
  static constexpr double kMinAsciiRatio = 0.9;
  static constexpr std::size_t kStopwordMinWords = 6;
  bool is_english(std::string_view text) const override;
};

enum class GateDecision { keep, drop };

// Empty or blank titles are kept.
GateDecision language_gate(std::string_view title, const LanguageIdentifier& identifier);

struct FilterResult {
  ExampleRecord example;
  std::size_t dropped_images = 0;
  std::size_t dropped_sentences = 0;
};

// For pristine examples, drops evidence that matches the claim and comes from
// the claim's own domain: images whose hash matches `query_hash`, sentences
// whose normalized text equals the normalized claim caption. Other examples
// are returned unchanged. Images without a known hash are kept.
FilterResult filter_pristine_evidence(const ExampleRecord& example, std::string_view query_domain,
                                      const std::optional<PerceptualHash>& query_hash,
                                      const std::map<std::string, PerceptualHash>& image_hashes,
                                      int threshold = 8);

struct DatasetFilterStats {
  std::size_t examples_changed = 0;
  std::size_t dropped_images = 0;
  std::size_t dropped_sentences = 0;
};

// Applies the filter to every example with its own query domain and the hash
// of its query image from `image_hashes` (keyed by image id).
std::vector<ExampleRecord> filter_dataset(const std::vector<ExampleRecord>& examples,
                                          const std::map<std::string, PerceptualHash>& image_hashes,
                                          DatasetFilterStats* stats = nullptr);

}  // namespace ccn
