#include "ccn/evidence/filter.hpp"

#include <algorithm>
#include <array>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "ccn/evidence/text.hpp"

namespace ccn {

namespace {

constexpr std::array<std::string_view, 48> kStopwords{
    "a",    "about", "after", "all",  "an",   "and",  "are",   "as",    "at",   "be",   "but",  "by",
    "can",  "for",   "from",  "had",  "has",  "have", "he",    "her",   "his",  "how",  "in",   "into",
    "is",   "it",    "its",   "more", "new",  "not",  "of",    "on",    "or",   "over", "says", "she",
    "than", "that",  "the",   "their", "they", "this", "to",   "up",    "was",  "what", "who",  "with"};

bool same_domain(std::string_view a, std::string_view b) {
  return !a.empty() && fold_case(a) == fold_case(b);
}

}  // namespace

bool HeuristicLanguageIdentifier::is_english(std::string_view text) const {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  std::size_t letters = 0, ascii = 0;
  for (int32_t i = 0; i < length;) {
    UChar32 c = 0;
    U8_NEXT(bytes, i, length, c);
    if (c < 0 || !u_isalpha(c)) continue;
    ++letters;
    if (c < 0x80) ++ascii;
  }
  if (letters == 0) return true;
  if (static_cast<double>(ascii) < kMinAsciiRatio * static_cast<double>(letters)) return false;

  const std::string words = normalize_caption(text);
  std::size_t count = 0;
  bool stopword = false;
  std::size_t start = 0;
  while (start < words.size()) {
    std::size_t end = words.find(' ', start);
    if (end == std::string::npos) end = words.size();
    const std::string_view w(words.data() + start, end - start);
    ++count;
    stopword = stopword || std::find(kStopwords.begin(), kStopwords.end(), w) != kStopwords.end();
    start = end + 1;
  }
  return count < kStopwordMinWords || stopword;
}

GateDecision language_gate(std::string_view title, const LanguageIdentifier& identifier) {
  if (collapse_whitespace(title).empty()) return GateDecision::keep;
  return identifier.is_english(title) ? GateDecision::keep : GateDecision::drop;
}

FilterResult filter_pristine_evidence(const ExampleRecord& example, std::string_view query_domain,
                                      const std::optional<PerceptualHash>& query_hash,
                                      const std::map<std::string, PerceptualHash>& image_hashes, int threshold) {
  FilterResult r{example, 0, 0};
  if (example.label != Label::pristine) return r;
  auto& images = r.example.evidence_images;
  if (query_hash) {
    const auto end = std::remove_if(images.begin(), images.end(), [&](const EvidenceImageMeta& img) {
      const auto it = image_hashes.find(img.image_id);
      return it != image_hashes.end() && it->second.algorithm == query_hash->algorithm &&
             hash_match(*query_hash, it->second, threshold) && same_domain(img.domain, query_domain);
    });
    r.dropped_images = static_cast<std::size_t>(images.end() - end);
    images.erase(end, images.end());
  }
  const std::string caption = normalize_caption(example.query_caption);
  auto& sentences = r.example.sentences;
  const auto end = std::remove_if(sentences.begin(), sentences.end(), [&](const SentenceEvidence& s) {
    return normalize_caption(s.text) == caption && same_domain(s.domain, query_domain);
  });
  r.dropped_sentences = static_cast<std::size_t>(sentences.end() - end);
  sentences.erase(end, sentences.end());
  return r;
}

std::vector<ExampleRecord> filter_dataset(const std::vector<ExampleRecord>& examples,
                                          const std::map<std::string, PerceptualHash>& image_hashes,
                                          DatasetFilterStats* stats) {
  std::vector<ExampleRecord> out;
  out.reserve(examples.size());
  DatasetFilterStats s;
  for (const auto& ex : examples) {
    std::optional<PerceptualHash> qh;
    if (const auto it = image_hashes.find(ex.query_image_id); it != image_hashes.end()) qh = it->second;
    FilterResult r = filter_pristine_evidence(ex, ex.query_domain, qh, image_hashes);
    if (r.dropped_images || r.dropped_sentences) ++s.examples_changed;
    s.dropped_images += r.dropped_images;
    s.dropped_sentences += r.dropped_sentences;
    out.push_back(std::move(r.example));
  }
  if (stats) *stats = s;
  return out;
}

}  // namespace ccn
