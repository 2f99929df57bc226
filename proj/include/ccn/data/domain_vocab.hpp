#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ccn/data/example.hpp"

namespace ccn {

// Registrable domain (public-suffix aware, lowercased) of a URL or host name,
// e.g. "https://www.bbc.co.uk/news" -> "bbc.co.uk". Returns the lowercased
// host itself for IP literals and single-label hosts, "" when no host.
std::string registrable_domain(std::string_view url_or_host);

/// Maps evidence source domains to embedding rows. Row 0 is UNK; known
/// domains take rows 1..V in lexicographic order.
class DomainVocabulary {
 public:
  static constexpr std::size_t kDefaultMinCount = 3;
  static constexpr std::size_t kEmbeddingWidth = 20;
  static constexpr int kUnk = 0;

  DomainVocabulary() = default;
  explicit DomainVocabulary(std::vector<std::string> domains, std::size_t min_count = kDefaultMinCount);

  // Counts every evidence domain (images and sentences) of the training
  // examples and keeps those seen at least `min_count` times.
  static DomainVocabulary build(const std::vector<ExampleRecord>& train_examples,
                                std::size_t min_count = kDefaultMinCount);

  int index(std::string_view domain) const;
  // V + 1, counting UNK.
  std::size_t rows() const { return domains_.size() + 1; }
  std::size_t min_count() const { return min_count_; }
  const std::vector<std::string>& domains() const { return domains_; }

  std::string to_json_string() const;
  static DomainVocabulary from_json_string(std::string_view text);
  void write(const std::filesystem::path& path) const;
  static DomainVocabulary read(const std::filesystem::path& path);

  friend bool operator==(const DomainVocabulary& a, const DomainVocabulary& b) {
    return a.domains_ == b.domains_ && a.min_count_ == b.min_count_;
  }

 private:
  std::vector<std::string> domains_;
  std::map<std::string, int, std::less<>> index_;
  std::size_t min_count_ = kDefaultMinCount;
};

}  // namespace ccn
