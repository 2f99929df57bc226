#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ccn {

// Unicode simple lowercase mapping of UTF-8 text. Invalid byte sequences are
// replaced by U+FFFD.
std::string fold_case(std::string_view utf8);

// Collapses runs of Unicode whitespace to one ASCII space and trims.
std::string collapse_whitespace(std::string_view utf8);

// Lowercases, removes characters of the Unicode punctuation categories (P*),
// collapses whitespace and trims. "A.B.C -- test" -> "abc test".
std::string normalize_caption(std::string_view utf8);

// Order-preserving removal of snippets whose normalized form was seen before.
std::vector<std::string> dedupe_snippets(const std::vector<std::string>& snippets);

// Size of the case-insensitive intersection of two label sets.
std::size_t label_overlap_count(const std::vector<std::string>& query_labels,
                                const std::vector<std::string>& evidence_labels);

// 1 when the lists share any entity string (case-insensitive), else 0.
int ner_overlap_flag(const std::vector<std::string>& query_entities,
                     const std::vector<std::string>& evidence_entities);

}  // namespace ccn
