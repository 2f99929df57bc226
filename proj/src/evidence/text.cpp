#include "ccn/evidence/text.hpp"

#include <set>
#include <unordered_set>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

namespace ccn {

namespace {

template <typename F>
void for_each_code_point(std::string_view s, F&& f) {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto length = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c = 0;
    U8_NEXT(bytes, i, length, c);
    if (c < 0) c = 0xFFFD;
    f(c);
  }
}

void append_utf8(std::string& out, UChar32 c) {
  std::uint8_t buf[U8_MAX_LENGTH];
  int32_t n = 0;
  UBool error = false;
  U8_APPEND(buf, n, U8_MAX_LENGTH, c, error);
  if (!error) out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
}

bool is_punctuation(UChar32 c) { return (U_GET_GC_MASK(c) & U_GC_P_MASK) != 0; }

std::string normalize_impl(std::string_view utf8, bool lower, bool strip_punct) {
  std::string out;
  out.reserve(utf8.size());
  bool pending_space = false;
  for_each_code_point(utf8, [&](UChar32 c) {
    if (u_isUWhiteSpace(c)) {
      pending_space = !out.empty();
      return;
    }
    if (strip_punct && is_punctuation(c)) return;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    append_utf8(out, lower ? u_tolower(c) : c);
  });
  return out;
}

std::set<std::string> folded_set(const std::vector<std::string>& items) {
  std::set<std::string> out;
  for (const auto& s : items) out.insert(fold_case(s));
  return out;
}

}  // namespace

std::string fold_case(std::string_view utf8) {
  std::string out;
  out.reserve(utf8.size());
  for_each_code_point(utf8, [&](UChar32 c) { append_utf8(out, u_tolower(c)); });
  return out;
}

std::string collapse_whitespace(std::string_view utf8) {
  return normalize_impl(utf8, false, false);
}

std::string normalize_caption(std::string_view utf8) { return normalize_impl(utf8, true, true); }

std::vector<std::string> dedupe_snippets(const std::vector<std::string>& snippets) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& s : snippets) {
    if (seen.insert(normalize_caption(s)).second) out.push_back(s);
  }
  return out;
}

std::size_t label_overlap_count(const std::vector<std::string>& query_labels,
                                const std::vector<std::string>& evidence_labels) {
  const auto a = folded_set(query_labels);
  const auto b = folded_set(evidence_labels);
  std::size_t n = 0;
  for (const auto& s : a) n += b.count(s);
  return n;
}

int ner_overlap_flag(const std::vector<std::string>& query_entities,
                     const std::vector<std::string>& evidence_entities) {
  return label_overlap_count(query_entities, evidence_entities) > 0 ? 1 : 0;
}

}  // namespace ccn
