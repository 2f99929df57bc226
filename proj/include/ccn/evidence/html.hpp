#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccn/data/example.hpp"
#include "ccn/evidence/image.hpp"

namespace ccn {

/// Element or text node of a leniently parsed document.
struct HtmlNode {
  std::string tag;  // lowercase; empty for text
  std::vector<std::pair<std::string, std::string>> attributes;  // names lowercase, values decoded
  std::string text;  // text nodes only, entities decoded
  HtmlNode* parent = nullptr;
  std::vector<std::unique_ptr<HtmlNode>> children;

  bool is_text() const { return tag.empty(); }
  const std::string* attribute(std::string_view name) const;
  // Concatenated descendant text.
  std::string inner_text() const;
};

// Never fails: unknown constructs become text, unmatched end tags are
// ignored, unclosed elements end at the end of input. Script and style
// contents and comments are dropped.
std::unique_ptr<HtmlNode> parse_html(std::string_view html);

// Decodes named (common set) and numeric character references.
std::string decode_entities(std::string_view s);

// Resolves `ref` against `base` (absolute, scheme-relative, root-relative and
// path-relative references; dot segments removed).
std::string resolve_url(std::string_view base, std::string_view ref);

struct PageDocument {
  std::string url;
  std::string html;
  std::string title;  // extracted
  std::string fetched_at;

  static PageDocument from_html(std::string url, std::string html, std::string fetched_at = "");
};

// Whitespace-normalized text of the first <title>, or "".
std::string extract_title(const HtmlNode& root);

// The img attributes read as captions, in output order.
inline constexpr std::string_view kCaptionAttributes[] = {"alt", "image-alt", "caption", "data-caption", "title"};

// Captions of the target image on `page`: the nearest enclosing figure's
// figcaption, then the caption attributes of the img, then the page title.
// The image is located by exact (resolved) URL, else by the closest candidate
// hash within `threshold`. When it cannot be located only the title is
// returned, flagged image_matched_by=none.
std::vector<SentenceEvidence> extract_captions(const PageDocument& page, std::string_view target_image_url,
                                               const std::optional<PerceptualHash>& target_hash,
                                               const std::map<std::string, PerceptualHash>& candidate_hashes,
                                               int threshold = 8);

}  // namespace ccn
