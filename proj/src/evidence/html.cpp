#include "ccn/evidence/html.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <limits>

#include "ccn/data/domain_vocab.hpp"
#include "ccn/evidence/text.hpp"

namespace ccn {

namespace {

constexpr std::array<std::string_view, 14> kVoidTags{"area", "base",  "br",   "col",   "embed",  "hr",    "img",
                                                     "input", "link", "meta", "param", "source", "track", "wbr"};

bool is_void(std::string_view tag) { return std::find(kVoidTags.begin(), kVoidTags.end(), tag) != kVoidTags.end(); }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | cp >> 6);
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | cp >> 12);
    out += static_cast<char>(0x80 | (cp >> 6 & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | cp >> 18);
    out += static_cast<char>(0x80 | (cp >> 12 & 0x3F));
    out += static_cast<char>(0x80 | (cp >> 6 & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

struct NamedEntity {
  std::string_view name;
  std::uint32_t cp;
};
constexpr NamedEntity kEntities[] = {
    {"amp", '&'},     {"lt", '<'},       {"gt", '>'},       {"quot", '"'},     {"apos", '\''},   {"nbsp", 0xA0},
    {"copy", 0xA9},   {"reg", 0xAE},     {"hellip", 0x2026}, {"mdash", 0x2014}, {"ndash", 0x2013}, {"lsquo", 0x2018},
    {"rsquo", 0x2019}, {"ldquo", 0x201C}, {"rdquo", 0x201D}, {"laquo", 0xAB},   {"raquo", 0xBB},  {"middot", 0xB7},
    {"eacute", 0xE9}, {"egrave", 0xE8},  {"aacute", 0xE1},  {"uuml", 0xFC},    {"ouml", 0xF6},   {"auml", 0xE4},
    {"ccedil", 0xE7}, {"ntilde", 0xF1},  {"bull", 0x2022},  {"deg", 0xB0},     {"euro", 0x20AC}, {"pound", 0xA3}};

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  std::unique_ptr<HtmlNode> run() {
    auto root = std::make_unique<HtmlNode>();
    root->tag = "#document";
    open_.push_back(root.get());
    while (pos_ < s_.size()) {
      if (s_[pos_] == '<' && try_markup()) continue;
      const std::size_t next = s_.find('<', pos_ + 1);
      const std::size_t end = next == std::string_view::npos ? s_.size() : next;
      add_text(s_.substr(pos_, end - pos_));
      pos_ = end;
    }
    return root;
  }

 private:
  void add_text(std::string_view raw) {
    if (raw.empty()) return;
    HtmlNode* parent = open_.back();
    if (!parent->children.empty() && parent->children.back()->is_text()) {
      parent->children.back()->text += decode_entities(raw);
      return;
    }
    auto node = std::make_unique<HtmlNode>();
    node->text = decode_entities(raw);
    node->parent = parent;
    parent->children.push_back(std::move(node));
  }

  // Consumes a tag, comment or declaration at pos_. Returns false when the
  // '<' does not start markup, leaving it to be read as text.
  bool try_markup() {
    const std::string_view rest = s_.substr(pos_);
    if (rest.substr(0, 4) == "<!--") {
      const std::size_t end = s_.find("-->", pos_ + 4);
      pos_ = end == std::string_view::npos ? s_.size() : end + 3;
      return true;
    }
    if (rest.size() >= 2 && (rest[1] == '!' || rest[1] == '?')) {
      const std::size_t end = s_.find('>', pos_);
      pos_ = end == std::string_view::npos ? s_.size() : end + 1;
      return true;
    }
    const bool closing = rest.size() >= 2 && rest[1] == '/';
    std::size_t p = pos_ + (closing ? 2 : 1);
    if (p >= s_.size() || !std::isalpha(static_cast<unsigned char>(s_[p]))) return false;
    const std::size_t name_start = p;
    while (p < s_.size() && !is_space(s_[p]) && s_[p] != '>' && s_[p] != '/') ++p;
    const std::string name = lower(s_.substr(name_start, p - name_start));

    std::vector<std::pair<std::string, std::string>> attrs;
    bool self_closing = false;
    while (p < s_.size() && s_[p] != '>') {
      if (is_space(s_[p])) {
        ++p;
        continue;
      }
      if (s_[p] == '/') {
        self_closing = true;
        ++p;
        continue;
      }
      if (s_[p] == '<') break;  // unterminated tag
      const std::size_t a = p;
      while (p < s_.size() && !is_space(s_[p]) && s_[p] != '=' && s_[p] != '>' && s_[p] != '/' && s_[p] != '<') ++p;
      if (p == a) {
        ++p;
        continue;
      }
      std::string aname = lower(s_.substr(a, p - a));
      std::string value;
      std::size_t q = p;
      while (q < s_.size() && is_space(s_[q])) ++q;
      if (q < s_.size() && s_[q] == '=') {
        ++q;
        while (q < s_.size() && is_space(s_[q])) ++q;
        if (q < s_.size() && (s_[q] == '"' || s_[q] == '\'')) {
          const char quote = s_[q];
          const std::size_t close = s_.find(quote, q + 1);
          const std::size_t vend = close == std::string_view::npos ? s_.size() : close;
          value = decode_entities(s_.substr(q + 1, vend - q - 1));
          p = close == std::string_view::npos ? s_.size() : close + 1;
        } else {
          const std::size_t v = q;
          while (q < s_.size() && !is_space(s_[q]) && s_[q] != '>') ++q;
          value = decode_entities(s_.substr(v, q - v));
          p = q;
        }
        self_closing = false;
      }
      if (std::none_of(attrs.begin(), attrs.end(), [&](const auto& kv) { return kv.first == aname; })) {
        attrs.emplace_back(std::move(aname), std::move(value));
      }
    }
    pos_ = p < s_.size() && s_[p] == '>' ? p + 1 : p;

    if (closing) {
      close(name);
      return true;
    }
    auto node = std::make_unique<HtmlNode>();
    node->tag = name;
    node->attributes = std::move(attrs);
    HtmlNode* parent = open_.back();
    node->parent = parent;
    HtmlNode* raw = node.get();
    parent->children.push_back(std::move(node));
    if (name == "script" || name == "style") {
      skip_raw_text(name);
      return true;
    }
    if (name == "title" || name == "textarea") {
      read_raw_text(raw, name);
      return true;
    }
    if (!is_void(name) && !self_closing) open_.push_back(raw);
    return true;
  }

  std::size_t find_end_tag(std::string_view name) const {
    std::size_t p = pos_;
    while ((p = s_.find("</", p)) != std::string_view::npos) {
      if (lower(s_.substr(p + 2, name.size())) == name) return p;
      p += 2;
    }
    return s_.size();
  }

  void skip_raw_text(std::string_view name) {
    const std::size_t end = find_end_tag(name);
    const std::size_t gt = s_.find('>', end);
    pos_ = end == s_.size() || gt == std::string_view::npos ? s_.size() : gt + 1;
  }

  void read_raw_text(HtmlNode* node, std::string_view name) {
    const std::size_t end = find_end_tag(name);
    auto text = std::make_unique<HtmlNode>();
    text->text = decode_entities(s_.substr(pos_, end - pos_));
    text->parent = node;
    node->children.push_back(std::move(text));
    const std::size_t gt = s_.find('>', end);
    pos_ = end == s_.size() || gt == std::string_view::npos ? s_.size() : gt + 1;
  }

  void close(const std::string& name) {
    for (std::size_t i = open_.size(); i-- > 1;) {
      if (open_[i]->tag == name) {
        open_.resize(i);
        return;
      }
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::vector<HtmlNode*> open_;
};

bool is_inline(std::string_view tag) {
  static constexpr std::string_view kInline[] = {"a",    "abbr", "b",   "bdi",  "bdo",  "cite", "code", "data",
                                                 "dfn",  "em",   "font", "i",   "kbd",  "mark", "q",    "s",
                                                 "samp", "small", "span", "strong", "sub", "sup", "time", "u", "var"};
  return std::find(std::begin(kInline), std::end(kInline), tag) != std::end(kInline);
}

void collect_text(const HtmlNode& n, std::string& out) {
  if (n.is_text()) {
    out += n.text;
    return;
  }
  if (n.tag == "br") out += ' ';
  for (const auto& c : n.children) collect_text(*c, out);
  if (!is_inline(n.tag)) out += ' ';
}

void find_all(const HtmlNode& n, std::string_view tag, std::vector<const HtmlNode*>& out) {
  if (n.tag == tag) out.push_back(&n);
  for (const auto& c : n.children) find_all(*c, tag, out);
}

const HtmlNode* find_first(const HtmlNode& n, std::string_view tag) {
  if (n.tag == tag) return &n;
  for (const auto& c : n.children) {
    if (const HtmlNode* f = find_first(*c, tag)) return f;
  }
  return nullptr;
}

std::string strip_fragment(std::string_view url) {
  return std::string(url.substr(0, url.find('#')));
}

std::string remove_dot_segments(std::string_view path) {
  std::vector<std::string> out;
  std::size_t start = 0;
  const bool absolute = !path.empty() && path[0] == '/';
  if (absolute) start = 1;
  bool trailing = false;
  while (start <= path.size()) {
    std::size_t end = path.find('/', start);
    if (end == std::string_view::npos) end = path.size();
    const std::string_view seg = path.substr(start, end - start);
    trailing = false;
    if (seg == "..") {
      if (!out.empty()) out.pop_back();
      trailing = true;
    } else if (seg == ".") {
      trailing = true;
    } else {
      out.emplace_back(seg);
    }
    start = end + 1;
  }
  std::string result = absolute ? "/" : "";
  for (std::size_t i = 0; i < out.size(); ++i) result += (i ? "/" : "") + out[i];
  if (trailing && (result.empty() || result.back() != '/')) result += '/';
  return result;
}

}  // namespace

const std::string* HtmlNode::attribute(std::string_view name) const {
  for (const auto& [k, v] : attributes) {
    if (k == name) return &v;
  }
  return nullptr;
}

std::string HtmlNode::inner_text() const {
  std::string out;
  for (const auto& c : children) collect_text(*c, out);
  return out;
}

std::unique_ptr<HtmlNode> parse_html(std::string_view html) { return Parser(html).run(); }

std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out += s[i++];
      continue;
    }
    const std::size_t semi = s.find(';', i);
    if (semi != std::string_view::npos && semi - i <= 32) {
      const std::string_view body = s.substr(i + 1, semi - i - 1);
      if (!body.empty() && body[0] == '#') {
        const bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
        const std::string_view digits = body.substr(hex ? 2 : 1);
        std::uint32_t cp = 0;
        bool ok = !digits.empty();
        for (char c : digits) {
          const int v = std::isdigit(static_cast<unsigned char>(c)) ? c - '0'
                        : hex && std::isxdigit(static_cast<unsigned char>(c))
                            ? std::tolower(static_cast<unsigned char>(c)) - 'a' + 10
                            : -1;
          if (v < 0 || cp > 0x10FFFF) {
            ok = false;
            break;
          }
          cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
        }
        if (ok) {
          append_utf8(out, cp);
          i = semi + 1;
          continue;
        }
      } else {
        const auto it = std::find_if(std::begin(kEntities), std::end(kEntities),
                                     [&](const NamedEntity& e) { return e.name == body; });
        if (it != std::end(kEntities)) {
          append_utf8(out, it->cp);
          i = semi + 1;
          continue;
        }
      }
    }
    out += s[i++];
  }
  return out;
}

std::string resolve_url(std::string_view base, std::string_view ref) {
  const auto trim = [](std::string_view v) {
    while (!v.empty() && is_space(v.front())) v.remove_prefix(1);
    while (!v.empty() && is_space(v.back())) v.remove_suffix(1);
    return v;
  };
  ref = trim(ref);
  const std::size_t colon = ref.find(':');
  const std::size_t first_sep = ref.find_first_of("/?#");
  if (colon != std::string_view::npos && colon > 0 && (first_sep == std::string_view::npos || colon < first_sep) &&
      std::isalpha(static_cast<unsigned char>(ref[0]))) {
    return std::string(ref);
  }
  const std::size_t scheme_end = base.find("://");
  if (scheme_end == std::string_view::npos) return std::string(ref);
  const std::string_view scheme = base.substr(0, scheme_end);
  if (ref.substr(0, 2) == "//") return std::string(scheme) + ":" + std::string(ref);
  const std::size_t path_start = base.find('/', scheme_end + 3);
  const std::string_view authority = base.substr(0, path_start == std::string_view::npos ? base.size() : path_start);
  std::string_view base_path = path_start == std::string_view::npos ? "/" : base.substr(path_start);
  base_path = base_path.substr(0, base_path.find_first_of("?#"));
  if (ref.empty()) return strip_fragment(base);
  if (ref[0] == '#') return strip_fragment(base) + std::string(ref);
  if (ref[0] == '?') return std::string(authority) + std::string(base_path) + std::string(ref);
  std::string_view query_part;
  std::string_view ref_path = ref;
  if (const std::size_t q = ref.find_first_of("?#"); q != std::string_view::npos) {
    query_part = ref.substr(q);
    ref_path = ref.substr(0, q);
  }
  std::string merged;
  if (ref_path[0] == '/') {
    merged = std::string(ref_path);
  } else {
    const std::size_t slash = base_path.rfind('/');
    merged = std::string(base_path.substr(0, slash + 1)) + std::string(ref_path);
  }
  return std::string(authority) + remove_dot_segments(merged) + std::string(query_part);
}

PageDocument PageDocument::from_html(std::string url, std::string html, std::string fetched_at) {
  PageDocument p;
  p.url = std::move(url);
  p.html = std::move(html);
  p.fetched_at = std::move(fetched_at);
  p.title = extract_title(*parse_html(p.html));
  return p;
}

std::string extract_title(const HtmlNode& root) {
  const HtmlNode* t = find_first(root, "title");
  return t ? collapse_whitespace(t->inner_text()) : std::string();
}

std::vector<SentenceEvidence> extract_captions(const PageDocument& page, std::string_view target_image_url,
                                               const std::optional<PerceptualHash>& target_hash,
                                               const std::map<std::string, PerceptualHash>& candidate_hashes,
                                               int threshold) {
  const auto root = parse_html(page.html);
  std::vector<const HtmlNode*> images;
  find_all(*root, "img", images);

  const HtmlNode* target = nullptr;
  MatchedBy matched = MatchedBy::none;
  const std::string wanted = strip_fragment(target_image_url);
  for (const HtmlNode* img : images) {
    const std::string* src = img->attribute("src");
    if (src && strip_fragment(resolve_url(page.url, *src)) == wanted) {
      target = img;
      matched = MatchedBy::url;
      break;
    }
  }
  if (!target && target_hash) {
    int best = std::numeric_limits<int>::max();
    for (const HtmlNode* img : images) {
      const std::string* src = img->attribute("src");
      if (!src) continue;
      const auto it = candidate_hashes.find(resolve_url(page.url, *src));
      if (it == candidate_hashes.end() || it->second.algorithm != target_hash->algorithm) continue;
      const int d = hamming_distance(*target_hash, it->second);
      if (d <= threshold && d < best) {
        best = d;
        target = img;
        matched = MatchedBy::perceptual_hash;
      }
    }
  }

  std::vector<std::string> texts;
  std::vector<SentenceKind> kinds;
  if (target) {
    for (const HtmlNode* n = target->parent; n; n = n->parent) {
      if (n->tag != "figure") continue;
      if (const HtmlNode* cap = find_first(*n, "figcaption")) {
        texts.push_back(collapse_whitespace(cap->inner_text()));
        kinds.push_back(SentenceKind::caption);
      }
      break;
    }
    for (std::string_view name : kCaptionAttributes) {
      if (const std::string* v = target->attribute(name)) {
        texts.push_back(collapse_whitespace(*v));
        kinds.push_back(SentenceKind::caption);
      }
    }
  }
  const std::string title = page.title.empty() ? extract_title(*root) : collapse_whitespace(page.title);
  texts.push_back(title);
  kinds.push_back(SentenceKind::title);

  const std::string domain = registrable_domain(page.url);
  std::vector<SentenceEvidence> out;
  std::vector<std::string> seen;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const std::string norm = normalize_caption(texts[i]);
    if (texts[i].empty() || norm.empty() || std::find(seen.begin(), seen.end(), norm) != seen.end()) continue;
    seen.push_back(norm);
    out.push_back({texts[i], kinds[i], domain, page.url, matched});
  }
  return out;
}

}  // namespace ccn
