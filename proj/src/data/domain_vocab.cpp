#include "ccn/data/domain_vocab.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ccn/errors.hpp"

namespace ccn {

namespace {

// Multi-label public suffixes commonly seen in news hosting. Any other host
// falls back to the last two labels.
constexpr std::string_view kMultiLabelSuffixes[] = {
    "ac.uk",  "co.uk",  "gov.uk", "ltd.uk", "me.uk",  "net.uk", "org.uk", "plc.uk", "sch.uk",
    "com.au", "edu.au", "gov.au", "net.au", "org.au", "co.nz",  "govt.nz", "net.nz", "org.nz",
    "co.jp",  "ne.jp",  "or.jp",  "ac.jp",  "go.jp",  "co.kr",  "or.kr",  "com.cn", "net.cn",
    "org.cn", "gov.cn", "com.hk", "org.hk", "com.tw", "org.tw", "com.sg", "com.my", "co.in",
    "net.in", "org.in", "gov.in", "co.za",  "org.za", "com.br", "gov.br", "org.br", "com.mx",
    "gob.mx", "com.ar", "gob.ar", "com.tr", "gov.tr", "co.il",  "org.il", "com.pk", "com.ng",
    "com.eg", "com.sa", "co.ke",  "com.ph"};

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string_view extract_host(std::string_view s) {
  if (auto scheme = s.find("://"); scheme != std::string_view::npos) {
    s.remove_prefix(scheme + 3);
  } else if (s.starts_with("//")) {
    s.remove_prefix(2);
  }
  s = s.substr(0, s.find_first_of("/?#"));
  if (auto at = s.rfind('@'); at != std::string_view::npos) s.remove_prefix(at + 1);
  if (s.starts_with('[')) return s.substr(0, s.find(']') + 1);  // IPv6 literal
  return s.substr(0, s.find(':'));
}

bool is_ipv4(std::string_view h) {
  int dots = 0;
  for (char c : h) {
    if (c == '.') ++dots;
    else if (c < '0' || c > '9') return false;
  }
  return dots == 3;
}

}  // namespace

std::string registrable_domain(std::string_view url_or_host) {
  std::string host = lower_ascii(extract_host(url_or_host));
  while (!host.empty() && host.back() == '.') host.pop_back();
  if (host.empty() || host.front() == '[' || is_ipv4(host)) return host;

  std::vector<std::string_view> labels;
  std::string_view rest = host;
  while (true) {
    const auto dot = rest.find('.');
    labels.push_back(rest.substr(0, dot));
    if (dot == std::string_view::npos) break;
    rest.remove_prefix(dot + 1);
  }
  if (labels.size() <= 2) return host;
  std::size_t suffix_labels = 1;
  const std::string last_two = std::string(labels[labels.size() - 2]) + "." + std::string(labels.back());
  if (std::find(std::begin(kMultiLabelSuffixes), std::end(kMultiLabelSuffixes), last_two) !=
      std::end(kMultiLabelSuffixes)) {
    suffix_labels = 2;
  }
  const std::size_t keep = std::min(labels.size(), suffix_labels + 1);
  std::string out;
  for (std::size_t i = labels.size() - keep; i < labels.size(); ++i) {
    if (!out.empty()) out += '.';
    out += labels[i];
  }
  return out;
}

DomainVocabulary::DomainVocabulary(std::vector<std::string> domains, std::size_t min_count)
    : domains_(std::move(domains)), min_count_(min_count) {
  std::sort(domains_.begin(), domains_.end());
  domains_.erase(std::unique(domains_.begin(), domains_.end()), domains_.end());
  domains_.erase(std::remove(domains_.begin(), domains_.end(), std::string()), domains_.end());
  for (std::size_t i = 0; i < domains_.size(); ++i) {
    index_.emplace(domains_[i], static_cast<int>(i + 1));
  }
}

DomainVocabulary DomainVocabulary::build(const std::vector<ExampleRecord>& train_examples,
                                         std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& ex : train_examples) {
    if (ex.split != Split::train) continue;
    for (const auto& im : ex.evidence_images) {
      if (!im.domain.empty()) ++counts[im.domain];
    }
    for (const auto& s : ex.sentences) {
      if (!s.domain.empty()) ++counts[s.domain];
    }
  }
  std::vector<std::string> kept;
  for (const auto& [domain, n] : counts) {
    if (n >= min_count) kept.push_back(domain);
  }
  return DomainVocabulary(std::move(kept), min_count);
}

int DomainVocabulary::index(std::string_view domain) const {
  auto it = index_.find(domain);
  return it == index_.end() ? kUnk : it->second;
}

std::string DomainVocabulary::to_json_string() const {
  nlohmann::json j = {{"min_count", min_count_},
                      {"embedding_width", kEmbeddingWidth},
                      {"domains", domains_}};
  return j.dump(1);
}

DomainVocabulary DomainVocabulary::from_json_string(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    return DomainVocabulary(j.at("domains").get<std::vector<std::string>>(),
                            j.at("min_count").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid domain vocabulary: ") + e.what());
  }
}

void DomainVocabulary::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  out << to_json_string() << '\n';
}

DomainVocabulary DomainVocabulary::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

}  // namespace ccn
