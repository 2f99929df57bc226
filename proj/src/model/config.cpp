#include "ccn/model/config.hpp"

#include <array>
#include <cstdint>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "ccn/errors.hpp"

namespace ccn {

using nlohmann::json;

namespace {

template <typename E, std::size_t N>
using Table = std::array<std::pair<std::string_view, E>, N>;

constexpr Table<TextEncoder, 2> kEncoders{
    {{"sentence_768", TextEncoder::sentence_768}, {"token_lstm_512", TextEncoder::token_lstm_512}}};
constexpr Table<MemoryLayout, 2> kLayouts{
    {{"separate", MemoryLayout::separate}, {"unified", MemoryLayout::unified}}};
constexpr Table<Fusion, 4> kFusions{{{"concat", Fusion::concat},
                                     {"avg_pool", Fusion::avg_pool},
                                     {"max_pool", Fusion::max_pool},
                                     {"multiply", Fusion::multiply}}};
constexpr Table<MemoryKind, 5> kKinds{{{"image", MemoryKind::image},
                                       {"scene", MemoryKind::scene},
                                       {"entity", MemoryKind::entity},
                                       {"sentence", MemoryKind::sentence},
                                       {"unified", MemoryKind::unified}}};

template <typename E, std::size_t N>
std::string_view name_of(E v, const Table<E, N>& t) {
  for (const auto& [n, e] : t) {
    if (e == v) return n;
  }
  return "?";
}

template <typename E, std::size_t N>
E parse_of(std::string_view s, const Table<E, N>& t, const char* what) {
  for (const auto& [n, e] : t) {
    if (n == s) return e;
  }
  throw ConfigError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(TextEncoder v) { return name_of(v, kEncoders); }
std::string_view to_string(MemoryLayout v) { return name_of(v, kLayouts); }
std::string_view to_string(Fusion v) { return name_of(v, kFusions); }
std::string_view to_string(MemoryKind v) { return name_of(v, kKinds); }
TextEncoder parse_text_encoder(std::string_view s) { return parse_of(s, kEncoders, "text encoder"); }
MemoryLayout parse_memory_layout(std::string_view s) { return parse_of(s, kLayouts, "memory layout"); }
Fusion parse_fusion(std::string_view s) { return parse_of(s, kFusions, "fusion mode"); }

std::size_t CcnConfig::text_dim() const {
  return token_path() ? 2 * dims.lstm_hidden : features.sentence;
}

bool CcnConfig::memory_enabled(MemoryKind kind) const {
  const bool unified = memory_layout == MemoryLayout::unified;
  switch (kind) {
    case MemoryKind::image: return use_images && !unified;
    case MemoryKind::scene: return use_scenes;
    case MemoryKind::entity: return use_entities && !unified;
    case MemoryKind::sentence: return use_captions && !unified;
    case MemoryKind::unified: return unified && (use_images || use_captions || use_entities);
  }
  return false;
}

std::size_t CcnConfig::side_width(MemoryKind kind) const {
  switch (kind) {
    case MemoryKind::image: return use_labels_feature ? 1 : 0;
    case MemoryKind::scene: return 0;
    case MemoryKind::entity:
    case MemoryKind::sentence: return use_ner_feature ? 1 : 0;
    case MemoryKind::unified:
      // One shared column; item types without their feature leave it at 0.
      return (use_images && use_labels_feature) || ((use_captions || use_entities) && use_ner_feature) ? 1 : 0;
  }
  return 0;
}

bool CcnConfig::uses_domain(MemoryKind kind) const {
  return use_domains && kind != MemoryKind::entity;
}

std::size_t CcnConfig::item_dim(MemoryKind kind) const {
  std::size_t base = 0;
  switch (kind) {
    case MemoryKind::image: base = features.image; break;
    case MemoryKind::scene: base = features.scene; break;
    case MemoryKind::entity:
    case MemoryKind::sentence: base = text_dim(); break;
    case MemoryKind::unified: base = features.image + text_dim(); break;
  }
  return base + side_width(kind) + (uses_domain(kind) ? dims.domain : 0);
}

std::size_t CcnConfig::mem_dim(MemoryKind kind) const {
  switch (kind) {
    case MemoryKind::image:
    case MemoryKind::scene: return dims.visual_mem;
    case MemoryKind::entity:
    case MemoryKind::sentence: return text_dim();
    case MemoryKind::unified: return dims.visual_mem + text_dim();
  }
  return 0;
}

void CcnConfig::validate() const {
  const std::array<std::size_t, 9> widths{features.image, features.scene, features.sentence,
                                          features.token, features.clip, dims.visual_mem,
                                          dims.domain, dims.lstm_hidden, dims.classifier_hidden};
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("every feature and layer width must be positive");
  }
  for (double r : {dropout.input, dropout.domain, dropout.memory}) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rates must be in [0, 1)");
  }
  const bool any_memory = memory_enabled(MemoryKind::image) || memory_enabled(MemoryKind::scene) ||
                          memory_enabled(MemoryKind::entity) ||
                          memory_enabled(MemoryKind::sentence) ||
                          memory_enabled(MemoryKind::unified);
  if (!any_memory && !use_clip) throw ConfigError("all model components are disabled");
  if (evidence_only && (use_clip || use_labels_feature || use_ner_feature)) {
    throw ConfigError("evidence-only model must not see the claim: disable CLIP, label and NER features");
  }
}

json to_json(const CcnConfig& c) {
  return {{"use_images", c.use_images},
          {"use_captions", c.use_captions},
          {"use_entities", c.use_entities},
          {"use_scenes", c.use_scenes},
          {"use_labels_feature", c.use_labels_feature},
          {"use_ner_feature", c.use_ner_feature},
          {"use_domains", c.use_domains},
          {"use_clip", c.use_clip},
          {"use_bn", c.use_bn},
          {"text_encoder", std::string(to_string(c.text_encoder))},
          {"memory_layout", std::string(to_string(c.memory_layout))},
          {"fusion", std::string(to_string(c.fusion))},
          {"evidence_only", c.evidence_only},
          {"features",
           {{"image", c.features.image},
            {"scene", c.features.scene},
            {"sentence", c.features.sentence},
            {"token", c.features.token},
            {"clip", c.features.clip}}},
          {"dims",
           {{"visual_mem", c.dims.visual_mem},
            {"domain", c.dims.domain},
            {"lstm_hidden", c.dims.lstm_hidden},
            {"classifier_hidden", c.dims.classifier_hidden}}},
          {"dropout",
           {{"input", c.dropout.input}, {"domain", c.dropout.domain}, {"memory", c.dropout.memory}}}};
}

CcnConfig config_from_json(const json& j) {
  CcnConfig c;
  try {
    auto flag = [&](const char* key, bool& out) {
      if (j.contains(key)) out = j.at(key).get<bool>();
    };
    flag("use_images", c.use_images);
    flag("use_captions", c.use_captions);
    flag("use_entities", c.use_entities);
    flag("use_scenes", c.use_scenes);
    flag("use_labels_feature", c.use_labels_feature);
    flag("use_ner_feature", c.use_ner_feature);
    flag("use_domains", c.use_domains);
    flag("use_clip", c.use_clip);
    flag("use_bn", c.use_bn);
    flag("evidence_only", c.evidence_only);
    if (j.contains("text_encoder")) c.text_encoder = parse_text_encoder(j.at("text_encoder").get<std::string>());
    if (j.contains("memory_layout")) c.memory_layout = parse_memory_layout(j.at("memory_layout").get<std::string>());
    if (j.contains("fusion")) c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    if (j.contains("features")) {
      const json& f = j.at("features");
      c.features.image = f.value("image", c.features.image);
      c.features.scene = f.value("scene", c.features.scene);
      c.features.sentence = f.value("sentence", c.features.sentence);
      c.features.token = f.value("token", c.features.token);
      c.features.clip = f.value("clip", c.features.clip);
    }
    if (j.contains("dims")) {
      const json& d = j.at("dims");
      c.dims.visual_mem = d.value("visual_mem", c.dims.visual_mem);
      c.dims.domain = d.value("domain", c.dims.domain);
      c.dims.lstm_hidden = d.value("lstm_hidden", c.dims.lstm_hidden);
      c.dims.classifier_hidden = d.value("classifier_hidden", c.dims.classifier_hidden);
    }
    if (j.contains("dropout")) {
      const json& d = j.at("dropout");
      c.dropout.input = d.value("input", c.dropout.input);
      c.dropout.domain = d.value("domain", c.dropout.domain);
      c.dropout.memory = d.value("memory", c.dropout.memory);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
  return c;
}

CcnConfig evidence_only_config(CcnConfig base) {
  base.evidence_only = true;
  base.use_clip = false;
  base.use_labels_feature = false;
  base.use_ner_feature = false;
  return base;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string CcnConfig::fingerprint() const { return fnv1a_hex(to_json(*this).dump()); }

}  // namespace ccn
