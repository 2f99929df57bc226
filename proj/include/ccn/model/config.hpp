#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace ccn {

enum class TextEncoder { sentence_768, token_lstm_512 };
enum class MemoryLayout { separate, unified };
enum class Fusion { concat, avg_pool, max_pool, multiply };
enum class MemoryKind { image, scene, entity, sentence, unified };

std::string_view to_string(TextEncoder v);
std::string_view to_string(MemoryLayout v);
std::string_view to_string(Fusion v);
std::string_view to_string(MemoryKind v);
TextEncoder parse_text_encoder(std::string_view s);
MemoryLayout parse_memory_layout(std::string_view s);
Fusion parse_fusion(std::string_view s);

/// Widths of the precomputed representations the model consumes.
struct FeatureDims {
  std::size_t image = 2048;     // object features per image
  std::size_t scene = 2048;     // place features per image
  std::size_t sentence = 768;   // pooled sentence embedding
  std::size_t token = 768;      // contextual token embedding
  std::size_t clip = 512;       // joint image/text embedding

  friend bool operator==(const FeatureDims&, const FeatureDims&) = default;
};

/// Widths of the learned layers.
struct ModelDims {
  std::size_t visual_mem = 1024;
  std::size_t domain = 20;
  std::size_t lstm_hidden = 256;
  std::size_t classifier_hidden = 1024;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct DropoutRates {
  double input = 0.05;
  double domain = 0.25;
  double memory = 0.25;

  friend bool operator==(const DropoutRates&, const DropoutRates&) = default;
};

/// Architecture and ablation switches. The defaults are the strongest
/// configuration: every evidence type and side feature, CLIP, batch norm,
/// token-level LSTM text encoding, separate memories, concatenation fusion.
struct CcnConfig {
  bool use_images = true;
  bool use_captions = true;
  bool use_entities = true;
  bool use_scenes = true;
  bool use_labels_feature = true;
  bool use_ner_feature = true;
  bool use_domains = true;
  bool use_clip = true;
  bool use_bn = true;
  TextEncoder text_encoder = TextEncoder::token_lstm_512;
  MemoryLayout memory_layout = MemoryLayout::separate;
  Fusion fusion = Fusion::concat;
  // Replace every query with a learned constant, hiding the claim from the
  // memories. Requires CLIP and the query-dependent side features off.
  bool evidence_only = false;

  FeatureDims features;
  ModelDims dims;
  DropoutRates dropout;

  // Text embedding width d seen by the entity and sentence memories.
  std::size_t text_dim() const;
  bool token_path() const { return text_encoder == TextEncoder::token_lstm_512; }
  // Width of the items a memory consumes, side features and domain included.
  std::size_t item_dim(MemoryKind kind) const;
  // Width of the projected query / memory vectors.
  std::size_t mem_dim(MemoryKind kind) const;
  std::size_t side_width(MemoryKind kind) const;
  bool uses_domain(MemoryKind kind) const;
  bool memory_enabled(MemoryKind kind) const;

  // Throws ConfigError on an inconsistent combination.
  void validate() const;

  // Stable digest of the JSON form.
  std::string fingerprint() const;

  friend bool operator==(const CcnConfig&, const CcnConfig&) = default;
};

nlohmann::json to_json(const CcnConfig& c);
CcnConfig config_from_json(const nlohmann::json& j);

// Copy of `base` turned into the evidence-only probe.
CcnConfig evidence_only_config(CcnConfig base);

// 64-bit FNV-1a digest as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace ccn
