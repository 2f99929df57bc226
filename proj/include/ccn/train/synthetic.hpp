#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ccn/data/embedding_store.hpp"
#include "ccn/data/example.hpp"
#include "ccn/model/config.hpp"

namespace ccn {

enum class EvidenceMode {
  informative,        // evidence is retrieved for the claim's own events
  label_independent,  // evidence comes from unrelated events for every example
  label_leaking,      // falsified examples' evidence carries a shared offset
};
std::string_view to_string(EvidenceMode m);
EvidenceMode parse_evidence_mode(std::string_view s);

/// Generator settings. Every example draws a latent event for its image and
/// one for its caption (the same event when pristine). Caption search returns
/// images of the caption event; image search returns text about the image
/// event. An event has independent visual and semantic latents: image and
/// scene features project the visual one, text and joint embeddings the
/// semantic one, each through a fixed random map plus noise. Without the
/// joint embedding, a claim image and caption therefore carry no information
/// about each other. Every example has a topic, and all of its events are
/// drawn around that topic.
struct SyntheticSpec {
  std::size_t n_train = 2000;
  std::size_t n_val = 500;
  std::size_t n_test = 0;
  double falsified_share = 0.5;

  std::size_t latent_dim = 16;
  FeatureDims features{48, 48, 32, 16, 16};

  // Share of an event's latent variance that comes from its example's topic.
  // Falsified captions and unrelated evidence are drawn from the same topic,
  // so they resemble the claim without matching it.
  double topic_share = 0.3;
  // Scale of the event component in every embedding; 0 removes all signal.
  double signal = 1.0;
  double noise = 0.6;
  EvidenceMode evidence_mode = EvidenceMode::informative;
  bool clip_signal = true;
  double clip_noise = 1.5;
  double leak_strength = 1.5;
  // Per-modality output scale and offset, mimicking backbones whose
  // embeddings live on very different scales (pooled CNN activations are
  // large and positive, sentence embeddings are small).
  double image_scale = 1.5, image_offset = 1.0;
  double text_scale = 0.1;

  // Evidence counts per example when the modality is present.
  std::size_t min_images = 1, max_images = 6;
  std::size_t min_sentences = 1, max_sentences = 6;
  std::size_t min_entities = 1, max_entities = 3;
  // Chance that an example has no visual (or no textual) evidence. The two
  // never happen together.
  double missing_images = 0.3;
  double missing_sentences = 0.3;
  // Chance that an evidence item is about the searched event rather than an
  // unrelated one. The first item of a present modality always is.
  double relevant_rate = 0.6;
  // Chance that a falsified example with both modalities gets one item that
  // does match the claim, in one modality picked at random (an image of the
  // claim image's event, or text about the caption's event).
  double spurious_match_rate = 0.15;
  // Chance that an entity string belongs to the image event.
  double entity_relevant_rate = 0.25;

  std::size_t label_pool = 200, labels_per_event = 4;
  std::size_t entity_pool = 300, entities_per_event = 4;
  std::size_t domain_pool = 24, reliable_domains = 8;
  // Chance that a relevant item comes from a reliable domain.
  double reliable_rate = 0.7;

  std::uint64_t seed = 1;

  // Throws ConfigError on an inconsistent spec.
  void validate() const;
};

nlohmann::json to_json(const SyntheticSpec& s);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

struct SyntheticData {
  std::vector<ExampleRecord> examples;  // splits set, train first
  EmbeddingStore store;
};

// Deterministic in the spec (seed included).
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Model configuration whose feature widths match the spec, with learned layer
// widths scaled down for desk-scale runs.
CcnConfig synthetic_model_config(const SyntheticSpec& spec);

}  // namespace ccn
