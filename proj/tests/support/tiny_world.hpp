#pragma once

#include <string>
#include <vector>

#include "ccn/data/domain_vocab.hpp"
#include "ccn/data/embedding_store.hpp"
#include "ccn/data/example.hpp"
#include "ccn/math/rng.hpp"
#include "ccn/model/config.hpp"

namespace ccn::testing {

// Small widths so that brute-force checks and finite differences stay cheap.
inline CcnConfig tiny_config(TextEncoder encoder = TextEncoder::token_lstm_512) {
  CcnConfig c;
  c.text_encoder = encoder;
  c.features = {5, 4, 3, 3, 4};
  c.dims.visual_mem = 3;
  c.dims.domain = 2;
  c.dims.lstm_hidden = 2;
  c.dims.classifier_hidden = 4;
  return c;
}

inline ExampleRecord tiny_example(const std::string& id, std::size_t images, std::size_t entities,
                                  std::size_t sentences, Label label = Label::pristine) {
  ExampleRecord ex;
  ex.id = id;
  ex.query_image_id = id + "_img";
  ex.query_caption = "caption of " + id;
  ex.query_domain = "query.example";
  for (std::size_t k = 0; k < images; ++k) {
    ex.evidence_images.push_back(
        {id + "_ev" + std::to_string(k), k % 2 ? "b.example" : "a.example", ImageSource::direct_image_search});
  }
  for (std::size_t k = 0; k < entities; ++k) ex.entities.push_back("Entity " + std::to_string(k));
  for (std::size_t k = 0; k < sentences; ++k) {
    ex.sentences.push_back({"sentence " + std::to_string(k) + " of " + id, SentenceKind::caption,
                            k % 2 ? "a.example" : "c.example", "https://a.example/p", MatchedBy::url});
  }
  ex.label = label;
  return ex;
}

inline std::vector<double> random_values(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// Fills every section the examples reference with random values.
inline EmbeddingStore tiny_store(const std::vector<ExampleRecord>& examples, const CcnConfig& c,
                                 std::uint64_t seed = 1) {
  Rng rng(seed);
  EmbeddingStore s;
  s.declare(Section::image_obj, c.features.image);
  s.declare(Section::image_scene, c.features.scene);
  s.declare(Section::sentence, c.features.sentence);
  s.declare(Section::tokens, c.features.token);
  s.declare(Section::clip_image, c.features.clip);
  s.declare(Section::clip_text, c.features.clip);
  auto image = [&](const std::string& id, std::size_t k) {
    s.put_vector(Section::image_obj, id, random_values(c.features.image, rng));
    s.put_vector(Section::image_scene, id, random_values(c.features.scene, rng));
    std::vector<std::string> labels{"sky", k % 2 ? "tree" : "car"};
    s.put_strings(Section::image_labels, id, labels);
  };
  auto text = [&](const std::string& key, std::size_t len) {
    s.put_vector(Section::sentence, key, random_values(c.features.sentence, rng));
    Tensor t({len, c.features.token});
    for (double& v : t.data()) v = rng.normal();
    s.put_tokens(key, t);
  };
  for (const auto& ex : examples) {
    image(ex.query_image_id, 0);
    s.put_vector(Section::clip_image, ex.query_image_id, random_values(c.features.clip, rng));
    text(caption_key(ex), 3);
    s.put_vector(Section::clip_text, caption_key(ex), random_values(c.features.clip, rng));
    s.put_strings(Section::caption_entities, caption_key(ex), {"Entity 1", "Paris"});
    for (std::size_t k = 0; k < ex.evidence_images.size(); ++k) image(ex.evidence_images[k].image_id, k);
    for (std::size_t k = 0; k < ex.sentences.size(); ++k) {
      text(sentence_key(ex, k), 2 + k % 3);
      if (k % 2 == 0) s.put_strings(Section::caption_entities, sentence_key(ex, k), {"paris"});
    }
    for (std::size_t k = 0; k < ex.entities.size(); ++k) text(entity_key(ex, k), 1 + k % 2);
  }
  return s;
}

}  // namespace ccn::testing
