#include "ccn/data/batch.hpp"

#include <algorithm>

#include "ccn/errors.hpp"
#include "ccn/evidence/text.hpp"

namespace ccn {

namespace {

const std::vector<std::string> kNoStrings;

const std::vector<std::string>& strings_or_empty(const EmbeddingStore& store, Section s,
                                                 const std::string& key) {
  const auto* found = store.find_strings(s, key);
  return found ? *found : kNoStrings;
}

// One evidence item of one example before padding.
struct ItemRef {
  std::string key;
  std::string text;
  std::string domain;
  double side = 0.0;
};

class Assembler {
 public:
  Assembler(std::span<const ExampleRecord* const> examples, const EmbeddingStore& store,
            const DomainVocabulary& vocab, const CcnConfig& config)
      : examples_(examples), store_(store), vocab_(vocab), config_(config) {}

  const Tensor& vector(Section s, const ExampleRecord& ex, const std::string& key) const {
    if (!store_.contains(s, key)) {
      throw ValidationError("example '" + ex.id + "': missing " + std::string(section_name(s)) +
                            " embedding for key '" + key + "'");
    }
    return store_.vector(s, key);
  }

  const Tensor& tokens(const ExampleRecord& ex, const std::string& key) const {
    if (!store_.contains(Section::tokens, key)) {
      throw ValidationError("example '" + ex.id + "': missing tokens embedding for key '" + key +
                            "'");
    }
    return store_.tokens(key);
  }

  std::vector<ItemRef> items_of(MemoryKind kind, const ExampleRecord& ex, bool enabled) const {
    std::vector<ItemRef> out;
    if (!enabled) return out;
    const bool side = config_.side_width(kind) > 0;
    switch (kind) {
      case MemoryKind::image:
      case MemoryKind::scene: {
        const auto& query_labels = strings_or_empty(store_, Section::image_labels, ex.query_image_id);
        for (const auto& img : ex.evidence_images) {
          ItemRef r{img.image_id, img.image_id, img.domain, 0.0};
          if (kind == MemoryKind::image && side) {
            r.side = static_cast<double>(label_overlap_count(
                query_labels, strings_or_empty(store_, Section::image_labels, img.image_id)));
          }
          out.push_back(std::move(r));
        }
        break;
      }
      case MemoryKind::sentence: {
        const auto& query_entities =
            strings_or_empty(store_, Section::caption_entities, caption_key(ex));
        for (std::size_t j = 0; j < ex.sentences.size(); ++j) {
          const auto& s = ex.sentences[j];
          ItemRef r{sentence_key(ex, j), s.text, s.domain, 0.0};
          if (side) {
            r.side = ner_overlap_flag(query_entities,
                                      strings_or_empty(store_, Section::caption_entities, r.key));
          }
          out.push_back(std::move(r));
        }
        break;
      }
      case MemoryKind::entity: {
        const auto& query_entities =
            strings_or_empty(store_, Section::caption_entities, caption_key(ex));
        for (std::size_t j = 0; j < ex.entities.size(); ++j) {
          ItemRef r{entity_key(ex, j), ex.entities[j], "", 0.0};
          if (side) {
            std::vector<std::string> own{ex.entities[j]};
            const auto& extra = strings_or_empty(store_, Section::caption_entities, r.key);
            own.insert(own.end(), extra.begin(), extra.end());
            r.side = ner_overlap_flag(query_entities, own);
          }
          out.push_back(std::move(r));
        }
        break;
      }
      case MemoryKind::unified: break;
    }
    return out;
  }

  MemoryBatch build(MemoryKind kind, bool items_enabled) const {
    const std::size_t b = examples_.size();
    std::vector<std::vector<ItemRef>> per_example(b);
    std::size_t J = 0;
    for (std::size_t i = 0; i < b; ++i) {
      per_example[i] = items_of(kind, *examples_[i], items_enabled);
      J = std::max(J, per_example[i].size());
    }

    const bool visual = kind == MemoryKind::image || kind == MemoryKind::scene;
    const bool tokens_path = !visual && config_.token_path();
    const Section feature = kind == MemoryKind::image   ? Section::image_obj
                            : kind == MemoryKind::scene ? Section::image_scene
                                                        : Section::sentence;
    const std::size_t width = kind == MemoryKind::image   ? config_.features.image
                              : kind == MemoryKind::scene ? config_.features.scene
                                                          : config_.features.sentence;
    const std::size_t s = config_.side_width(kind);

    MemoryBatch m;
    m.kind = kind;
    m.batch = b;
    m.max_items = J;
    m.mask = Mask(b, J);
    m.side = Tensor({b, J, s});
    m.item_keys.assign(b * J, "");
    m.item_texts.assign(b * J, "");
    if (config_.uses_domain(kind)) m.domain_ids.assign(b * J, DomainVocabulary::kUnk);

    if (tokens_path) {
      m.query_tokens.resize(b, nullptr);
      m.item_tokens.assign(b * J, nullptr);
    } else {
      m.query = Tensor({b, width});
      m.items = Tensor({b, J, width});
    }

    for (std::size_t i = 0; i < b; ++i) {
      const ExampleRecord& ex = *examples_[i];
      const std::string qkey = visual ? ex.query_image_id : caption_key(ex);
      if (tokens_path) {
        m.query_tokens[i] = &tokens(ex, qkey);
      } else {
        const auto& q = vector(feature, ex, qkey).data();
        std::copy(q.begin(), q.end(), m.query.data().begin() + static_cast<std::ptrdiff_t>(i * width));
      }
      const auto& items = per_example[i];
      for (std::size_t j = 0; j < items.size(); ++j) {
        const std::size_t slot = i * J + j;
        m.mask.set(i, j, true);
        m.item_keys[slot] = items[j].key;
        m.item_texts[slot] = items[j].text;
        if (s > 0) m.side(i, j, 0) = items[j].side;
        if (!m.domain_ids.empty()) m.domain_ids[slot] = vocab_.index(items[j].domain);
        if (tokens_path) {
          m.item_tokens[slot] = &tokens(ex, items[j].key);
        } else {
          const auto& v = vector(feature, ex, items[j].key).data();
          std::copy(v.begin(), v.end(), m.items.data().begin() + static_cast<std::ptrdiff_t>(slot * width));
        }
      }
    }
    return m;
  }

 private:
  std::span<const ExampleRecord* const> examples_;
  const EmbeddingStore& store_;
  const DomainVocabulary& vocab_;
  const CcnConfig& config_;
};

}  // namespace

const MemoryBatch* Batch::memory(MemoryKind kind) const {
  const std::optional<MemoryBatch>* slot = nullptr;
  switch (kind) {
    case MemoryKind::image: slot = &image; break;
    case MemoryKind::scene: slot = &scene; break;
    case MemoryKind::entity: slot = &entity; break;
    case MemoryKind::sentence: slot = &sentence; break;
    case MemoryKind::unified: return nullptr;
  }
  return slot && slot->has_value() ? &**slot : nullptr;
}

Batch assemble_batch(std::span<const ExampleRecord* const> examples, const EmbeddingStore& store,
                     const DomainVocabulary& vocab, const CcnConfig& config) {
  config.validate();
  const bool token_path = config.token_path();
  const bool unified = config.memory_layout == MemoryLayout::unified;
  const bool need_image = config.memory_enabled(MemoryKind::image) ||
                          config.memory_enabled(MemoryKind::unified);
  const bool need_text = config.memory_enabled(MemoryKind::entity) ||
                         config.memory_enabled(MemoryKind::sentence) ||
                         config.memory_enabled(MemoryKind::unified);
  if (need_image) store.require_dim(Section::image_obj, config.features.image);
  if (config.use_scenes) store.require_dim(Section::image_scene, config.features.scene);
  if (need_text) {
    if (token_path) {
      store.require_dim(Section::tokens, config.features.token);
    } else {
      store.require_dim(Section::sentence, config.features.sentence);
    }
  }
  if (config.use_clip) {
    store.require_dim(Section::clip_image, config.features.clip);
    store.require_dim(Section::clip_text, config.features.clip);
  }

  Batch batch;
  batch.example_ids.reserve(examples.size());
  batch.labels.reserve(examples.size());
  for (const ExampleRecord* ex : examples) {
    batch.example_ids.push_back(ex->id);
    batch.labels.push_back(ex->label ? label_value(*ex->label) : -1.0);
  }

  Assembler a(examples, store, vocab, config);
  // The unified memory draws its query from the image and caption sides, so
  // both are assembled even when one item type is switched off.
  if (unified) {
    if (config.memory_enabled(MemoryKind::unified)) {
      batch.image = a.build(MemoryKind::image, config.use_images);
      batch.sentence = a.build(MemoryKind::sentence, config.use_captions);
      batch.entity = a.build(MemoryKind::entity, config.use_entities);
    }
  } else {
    if (config.use_images) batch.image = a.build(MemoryKind::image, true);
    if (config.use_entities) batch.entity = a.build(MemoryKind::entity, true);
    if (config.use_captions) batch.sentence = a.build(MemoryKind::sentence, true);
  }
  if (config.use_scenes) batch.scene = a.build(MemoryKind::scene, true);

  if (config.use_clip) {
    const std::size_t b = examples.size();
    const std::size_t w = config.features.clip;
    batch.clip_image = Tensor({b, w});
    batch.clip_text = Tensor({b, w});
    for (std::size_t i = 0; i < b; ++i) {
      const ExampleRecord& ex = *examples[i];
      const auto& img = a.vector(Section::clip_image, ex, ex.query_image_id).data();
      const auto& txt = a.vector(Section::clip_text, ex, caption_key(ex)).data();
      std::copy(img.begin(), img.end(), batch.clip_image.data().begin() + static_cast<std::ptrdiff_t>(i * w));
      std::copy(txt.begin(), txt.end(), batch.clip_text.data().begin() + static_cast<std::ptrdiff_t>(i * w));
    }
  }
  return batch;
}

Batch assemble_batch(const std::vector<ExampleRecord>& examples, const EmbeddingStore& store,
                     const DomainVocabulary& vocab, const CcnConfig& config) {
  std::vector<const ExampleRecord*> ptrs;
  ptrs.reserve(examples.size());
  for (const auto& ex : examples) ptrs.push_back(&ex);
  return assemble_batch(ptrs, store, vocab, config);
}

}  // namespace ccn
