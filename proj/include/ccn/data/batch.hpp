#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccn/data/domain_vocab.hpp"
#include "ccn/data/embedding_store.hpp"
#include "ccn/data/example.hpp"
#include "ccn/math/tensor.hpp"
#include "ccn/model/config.hpp"

namespace ccn {

/// Padded evidence items of one memory for a batch of b examples.
///
/// Items are padded to J = the largest item count in the batch; mask(i, j) is
/// set iff j is below example i's item count and padded rows are all zero.
/// Dense text and image memories fill `query`/`items`; the token path fills
/// `query_tokens`/`item_tokens` with pointers into the embedding store, which
/// must outlive the batch.
struct MemoryBatch {
  MemoryKind kind = MemoryKind::image;
  std::size_t batch = 0;
  std::size_t max_items = 0;

  Tensor query;  // b x q
  Tensor items;  // b x J x f
  std::vector<const Tensor*> query_tokens;  // b
  std::vector<const Tensor*> item_tokens;   // b*J, nullptr for padding

  Tensor side;                  // b x J x s, s in {0, 1}
  std::vector<int> domain_ids;  // b*J, empty when domains are off
  Mask mask;

  std::vector<std::string> item_keys;   // b*J store key or image id, "" for padding
  std::vector<std::string> item_texts;  // b*J display text, "" for padding

  bool token_path() const { return !query_tokens.empty(); }
  std::size_t valid_items(std::size_t i) const { return mask.count_row(i); }
};

struct Batch {
  std::vector<std::string> example_ids;
  std::vector<double> labels;  // 1 falsified, 0 pristine, -1 unlabeled
  std::optional<MemoryBatch> image;
  std::optional<MemoryBatch> scene;
  std::optional<MemoryBatch> entity;
  std::optional<MemoryBatch> sentence;
  Tensor clip_image;  // b x clip, empty when CLIP is off
  Tensor clip_text;

  std::size_t size() const { return example_ids.size(); }
  const MemoryBatch* memory(MemoryKind kind) const;
};

// Builds the memories the configuration needs (image, scene, entity,
// sentence; the unified layout is assembled from the first, third and fourth
// inside the model). Throws ValidationError naming the example and key of any
// missing embedding.
Batch assemble_batch(std::span<const ExampleRecord* const> examples, const EmbeddingStore& store,
                     const DomainVocabulary& vocab, const CcnConfig& config);

Batch assemble_batch(const std::vector<ExampleRecord>& examples, const EmbeddingStore& store,
                     const DomainVocabulary& vocab, const CcnConfig& config);

}  // namespace ccn
