#include "ccn/model/baselines.hpp"

#include "ccn/errors.hpp"
#include "ccn/model/memory.hpp"

namespace ccn {

namespace {

// mean_j (query[i] * items[i, j]) over the valid items; zero without items.
void pool_products(const MemoryBatch& m, Tensor& out, std::size_t offset) {
  const std::size_t width = m.query.dim(1);
  for (std::size_t i = 0; i < m.batch; ++i) {
    const std::size_t n = m.valid_items(i);
    if (n == 0) continue;
    for (std::size_t j = 0; j < m.max_items; ++j) {
      if (!m.mask(i, j)) continue;
      for (std::size_t k = 0; k < width; ++k) {
        out(i, offset + k) += m.query(i, k) * m.items(i, j, k) / static_cast<double>(n);
      }
    }
  }
}

Tensor probabilities(const Tensor& logits) {
  Tensor p({logits.size()});
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = sigmoid(logits[i]);
  return p;
}

Tensor logit_grad(const Tensor& dprob, const Tensor& probs) {
  if (dprob.size() != probs.size()) throw DimensionError("backward: batch size mismatch");
  Tensor d({probs.size()});
  for (std::size_t i = 0; i < probs.size(); ++i) d[i] = dprob[i] * probs[i] * (1.0 - probs[i]);
  return d;
}

}  // namespace

CcnConfig AveragedModel::restrict(CcnConfig c) {
  c.use_images = true;
  c.use_captions = true;
  c.use_entities = false;
  c.use_scenes = false;
  c.use_clip = false;
  c.use_labels_feature = false;
  c.use_ner_feature = false;
  c.use_domains = false;
  c.evidence_only = false;
  c.text_encoder = TextEncoder::sentence_768;
  c.memory_layout = MemoryLayout::separate;
  c.fusion = Fusion::concat;
  return c;
}

AveragedModel::AveragedModel(const CcnConfig& config, std::uint64_t seed) : config_(restrict(config)) {
  config_.validate();
  Rng rng(seed);
  head_ = ClassifierHead("classifier", config_.features.image + config_.features.sentence,
                         config_.dims.classifier_hidden, rng);
}

Tensor AveragedModel::forward(const Batch& batch, Mode mode, Rng&) {
  if (!batch.image || !batch.sentence || batch.sentence->token_path()) {
    throw ConfigError("averaged baseline needs image and dense sentence memories");
  }
  const std::size_t b = batch.size();
  pooled_ = Tensor({b, config_.features.image + config_.features.sentence});
  pool_products(*batch.image, pooled_, 0);
  pool_products(*batch.sentence, pooled_, config_.features.image);
  probs_ = probabilities(head_.forward(pooled_, mode));
  return probs_;
}

void AveragedModel::backward(const Tensor& dprob) { head_.backward(logit_grad(dprob, probs_)); }

ParameterList AveragedModel::parameters() {
  ParameterList p;
  head_.collect(p);
  return p;
}

BufferList AveragedModel::buffers() {
  BufferList b;
  head_.collect(b);
  return b;
}

CcnConfig ClipOnlyModel::restrict(CcnConfig c) {
  c.use_images = false;
  c.use_captions = false;
  c.use_entities = false;
  c.use_scenes = false;
  c.use_clip = true;
  c.evidence_only = false;
  c.memory_layout = MemoryLayout::separate;
  return c;
}

ClipOnlyModel::ClipOnlyModel(const CcnConfig& config, std::uint64_t seed) : config_(restrict(config)) {
  config_.validate();
  Rng rng(seed);
  head_ = Linear("clip_head", config_.features.clip, 1, rng);
}

Tensor ClipOnlyModel::forward(const Batch& batch, Mode, Rng&) {
  if (batch.clip_image.empty()) throw ConfigError("batch lacks the joint image/caption embeddings");
  const Tensor logits = head_.forward(clip_joint(batch.clip_image, batch.clip_text));
  probs_ = probabilities(logits);
  return probs_;
}

void ClipOnlyModel::backward(const Tensor& dprob) {
  head_.backward(logit_grad(dprob, probs_).reshaped({probs_.size(), 1}));
}

ParameterList ClipOnlyModel::parameters() {
  ParameterList p;
  head_.collect(p);
  return p;
}

}  // namespace ccn
