#pragma once

#include "ccn/model/model.hpp"

namespace ccn {

/// Memory-free baseline: each evidence item is multiplied elementwise with the
/// query of its modality, the products are averaged over the items, and the
/// pooled image and sentence vectors feed the classifier head.
class AveragedModel final : public Model {
 public:
  AveragedModel(const CcnConfig& config, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::averaged; }
  const CcnConfig& batch_config() const override { return config_; }

  Tensor forward(const Batch& batch, Mode mode, Rng& rng) override;
  void backward(const Tensor& dprob) override;
  ParameterList parameters() override;
  BufferList buffers() override;

  // Pooled input of the last forward [b x (image + sentence)].
  const Tensor& pooled() const { return pooled_; }

  // Batch configuration: image and dense sentence memories only.
  static CcnConfig restrict(CcnConfig config);

 private:
  CcnConfig config_;
  ClassifierHead head_;
  Tensor pooled_;
  Tensor probs_;
};

/// Linear classifier on the joint image/caption embedding.
class ClipOnlyModel final : public Model {
 public:
  ClipOnlyModel(const CcnConfig& config, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::clip_only; }
  const CcnConfig& batch_config() const override { return config_; }

  Tensor forward(const Batch& batch, Mode mode, Rng& rng) override;
  void backward(const Tensor& dprob) override;
  ParameterList parameters() override;
  BufferList buffers() override { return {}; }

  static CcnConfig restrict(CcnConfig config);

 private:
  CcnConfig config_;
  Linear head_;
  Tensor probs_;
};

}  // namespace ccn
