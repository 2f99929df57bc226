#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ccn/data/batch.hpp"
#include "ccn/math/layers.hpp"
#include "ccn/model/config.hpp"

namespace ccn {

/// Attention of one memory over the valid items of each example, in item
/// order.
struct AttentionRecord {
  std::string memory;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<std::string>> item_keys;
  std::vector<std::vector<std::string>> item_texts;
};

enum class ModelKind { ccn, averaged, clip_only };
std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

/// FC(in -> hidden) -> ReLU -> BN -> FC(hidden -> 1), producing logits.
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);

  // x [b x in] -> logits [b]
  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& dlogits);

  Linear& fc1() { return fc1_; }
  Linear& fc2() { return fc2_; }
  BatchNorm& bn() { return bn_; }
  void collect(ParameterList& p) {
    fc1_.collect(p);
    bn_.collect(p);
    fc2_.collect(p);
  }
  void collect(BufferList& b) { bn_.collect(b); }

 private:
  Linear fc1_;
  BatchNorm bn_;
  Linear fc2_;
  Tensor hidden_;
};

/// Common interface of the CCN and the baselines: p_f = model(batch).
class Model {
 public:
  virtual ~Model() = default;

  virtual ModelKind kind() const = 0;
  // Configuration the batches for this model must be assembled with.
  virtual const CcnConfig& batch_config() const = 0;

  // Returns p_f [b]. Train mode applies dropout and batch statistics.
  virtual Tensor forward(const Batch& batch, Mode mode, Rng& rng) = 0;
  // Accumulates parameter gradients for dL/dp_f [b] of the last forward.
  virtual void backward(const Tensor& dprob) = 0;

  virtual ParameterList parameters() = 0;
  virtual BufferList buffers() = 0;

  // Attention of the last forward; empty for models without memories.
  virtual const std::vector<AttentionRecord>& attention() const;

  void zero_grad();
};

// Builds a freshly initialized model. `domain_rows` is the vocabulary size
// including UNK.
std::unique_ptr<Model> make_model(ModelKind kind, const CcnConfig& config, std::size_t domain_rows,
                                  std::uint64_t seed);

}  // namespace ccn
