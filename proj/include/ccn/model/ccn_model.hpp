#pragma once

#include <optional>
#include <vector>

#include "ccn/math/lstm.hpp"
#include "ccn/model/memory.hpp"
#include "ccn/model/model.hpp"

namespace ccn {

// Memories a configuration instantiates, in fusion order.
std::vector<MemoryKind> active_memories(const CcnConfig& config);
// Width of the fused vector o_t fed to the classifier.
std::size_t fused_width(const CcnConfig& config);

/// The consistency-checking network: attention memories over visual and
/// textual evidence, the joint image/caption embedding, fusion and the
/// classifier head.
class CcnModel final : public Model {
 public:
  CcnModel(const CcnConfig& config, std::size_t domain_rows, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::ccn; }
  const CcnConfig& batch_config() const override { return config_; }
  const CcnConfig& config() const { return config_; }

  Tensor forward(const Batch& batch, Mode mode, Rng& rng) override;
  void backward(const Tensor& dprob) override;
  ParameterList parameters() override;
  BufferList buffers() override;
  const std::vector<AttentionRecord>& attention() const override { return attention_; }

  // Memory outputs o of the last forward, in fusion order.
  const std::vector<Tensor>& memory_outputs() const { return outputs_; }
  // Projected queries of the last forward, in fusion order.
  std::vector<Tensor> memory_queries() const;
  // Fused vector o_t of the last forward.
  const Tensor& fused() const { return fused_; }

  ClassifierHead& head() { return head_; }

 private:
  // Everything one memory needs from the batch, already padded.
  struct UnitInput {
    std::size_t b = 0, J = 0;
    Tensor visual;                  // b x J x fv, empty without a visual part
    std::vector<long> text_rows;    // b*J rows of the text table (-1 for none)
    Tensor side;                    // b x J x s
    bool domains = false;
    std::vector<int> domain_ids;    // b*J, -1 for padding
    Mask mask;
    Tensor visual_query;            // b x fq, empty without
    std::vector<long> caption_rows; // b, empty without a text query part
    std::vector<std::string> keys, texts;
  };

  struct Unit {
    MemoryKind kind;
    std::string name;
    std::size_t visual_width = 0;  // fv
    bool text_part = false;
    std::size_t mem_dim = 0;
    Linear query_proj;  // visual query -> visual_mem
    bool has_query_proj = false;
    Parameter constant_query;  // evidence-only
    MemoryBank bank;
    Dropout drop_items, drop_query, drop_domain, drop_ma, drop_mc;

    UnitInput in;
    Tensor item, m_a, m_c, query, p, o;
    std::vector<std::size_t> item_widths;
  };

  UnitInput gather_input(const Unit& u, const Batch& batch) const;
  void forward_unit(Unit& u, Mode mode, Rng& rng);
  void backward_unit(Unit& u, const Tensor& dout);
  void build_text_table(const Batch& batch, Mode mode, Rng& rng);

  CcnConfig config_;
  Embedding domain_;
  bool use_domain_table_ = false;
  std::optional<LstmEncoder> lstm_;
  Dropout drop_text_;
  std::vector<Unit> units_;
  std::vector<Linear> align_;  // per unit, for non-concat fusion
  std::vector<bool> aligned_;
  std::vector<BatchNorm> unit_bn_;
  BatchNorm clip_bn_;
  ClassifierHead head_;

  // Text table of the last forward: captions first, then evidence items.
  std::vector<const Tensor*> text_sequences_;
  Tensor text_table_;
  Tensor dtext_table_;
  std::size_t batch_size_ = 0;
  // Row indices of the text table per memory kind (b*J, -1 for none).
  std::vector<long> sentence_rows_, entity_rows_;
  std::size_t sentence_J_ = 0, entity_J_ = 0;

  std::vector<Tensor> outputs_;
  std::vector<Tensor> aligned_out_;
  std::vector<Tensor> normed_;
  Tensor clip_joint_;
  Tensor fused_;
  Tensor probs_;
  std::vector<std::size_t> fused_widths_;
  std::vector<AttentionRecord> attention_;
};

}  // namespace ccn
