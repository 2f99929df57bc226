#include "ccn/model/model.hpp"

#include "ccn/errors.hpp"
#include "ccn/model/baselines.hpp"
#include "ccn/model/ccn_model.hpp"

namespace ccn {

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::ccn: return "ccn";
    case ModelKind::averaged: return "averaged";
    case ModelKind::clip_only: return "clip_only";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  for (ModelKind k : {ModelKind::ccn, ModelKind::averaged, ModelKind::clip_only}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

ClassifierHead::ClassifierHead(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng)
    : fc1_(name + ".fc1", in, hidden, rng), bn_(name + ".bn", hidden), fc2_(name + ".fc2", hidden, 1, rng) {}

Tensor ClassifierHead::forward(const Tensor& x, Mode mode) {
  hidden_ = relu(fc1_.forward(x));
  const Tensor logits = fc2_.forward(bn_.forward(hidden_, mode));
  return logits.reshaped({logits.dim(0)});
}

Tensor ClassifierHead::backward(const Tensor& dlogits) {
  const Tensor dz = fc2_.backward(dlogits.reshaped({dlogits.size(), 1}));
  return fc1_.backward(relu_backward(hidden_, bn_.backward(dz)));
}

const std::vector<AttentionRecord>& Model::attention() const {
  static const std::vector<AttentionRecord> kNone;
  return kNone;
}

void Model::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

std::unique_ptr<Model> make_model(ModelKind kind, const CcnConfig& config, std::size_t domain_rows,
                                  std::uint64_t seed) {
  switch (kind) {
    case ModelKind::ccn: return std::make_unique<CcnModel>(config, domain_rows, seed);
    case ModelKind::averaged: return std::make_unique<AveragedModel>(config, seed);
    case ModelKind::clip_only: return std::make_unique<ClipOnlyModel>(config, seed);
  }
  throw ConfigError("unknown model kind");
}

}  // namespace ccn
