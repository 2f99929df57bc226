#include "ccn/train/gradient_suite.hpp"

#include <functional>

#include "ccn/data/batch.hpp"
#include "ccn/data/domain_vocab.hpp"
#include "ccn/model/ccn_model.hpp"
#include "ccn/model/memory.hpp"
#include "ccn/model/model.hpp"
#include "ccn/train/synthetic.hpp"

namespace ccn {

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal();
  return t;
}

// Scalar objective sum(w * y) with fixed random weights w.
struct Probe {
  Tensor weights;
  Probe(const Shape& shape, Rng& rng) : weights(random_tensor(shape, rng)) {}
  double operator()(const Tensor& y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * y[i];
    return s;
  }
};

void zero(std::initializer_list<Parameter*> ps) {
  for (Parameter* p : ps) p->zero_grad();
}

GradcheckReport check_linear(Rng& rng, double h) {
  Linear layer("fc", 4, 3, rng);
  Parameter x("x", random_tensor({2, 5, 4}, rng));
  const Probe probe({2, 5, 3}, rng);
  Objective f = [&](bool g) {
    const Tensor y = layer.forward(x.value);
    if (g) {
      zero({&layer.weight(), &layer.bias()});
      x.grad = layer.backward(probe.weights);
    }
    return probe(y);
  };
  std::vector<Parameter*> ps{&layer.weight(), &layer.bias(), &x};
  return gradcheck(f, ps, h);
}

GradcheckReport check_masked_softmax(Rng& rng, double h) {
  Parameter x("logits", random_tensor({3, 4}, rng));
  Mask mask(3, 4);
  for (std::size_t j = 0; j < 4; ++j) mask.set(0, j, true);
  mask.set(1, 2, true);
  mask.set(2, 0, true);
  mask.set(2, 3, true);
  const Probe probe({3, 4}, rng);
  Objective f = [&](bool g) {
    const Tensor p = masked_softmax(x.value, mask);
    if (g) x.grad = masked_softmax_backward(p, probe.weights);
    return probe(p);
  };
  std::vector<Parameter*> ps{&x};
  return gradcheck(f, ps, h);
}

GradcheckReport check_batchnorm(Rng& rng, double h, Mode mode) {
  BatchNorm bn("bn", 3);
  for (double& v : bn.gamma().value.data()) v = 1.0 + 0.3 * rng.normal();
  for (double& v : bn.beta().value.data()) v = 0.3 * rng.normal();
  for (double& v : bn.running_mean().value.data()) v = rng.normal();
  for (double& v : bn.running_var().value.data()) v = 0.5 + rng.uniform();
  const Tensor mean = bn.running_mean().value, var = bn.running_var().value;
  Parameter x("x", random_tensor({5, 3}, rng));
  const Probe probe({5, 3}, rng);
  Objective f = [&](bool g) {
    bn.running_mean().value = mean;
    bn.running_var().value = var;
    const Tensor y = bn.forward(x.value, mode);
    if (g) {
      zero({&bn.gamma(), &bn.beta()});
      x.grad = bn.backward(probe.weights);
    }
    return probe(y);
  };
  std::vector<Parameter*> ps{&bn.gamma(), &bn.beta(), &x};
  return gradcheck(f, ps, h);
}

GradcheckReport check_embedding(Rng& rng, double h) {
  Embedding table("domain", 5, 3, rng);
  const std::vector<int> ids{0, 3, 3, 1};
  const Probe probe({4, 3}, rng);
  Objective f = [&](bool g) {
    const Tensor y = table.forward(ids);
    if (g) {
      table.table().zero_grad();
      table.backward(probe.weights);
    }
    return probe(y);
  };
  std::vector<Parameter*> ps{&table.table()};
  return gradcheck(f, ps, h);
}

GradcheckReport check_lstm(Rng& rng, double h) {
  LstmEncoder lstm("lstm", 3, 2, rng);
  Parameter a("seq_a", random_tensor({4, 3}, rng));
  Parameter b("seq_b", random_tensor({1, 3}, rng));
  const Probe probe({2, 4}, rng);
  Objective f = [&](bool g) {
    const std::vector<const Tensor*> seqs{&a.value, &b.value};
    const Tensor y = lstm.encode_batch(seqs);
    if (g) {
      zero({&lstm.w_input(), &lstm.w_hidden(), &lstm.bias()});
      auto dx = lstm.backward_batch(probe.weights, true);
      a.grad = dx[0];
      b.grad = dx[1];
    }
    return probe(y);
  };
  std::vector<Parameter*> ps{&lstm.w_input(), &lstm.w_hidden(), &lstm.bias(), &a, &b};
  return gradcheck(f, ps, h);
}

// Embedding, attention and output of one memory with a partly masked batch.
GradcheckReport check_memory(Rng& rng, double h) {
  MemoryBank bank("mem", 4, 3, rng);
  Parameter items("items", random_tensor({3, 3, 4}, rng));
  Parameter query("query", random_tensor({3, 3}, rng));
  Mask mask(3, 3);
  for (std::size_t j = 0; j < 3; ++j) mask.set(0, j, true);
  mask.set(1, 1, true);
  const Probe probe({3, 3}, rng);
  Objective f = [&](bool g) {
    Tensor m_a, m_c;
    bank.embed(items.value, m_a, m_c);
    const Tensor p = attend(query.value, m_a, mask);
    const Tensor o = memory_output(p, m_c, query.value, mask);
    if (g) {
      zero({&bank.input().weight(), &bank.input().bias(), &bank.output().weight(), &bank.output().bias()});
      const OutputGrad og = memory_output_backward(p, m_c, probe.weights);
      const AttendGrad ag = attend_backward(query.value, m_a, p, og.p);
      items.grad = bank.backward(ag.m_a, og.m_c);
      query.grad = og.query_hat;
      for (std::size_t i = 0; i < query.grad.size(); ++i) query.grad[i] += ag.query_hat[i];
    }
    return probe(o);
  };
  std::vector<Parameter*> ps{&bank.input().weight(), &bank.input().bias(), &bank.output().weight(),
                             &bank.output().bias(), &items, &query};
  return gradcheck(f, ps, h);
}

GradcheckReport check_combine(Rng& rng, double h, Fusion mode) {
  Parameter a("part_a", random_tensor({3, 4}, rng));
  Parameter b("part_b", random_tensor({3, 4}, rng));
  Parameter c("part_c", random_tensor({3, 4}, rng));
  const Probe probe({3, 4}, rng);
  Objective f = [&](bool g) {
    const std::vector<Tensor> parts{a.value, b.value, c.value};
    const Tensor y = combine(mode, parts);
    if (g) {
      const auto d = combine_backward(mode, parts, probe.weights);
      a.grad = d[0];
      b.grad = d[1];
      c.grad = d[2];
    }
    return probe(y);
  };
  std::vector<Parameter*> ps{&a, &b, &c};
  return gradcheck(f, ps, h);
}

GradcheckReport check_head(Rng& rng, double h) {
  ClassifierHead head("head", 4, 3, rng);
  Parameter x("x", random_tensor({5, 4}, rng));
  const Probe probe({5}, rng);
  Objective f = [&](bool g) {
    const Tensor y = head.forward(x.value, Mode::train);
    if (g) {
      ParameterList ps;
      head.collect(ps);
      for (Parameter* p : ps) p->zero_grad();
      x.grad = head.backward(probe.weights);
    }
    return probe(y);
  };
  ParameterList ps;
  head.collect(ps);
  ps.push_back(&x);
  return gradcheck(f, ps, h);
}

struct ModelVariant {
  std::string name;
  CcnConfig config;
  ModelKind kind = ModelKind::ccn;
};

std::vector<ModelVariant> model_variants(const CcnConfig& base) {
  std::vector<ModelVariant> v;
  v.push_back({"model/full_token", base});
  CcnConfig dense = base;
  dense.text_encoder = TextEncoder::sentence_768;
  v.push_back({"model/full_dense", dense});
  CcnConfig unified = base;
  unified.memory_layout = MemoryLayout::unified;
  v.push_back({"model/unified", unified});
  for (Fusion f : {Fusion::avg_pool, Fusion::max_pool, Fusion::multiply}) {
    CcnConfig x = base;
    x.fusion = f;
    v.push_back({"model/" + std::string(to_string(f)), x});
  }
  CcnConfig nobn = base;
  nobn.use_bn = false;
  v.push_back({"model/no_bn", nobn});
  v.push_back({"model/evidence_only", evidence_only_config(base)});
  v.push_back({"model/averaged", dense, ModelKind::averaged});
  v.push_back({"model/clip_only", base, ModelKind::clip_only});
  return v;
}

SyntheticSpec tiny_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.n_train = 4;
  s.n_val = 0;
  s.latent_dim = 3;
  s.features = {5, 4, 3, 3, 4};
  s.max_images = 3;
  s.max_sentences = 3;
  s.max_entities = 2;
  s.label_pool = 12;
  s.entity_pool = 12;
  s.domain_pool = 4;
  s.reliable_domains = 2;
  s.text_scale = 1.0;
  s.image_scale = 1.0;
  s.image_offset = 0.0;
  s.seed = seed;
  return s;
}

}  // namespace

std::vector<GradientCheck> run_gradient_suite(const std::vector<std::uint64_t>& seeds, double h) {
  std::vector<GradientCheck> out;
  for (std::uint64_t seed : seeds) {
    Rng rng(seed);
    out.push_back({"layer/linear", seed, check_linear(rng, h)});
    out.push_back({"layer/masked_softmax", seed, check_masked_softmax(rng, h)});
    out.push_back({"layer/batchnorm_train", seed, check_batchnorm(rng, h, Mode::train)});
    out.push_back({"layer/batchnorm_eval", seed, check_batchnorm(rng, h, Mode::eval)});
    out.push_back({"layer/embedding", seed, check_embedding(rng, h)});
    out.push_back({"layer/lstm", seed, check_lstm(rng, h)});
    out.push_back({"layer/memory", seed, check_memory(rng, h)});
    for (Fusion f : {Fusion::avg_pool, Fusion::max_pool, Fusion::multiply}) {
      out.push_back({"layer/combine_" + std::string(to_string(f)), seed, check_combine(rng, h, f)});
    }
    out.push_back({"layer/classifier", seed, check_head(rng, h)});

    const SyntheticSpec spec = tiny_spec(seed);
    const SyntheticData data = generate_synthetic(spec);
    const DomainVocabulary vocab = DomainVocabulary::build(data.examples, 1);
    CcnConfig base = synthetic_model_config(spec);
    base.dims = {3, 2, 2, 4};
    base.dropout = {0, 0, 0};
    for (const auto& variant : model_variants(base)) {
      auto model = make_model(variant.kind, variant.config, vocab.rows(), seed);
      const Batch batch = assemble_batch(data.examples, data.store, vocab, model->batch_config());
      Objective f = [&](bool g) {
        Rng dropout_rng(0);
        const Tensor p = model->forward(batch, Mode::train, dropout_rng);
        const std::size_t b = p.size();
        double loss = 0.0;
        Tensor dp({b});
        for (std::size_t i = 0; i < b; ++i) {
          loss += bce_loss(p[i], batch.labels[i]) / static_cast<double>(b);
          dp[i] = bce_grad(p[i], batch.labels[i]) / static_cast<double>(b);
        }
        if (g) {
          model->zero_grad();
          model->backward(dp);
        }
        return loss;
      };
      const ParameterList params = model->parameters();
      out.push_back({variant.name, seed, gradcheck(f, params, h)});
    }
  }
  return out;
}

}  // namespace ccn
