#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "ccn/errors.hpp"
#include "ccn/math/optim.hpp"
#include "ccn/model/baselines.hpp"
#include "ccn/model/ccn_model.hpp"
#include "ccn/model/checkpoint.hpp"
#include "ccn/model/memory.hpp"
#include "test_util.hpp"
#include "tiny_world.hpp"

namespace ccn {
namespace {

using testing::random_tensor;
using testing::tiny_config;
using testing::tiny_example;
using testing::tiny_store;

// --- attention primitives -----------------------------------------------------

TEST(Attend, SingleItemGetsAllWeight) {
  const Tensor p = attend(Tensor::matrix({{0.3, -2}}), Tensor({1, 1, 2}, {4, 1}), Mask(1, 1, true));
  EXPECT_EQ(p(0, 0), 1.0);
}

TEST(Attend, IdenticalItemsSplitEvenly) {
  const Tensor p = attend(Tensor::matrix({{1, 2}}), Tensor({1, 2, 2}, {3, 1, 3, 1}), Mask(1, 2, true));
  EXPECT_EQ(p(0, 0), 0.5);
  EXPECT_EQ(p(0, 1), 0.5);
}

TEST(Attend, DotProductLogits) {
  const Tensor p = attend(Tensor::matrix({{1, 0}}), Tensor({1, 2, 2}, {1, 0, 0, 1}), Mask(1, 2, true));
  const double e = std::exp(1.0);
  EXPECT_NEAR(p(0, 0), e / (e + 1), 1e-15);
  EXPECT_NEAR(p(0, 0), 0.7310586, 1e-7);
  EXPECT_NEAR(p(0, 1), 0.2689414, 1e-7);
}

TEST(MemoryOutput, Examples) {
  const Tensor q = Tensor::matrix({{1, -1}});
  const Tensor mc({1, 2, 2}, {2, 3, 4, 5});
  Mask one(1, 2);
  one.set(0, 0, true);
  EXPECT_EQ(memory_output(Tensor::matrix({{1, 0}}), mc, q, one), Tensor::matrix({{3, 2}}));
  EXPECT_EQ(memory_output(Tensor::matrix({{0, 0}}), mc, q, Mask(1, 2)), q);
  EXPECT_EQ(memory_output(Tensor::matrix({{0.5, 0.5}}), mc, q, Mask(1, 2, true)),
            Tensor::matrix({{3 + 1, 4 - 1}}));
}

TEST(MemoryEmbed, ZeroItemsAndEmptyMemory) {
  Rng rng(1);
  MemoryBank bank("m", 3, 4, rng);
  Tensor a, c;
  bank.embed(Tensor({1, 1, 3}), a, c);
  for (double v : a.data()) EXPECT_EQ(v, 0.0);
  for (double v : c.data()) EXPECT_EQ(v, 0.0);
  bank.embed(Tensor({2, 0, 3}), a, c);
  EXPECT_EQ(a.shape(), (Shape{2, 0, 4}));
  EXPECT_THROW(bank.embed(Tensor({1, 1, 2}), a, c), ConfigError);
}

// Eqs. 1-4 evaluated with scalar loops in extended precision.
struct BruteMemory {
  std::vector<long double> p;
  std::vector<long double> o;
};

BruteMemory brute_force(const Tensor& items, std::size_t i, std::size_t n_valid, const Tensor& q,
                        MemoryBank& bank) {
  const std::size_t f = items.dim(2), d = bank.mem_dim();
  const Tensor& wa = bank.input().weight().value;
  const Tensor& ba = bank.input().bias().value;
  const Tensor& wc = bank.output().weight().value;
  const Tensor& bc = bank.output().bias().value;
  std::vector<std::vector<long double>> ma(n_valid, std::vector<long double>(d)), mc = ma;
  for (std::size_t j = 0; j < n_valid; ++j) {
    for (std::size_t k = 0; k < d; ++k) {
      long double sa = ba[k], sc = bc[k];
      for (std::size_t t = 0; t < f; ++t) {
        sa += static_cast<long double>(items(i, j, t)) * wa(t, k);
        sc += static_cast<long double>(items(i, j, t)) * wc(t, k);
      }
      ma[j][k] = sa > 0 ? sa : 0;
      mc[j][k] = sc > 0 ? sc : 0;
    }
  }
  BruteMemory r;
  long double z = 0;
  std::vector<long double> logits(n_valid);
  for (std::size_t j = 0; j < n_valid; ++j) {
    for (std::size_t k = 0; k < d; ++k) logits[j] += static_cast<long double>(q(i, k)) * ma[j][k];
  }
  for (std::size_t j = 0; j < n_valid; ++j) z += std::exp(logits[j]);
  for (std::size_t j = 0; j < n_valid; ++j) r.p.push_back(std::exp(logits[j]) / z);
  for (std::size_t k = 0; k < d; ++k) {
    long double s = q(i, k);
    for (std::size_t j = 0; j < n_valid; ++j) s += r.p[j] * mc[j][k];
    r.o.push_back(s);
  }
  return r;
}

TEST(MemoryOracle, ComposedOpsMatchBruteForce) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const std::size_t J = 1 + rng.index(3);
    MemoryBank bank("m", 4, 3, rng);
    for (double& v : bank.input().bias().value.data()) v = 0.2 * rng.normal();
    const Tensor items = random_tensor({3, J, 4}, rng);
    const Tensor q = random_tensor({3, 3}, rng);
    Mask mask(3, J);
    const std::vector<std::size_t> valid{J, 1, 0};
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < valid[i]; ++j) mask.set(i, j, true);
    Tensor ma, mc;
    bank.embed(items, ma, mc);
    const Tensor p = attend(q, ma, mask);
    const Tensor o = memory_output(p, mc, q, mask);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto ref = brute_force(items, i, valid[i], q, bank);
      for (std::size_t j = 0; j < valid[i]; ++j) EXPECT_NEAR(p(i, j), static_cast<double>(ref.p[j]), 1e-10);
      for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(o(i, k), static_cast<double>(ref.o[k]), 1e-10);
    }
  }
}

// --- clip and fusion ----------------------------------------------------------

TEST(ClipJoint, Examples) {
  const Tensor u = Tensor::matrix({{0.6, 0.8}});
  const Tensor j = clip_joint(u, u);
  EXPECT_NEAR(j[0] + j[1], 1.0, 1e-15);
  EXPECT_EQ(clip_joint(Tensor::matrix({{1, 0}}), Tensor::matrix({{0, 3}})), Tensor::matrix({{0, 0}}));
  EXPECT_THROW(clip_joint(Tensor::matrix({{0, 0}}), u), NumericError);

  Rng rng(2);
  const Tensor a = random_tensor({3, 5}, rng), b = random_tensor({3, 5}, rng);
  const Tensor got = clip_joint(a, b);
  for (std::size_t i = 0; i < 3; ++i) {
    double na = 0, nb = 0;
    for (std::size_t k = 0; k < 5; ++k) {
      na += a(i, k) * a(i, k);
      nb += b(i, k) * b(i, k);
    }
    for (std::size_t k = 0; k < 5; ++k) {
      EXPECT_NEAR(got(i, k), (a(i, k) / std::sqrt(na)) * (b(i, k) / std::sqrt(nb)), 1e-12);
    }
  }
}

TEST(Fusion, FullSizeConcatWidth) {
  CcnConfig full_size;
  // 1024 + 1024 + 512 + 512 + 512
  EXPECT_EQ(fused_width(full_size), 3584u);
  full_size.fusion = Fusion::max_pool;
  EXPECT_EQ(fused_width(full_size), 1024u + 512u);
}

TEST(Fusion, MultiplyByOnesIsIdentity) {
  Rng rng(3);
  const Tensor x = random_tensor({2, 4}, rng);
  const std::vector<Tensor> parts{x, Tensor({2, 4}, 1.0)};
  EXPECT_EQ(combine(Fusion::multiply, parts), x);
  EXPECT_THROW(combine(Fusion::concat, parts), ConfigError);
}

TEST(Fusion, AvgAndMaxPool) {
  const std::vector<Tensor> parts{Tensor::vector({1, 5}), Tensor::vector({3, -1})};
  EXPECT_EQ(combine(Fusion::avg_pool, parts), Tensor::vector({2, 2}));
  EXPECT_EQ(combine(Fusion::max_pool, parts), Tensor::vector({3, 5}));
  const auto g = combine_backward(Fusion::max_pool, parts, Tensor::vector({1, 1}));
  EXPECT_EQ(g[0], Tensor::vector({0, 1}));
  EXPECT_EQ(g[1], Tensor::vector({1, 0}));
}

// --- full model ---------------------------------------------------------------

struct World {
  std::vector<ExampleRecord> examples;
  EmbeddingStore store;
  DomainVocabulary vocab{{"a.example", "b.example"}};
};

World make_world(const CcnConfig& c, std::uint64_t seed = 1) {
  World w;
  w.examples = {tiny_example("a", 3, 2, 2, Label::falsified), tiny_example("b", 1, 1, 3),
                tiny_example("c", 0, 0, 1, Label::falsified)};
  w.store = tiny_store(w.examples, c, seed);
  return w;
}

void zero_all(Model& m) {
  for (Parameter* p : m.parameters()) {
    // batch-norm scales stay at 1 so the network still normalizes
    if (p->name.find(".gamma") == std::string::npos) p->value.fill(0.0);
  }
}

TEST(Classifier, ZeroWeightsAndBias) {
  Rng rng(1);
  ClassifierHead head("h", 3, 4, rng);
  for (Parameter* p : std::vector<Parameter*>{&head.fc1().weight(), &head.fc2().weight()}) p->value.fill(0.0);
  const Tensor x = random_tensor({2, 3}, rng);
  EXPECT_EQ(sigmoid(head.forward(x, Mode::eval)[0]), 0.5);
  head.fc2().bias().value[0] = 10.0;
  const double p = sigmoid(head.forward(x, Mode::eval)[1]);
  EXPECT_NEAR(p, 1.0 / (1.0 + std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(p, 0.99995, 1e-5);
}

TEST(CcnModel, AllZeroParametersGiveOneHalf) {
  const auto c = tiny_config();
  const World w = make_world(c);
  CcnModel model(c, w.vocab.rows(), 7);
  zero_all(model);
  Rng rng(0);
  const Tensor p = model.forward(assemble_batch(w.examples, w.store, w.vocab, c), Mode::eval, rng);
  for (double v : p.data()) EXPECT_EQ(v, 0.5);
}

TEST(CcnModel, EvalDeterministic) {
  const auto c = tiny_config();
  const World w = make_world(c);
  CcnModel model(c, w.vocab.rows(), 7);
  const Batch batch = assemble_batch(w.examples, w.store, w.vocab, c);
  Rng r1(1), r2(2);
  const Tensor a = model.forward(batch, Mode::eval, r1);
  const Tensor b = model.forward(batch, Mode::eval, r2);
  EXPECT_EQ(a, b);
}

TEST(CcnModel, EmptyMemoryOutputsQuery) {
  const auto c = tiny_config();
  const World w = make_world(c);
  CcnModel model(c, w.vocab.rows(), 7);
  Rng rng(0);
  model.forward(assemble_batch(w.examples, w.store, w.vocab, c), Mode::eval, rng);
  const auto& outs = model.memory_outputs();
  const auto qs = model.memory_queries();
  // example "c" has no images, scenes or entities
  for (std::size_t u : {0u, 1u, 2u}) {
    for (std::size_t k = 0; k < outs[u].dim(1); ++k) EXPECT_EQ(outs[u](2, k), qs[u](2, k));
  }
}

TEST(CcnModel, PermutingEvidenceKeepsPredictionAndPermutesAttention) {
  for (auto encoder : {TextEncoder::token_lstm_512, TextEncoder::sentence_768}) {
    const auto c = tiny_config(encoder);
    World w = make_world(c);
    CcnModel model(c, w.vocab.rows(), 11);
    Rng rng(0);
    const Tensor p0 = model.forward(assemble_batch(w.examples, w.store, w.vocab, c), Mode::eval, rng);
    const auto att0 = model.attention();

    // reverse image order of "a"; reverse sentence order of "b" by swapping their store keys
    auto perm = w.examples;
    std::reverse(perm[0].evidence_images.begin(), perm[0].evidence_images.end());
    std::reverse(perm[1].sentences.begin(), perm[1].sentences.end());
    EmbeddingStore store = w.store;
    EmbeddingStore moved;
    for (Section s : kAllSections) {
      if (store.dim(s)) moved.declare(s, store.dim(s));
      for (const auto& key : store.keys(s)) {
        std::string src = key;
        for (std::size_t j = 0; j < 3; ++j) {
          if (key == "b#s" + std::to_string(j)) src = "b#s" + std::to_string(2 - j);
        }
        if (is_string_section(s)) {
          moved.put_strings(s, key, store.strings(s, src));
        } else if (s == Section::tokens) {
          moved.put_tokens(key, store.tokens(src));
        } else {
          moved.put_vector(s, key, store.vector(s, src).data());
        }
      }
    }
    const Tensor p1 = model.forward(assemble_batch(perm, moved, w.vocab, c), Mode::eval, rng);
    const auto att1 = model.attention();
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p0[i], p1[i], 1e-9);
    // image memory is first
    const auto& w0 = att0[0].weights[0];
    const auto& w1 = att1[0].weights[0];
    ASSERT_EQ(w0.size(), 3u);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(w1[j], w0[2 - j], 1e-9);
    EXPECT_EQ(att1[0].item_keys[0][0], att0[0].item_keys[0][2]);
    const auto& s0 = att0.back().weights[1];
    const auto& s1 = att1.back().weights[1];
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(s1[j], s0[2 - j], 1e-9);
  }
}

TEST(CcnModel, BatchWithoutAnyItemsOfAMemory) {
  for (auto layout : {MemoryLayout::separate, MemoryLayout::unified}) {
    for (auto encoder : {TextEncoder::token_lstm_512, TextEncoder::sentence_768}) {
      auto c = tiny_config(encoder);
      c.memory_layout = layout;
      std::vector<ExampleRecord> examples{tiny_example("a", 0, 0, 0), tiny_example("b", 0, 0, 0, Label::falsified)};
      const EmbeddingStore store = tiny_store(examples, c);
      const DomainVocabulary vocab({"a.example"});
      CcnModel model(c, vocab.rows(), 2);
      Rng rng(0);
      const Batch batch = assemble_batch(examples, store, vocab, c);
      const Tensor p = model.forward(batch, Mode::train, rng);
      model.backward(Tensor({2}, 1.0));
      const auto qs = model.memory_queries();
      for (std::size_t u = 0; u < qs.size(); ++u) EXPECT_EQ(model.memory_outputs()[u], qs[u]);
      EXPECT_EQ(p.size(), 2u);
    }
  }
}

TEST(CcnModel, SingleMemoryWithoutBnFusesToItsOutput) {
  auto c = tiny_config();
  c.use_clip = false;
  c.use_bn = false;
  c.use_scenes = c.use_entities = c.use_captions = false;
  const World w = make_world(c);
  CcnModel model(c, w.vocab.rows(), 3);
  Rng rng(0);
  model.forward(assemble_batch(w.examples, w.store, w.vocab, c), Mode::eval, rng);
  ASSERT_EQ(model.memory_outputs().size(), 1u);
  EXPECT_EQ(model.fused(), model.memory_outputs()[0]);
  EXPECT_EQ(model.attention().size(), 1u);
  EXPECT_EQ(model.attention()[0].memory, "image");
}

TEST(CcnModel, AttentionRowsAreDistributions) {
  auto c = tiny_config();
  c.memory_layout = MemoryLayout::unified;
  const World w = make_world(c);
  CcnModel model(c, w.vocab.rows(), 3);
  Rng rng(0);
  model.forward(assemble_batch(w.examples, w.store, w.vocab, c), Mode::eval, rng);
  ASSERT_EQ(model.attention()[0].memory, "unified");
  // example "a": 3 images + 2 sentences + 2 entities
  EXPECT_EQ(model.attention()[0].weights[0].size(), 7u);
  for (const auto& rec : model.attention()) {
    for (const auto& row : rec.weights) {
      if (row.empty()) continue;
      double s = 0;
      for (double v : row) s += v;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

double bce_objective(Model& model, const Batch& batch, bool with_grad) {
  Rng rng(0);
  const Tensor p = model.forward(batch, Mode::train, rng);
  const std::size_t b = p.size();
  double loss = 0;
  Tensor dp({b});
  for (std::size_t i = 0; i < b; ++i) {
    loss += bce_loss(p[i], batch.labels[i]) / static_cast<double>(b);
    dp[i] = bce_grad(p[i], batch.labels[i]) / static_cast<double>(b);
  }
  if (with_grad) {
    model.zero_grad();
    model.backward(dp);
  }
  return loss;
}

struct Variant {
  std::string name;
  CcnConfig config;
  ModelKind kind = ModelKind::ccn;
};

std::vector<Variant> gradient_variants() {
  std::vector<Variant> v;
  auto base = tiny_config();
  base.dropout = {0, 0, 0};
  v.push_back({"full_token", base});
  auto dense = base;
  dense.text_encoder = TextEncoder::sentence_768;
  v.push_back({"full_dense", dense});
  auto unified = base;
  unified.memory_layout = MemoryLayout::unified;
  v.push_back({"unified", unified});
  auto unified_ner = unified;
  unified_ner.use_labels_feature = false;
  v.push_back({"unified_ner_only", unified_ner});
  for (Fusion f : {Fusion::avg_pool, Fusion::max_pool, Fusion::multiply}) {
    auto x = base;
    x.fusion = f;
    v.push_back({std::string(to_string(f)), x});
  }
  auto nobn = base;
  nobn.use_bn = false;
  v.push_back({"no_bn", nobn});
  v.push_back({"evidence_only", evidence_only_config(base)});
  v.push_back({"averaged", dense, ModelKind::averaged});
  v.push_back({"clip_only", base, ModelKind::clip_only});
  return v;
}

TEST(CcnModel, FullModelGradcheck) {
  for (const Variant& variant : gradient_variants()) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const World w = make_world(variant.config, seed);
      auto model = make_model(variant.kind, variant.config, w.vocab.rows(), seed);
      // two-row batch norm maps every column to +-1, which ties the max-pool parts
      const Batch batch = assemble_batch(w.examples, w.store, w.vocab, model->batch_config());
      Objective f = [&](bool with_grad) { return bce_objective(*model, batch, with_grad); };
      const auto params = model->parameters();
      const auto report = gradcheck(f, params);
      EXPECT_LT(report.max_rel_error, 1e-4)
          << variant.name << " seed " << seed << " worst " << report.worst_parameter << "["
          << report.worst_index << "] analytic " << report.analytic << " numeric " << report.numeric;
    }
  }
}

TEST(Baselines, AveragedPoolsProducts) {
  auto c = tiny_config(TextEncoder::sentence_768);
  const World w = make_world(c);
  AveragedModel model(c, 1);
  const Batch batch = assemble_batch(w.examples, w.store, w.vocab, model.batch_config());
  Rng rng(0);
  model.forward(batch, Mode::eval, rng);
  const Tensor& x = model.pooled();
  // image part of example "b" (one evidence image)
  const auto& q = w.store.vector(Section::image_obj, "b_img");
  const auto& e = w.store.vector(Section::image_obj, "b_ev0");
  for (std::size_t k = 0; k < c.features.image; ++k) EXPECT_NEAR(x(1, k), q[k] * e[k], 1e-15);
  // example "c" has no images
  for (std::size_t k = 0; k < c.features.image; ++k) EXPECT_EQ(x(2, k), 0.0);
}

TEST(CcnModel, RejectsMismatchedBatch) {
  const auto c = tiny_config();
  const World w = make_world(c);
  CcnModel model(c, w.vocab.rows(), 1);
  auto other = c;
  other.use_images = false;
  Rng rng(0);
  EXPECT_THROW(model.forward(assemble_batch(w.examples, w.store, w.vocab, other), Mode::eval, rng), ConfigError);
}

// --- checkpoint ---------------------------------------------------------------

TEST(Checkpoint, RoundTripIsBitExact) {
  for (ModelKind kind : {ModelKind::ccn, ModelKind::averaged, ModelKind::clip_only}) {
    const auto c = tiny_config();
    const World w = make_world(c);
    auto model = make_model(kind, c, w.vocab.rows(), 5);
    // move running stats off their initial values
    const Batch batch = assemble_batch(w.examples, w.store, w.vocab, model->batch_config());
    Rng rng(1);
    model->forward(batch, Mode::train, rng);

    const Checkpoint ck = Checkpoint::capture(*model, w.vocab, {{"epoch", 3}});
    const std::string bytes = ck.serialize();
    const Checkpoint back = Checkpoint::deserialize(bytes);
    EXPECT_EQ(back, ck);
    EXPECT_EQ(back.serialize(), bytes);
    EXPECT_EQ(back.fingerprint(), ck.fingerprint());
    EXPECT_EQ(back.meta["epoch"], 3);

    for (std::size_t i = 0; i < ck.parameters.size(); ++i) {
      const Tensor& orig = model->parameters()[i]->value;
      for (std::size_t k = 0; k < orig.size(); ++k) {
        EXPECT_EQ(ck.parameters[i].value[k], static_cast<double>(static_cast<float>(orig[k])));
      }
    }

    ck.load_into(*model);
    auto loaded = back.instantiate();
    Rng r1(0), r2(0);
    EXPECT_EQ(model->forward(batch, Mode::eval, r1), loaded->forward(batch, Mode::eval, r2));
  }
}

TEST(Checkpoint, FileRoundTrip) {
  const auto c = tiny_config();
  const World w = make_world(c);
  CcnModel model(c, w.vocab.rows(), 5);
  const Checkpoint ck = Checkpoint::capture(model, w.vocab);
  const auto path = std::filesystem::temp_directory_path() / "ccn_test_checkpoint.bin";
  ck.write(path);
  EXPECT_EQ(Checkpoint::read(path), ck);
  std::filesystem::remove(path);
  EXPECT_THROW(Checkpoint::read(path), IoError);
}

TEST(Checkpoint, RejectsCorruptInput) {
  const auto c = tiny_config();
  const World w = make_world(c);
  CcnModel model(c, w.vocab.rows(), 5);
  const std::string bytes = Checkpoint::capture(model, w.vocab).serialize();
  EXPECT_THROW(Checkpoint::deserialize("CCNSTOR1" + bytes.substr(8)), FormatError);
  EXPECT_THROW(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(Checkpoint::deserialize(bytes + "x"), FormatError);
  std::string v2 = bytes;
  v2[8] = 2;
  EXPECT_THROW(Checkpoint::deserialize(v2), FormatError);

  Checkpoint ck = Checkpoint::deserialize(bytes);
  ck.parameters[0].value = Tensor({1, 1});
  EXPECT_THROW(ck.instantiate(), FormatError);
  ck = Checkpoint::deserialize(bytes);
  ck.parameters.pop_back();
  EXPECT_THROW(ck.instantiate(), FormatError);
  AveragedModel other(c, 1);
  EXPECT_THROW(Checkpoint::deserialize(bytes).load_into(other), FormatError);
}

}  // namespace
}  // namespace ccn
