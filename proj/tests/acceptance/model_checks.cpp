#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "acceptance_checks.hpp"
#include "ccn/data/batch.hpp"
#include "ccn/model/ccn_model.hpp"
#include "ccn/model/memory.hpp"
#include "ccn/train/gradient_suite.hpp"
#include "ccn/train/synthetic.hpp"

namespace ccn::acceptance {

namespace {

constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kSoftmaxTolerance = 1e-12;
constexpr double kPermutationTolerance = 1e-9;
constexpr double kOracleTolerance = 1e-10;

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal();
  return t;
}

SyntheticSpec small_world_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.n_train = 8;
  s.n_val = 0;
  s.latent_dim = 4;
  s.features = {6, 5, 4, 4, 5};
  s.seed = seed;
  return s;
}

// Copy of `store` in which the text items of `ex` are re-keyed so that item
// j of `permuted` finds the values item perm[j] had before.
EmbeddingStore rekey(const EmbeddingStore& store, const ExampleRecord& ex, const std::vector<std::size_t>& sperm,
                     const std::vector<std::size_t>& eperm) {
  std::map<std::string, std::string> source;
  for (std::size_t j = 0; j < sperm.size(); ++j) source[sentence_key(ex, j)] = sentence_key(ex, sperm[j]);
  for (std::size_t j = 0; j < eperm.size(); ++j) source[entity_key(ex, j)] = entity_key(ex, eperm[j]);
  EmbeddingStore out;
  for (Section s : kAllSections) {
    if (store.dim(s)) out.declare(s, store.dim(s));
    for (const auto& key : store.keys(s)) {
      const auto it = source.find(key);
      const std::string& src = it == source.end() ? key : it->second;
      if (!store.contains(s, src)) continue;
      if (is_string_section(s)) {
        out.put_strings(s, key, store.strings(s, src));
      } else if (s == Section::tokens) {
        out.put_tokens(key, store.tokens(src));
      } else {
        out.put_vector(s, key, store.vector(s, src).data());
      }
    }
  }
  return out;
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.index(i)]);
  return p;
}

}  // namespace

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto checks = run_gradient_suite({1, 2, 3, 4, 5});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const GradientCheck* worst = &checks.front();
  for (const auto& c : checks) {
    if (c.report.max_rel_error > worst->report.max_rel_error) worst = &c;
  }
  std::ostringstream d;
  d << checks.size() << " checks over 5 seeds, max relative error " << worst->report.max_rel_error << " ("
    << worst->name << " seed " << worst->seed << ", " << worst->report.worst_parameter << ") < " << kGradTolerance
    << ", runtime " << secs << " s < " << kGradSeconds << " s";
  return {worst->report.max_rel_error < kGradTolerance && secs < kGradSeconds, d.str()};
}

Outcome attention_invariants() {
  // Normalization of masked softmax on random rows and masks.
  double norm_err = 0.0;
  bool masked_zero = true;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    const std::size_t b = 1 + rng.index(6), J = 1 + rng.index(12);
    const Tensor logits = random_tensor({b, J}, rng);
    Mask mask(b, J);
    std::vector<bool> any(b, false);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < J; ++j)
        if (rng.bernoulli(0.6)) {
          mask.set(i, j, true);
          any[i] = true;
        }
    const Tensor p = masked_softmax(logits, mask);
    for (std::size_t i = 0; i < b; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < J; ++j) {
        if (!mask(i, j) && p(i, j) != 0.0) masked_zero = false;
        s += p(i, j);
      }
      norm_err = std::max(norm_err, std::abs(s - (any[i] ? 1.0 : 0.0)));
    }
  }

  // Permuting evidence permutes attention and leaves p_f unchanged.
  double perm_err = 0.0, pf_err = 0.0;
  bool identity = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (auto encoder : {TextEncoder::token_lstm_512, TextEncoder::sentence_768}) {
      const SyntheticSpec spec = small_world_spec(seed);
      const SyntheticData data = generate_synthetic(spec);
      const DomainVocabulary vocab = DomainVocabulary::build(data.examples, 1);
      CcnConfig c = synthetic_model_config(spec);
      c.text_encoder = encoder;
      c.dims = {4, 3, 3, 6};
      CcnModel model(c, vocab.rows(), seed);
      Rng rng(0);
      const Tensor p0 = model.forward(assemble_batch(data.examples, data.store, vocab, c), Mode::eval, rng);
      const auto att0 = model.attention();

      // empty memories return the projected query exactly
      const auto qs = model.memory_queries();
      const auto& outs = model.memory_outputs();
      for (std::size_t i = 0; i < data.examples.size(); ++i) {
        for (std::size_t u = 0; u < att0.size(); ++u) {
          if (!att0[u].weights[i].empty()) continue;
          for (std::size_t k = 0; k < outs[u].dim(1); ++k) identity = identity && outs[u](i, k) == qs[u](i, k);
        }
      }

      Rng prng(seed + 100);
      auto examples = data.examples;
      EmbeddingStore store = data.store;
      std::vector<std::map<std::string, std::string>> key_map(examples.size());
      for (std::size_t i = 0; i < examples.size(); ++i) {
        auto& ex = examples[i];
        const auto ip = shuffled(ex.evidence_images.size(), prng);
        const auto sp = shuffled(ex.sentences.size(), prng);
        const auto ep = shuffled(ex.entities.size(), prng);
        const ExampleRecord orig = ex;
        for (std::size_t j = 0; j < ip.size(); ++j) ex.evidence_images[j] = orig.evidence_images[ip[j]];
        for (std::size_t j = 0; j < sp.size(); ++j) {
          ex.sentences[j] = orig.sentences[sp[j]];
          key_map[i][sentence_key(ex, j)] = sentence_key(orig, sp[j]);
        }
        for (std::size_t j = 0; j < ep.size(); ++j) {
          ex.entities[j] = orig.entities[ep[j]];
          key_map[i][entity_key(ex, j)] = entity_key(orig, ep[j]);
        }
        store = rekey(store, orig, sp, ep);
      }
      const Tensor p1 = model.forward(assemble_batch(examples, store, vocab, c), Mode::eval, rng);
      const auto att1 = model.attention();
      for (std::size_t i = 0; i < p0.size(); ++i) pf_err = std::max(pf_err, std::abs(p0[i] - p1[i]));
      for (std::size_t u = 0; u < att0.size(); ++u) {
        for (std::size_t i = 0; i < examples.size(); ++i) {
          std::map<std::string, double> before;
          for (std::size_t j = 0; j < att0[u].weights[i].size(); ++j) {
            before[att0[u].item_keys[i][j]] = att0[u].weights[i][j];
          }
          for (std::size_t j = 0; j < att1[u].weights[i].size(); ++j) {
            std::string key = att1[u].item_keys[i][j];
            const auto it = key_map[i].find(key);
            if (it != key_map[i].end()) key = it->second;
            const auto b = before.find(key);
            perm_err = b == before.end() ? 1.0 : std::max(perm_err, std::abs(b->second - att1[u].weights[i][j]));
          }
        }
      }
    }
  }
  std::ostringstream d;
  d << "softmax row-sum error " << norm_err << " <= " << kSoftmaxTolerance << (masked_zero ? ", masked exactly 0" : ", masked NOT 0")
    << "; permutation attention error " << perm_err << ", p_f error " << pf_err << " <= " << kPermutationTolerance
    << "; empty-memory output " << (identity ? "equals" : "differs from") << " projected query";
  return {norm_err <= kSoftmaxTolerance && masked_zero && perm_err <= kPermutationTolerance &&
              pf_err <= kPermutationTolerance && identity,
          d.str()};
}

Outcome oracle_equivalence() {
  double err = 0.0;
  std::size_t cases = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    const std::size_t J = 1 + rng.index(3), f = 2 + rng.index(4), d = 1 + rng.index(4), b = 3;
    MemoryBank bank("m", f, d, rng);
    for (double& v : bank.input().bias().value.data()) v = 0.2 * rng.normal();
    for (double& v : bank.output().bias().value.data()) v = 0.2 * rng.normal();
    const Tensor items = random_tensor({b, J, f}, rng);
    const Tensor q = random_tensor({b, d}, rng);
    Mask mask(b, J);
    std::vector<std::size_t> valid(b);
    for (std::size_t i = 0; i < b; ++i) {
      valid[i] = rng.index(J + 1);
      for (std::size_t j = 0; j < valid[i]; ++j) mask.set(i, j, true);
    }
    Tensor ma, mc;
    bank.embed(items, ma, mc);
    const Tensor p = attend(q, ma, mask);
    const Tensor o = memory_output(p, mc, q, mask);

    const Tensor& wa = bank.input().weight().value;
    const Tensor& ba = bank.input().bias().value;
    const Tensor& wc = bank.output().weight().value;
    const Tensor& bc = bank.output().bias().value;
    for (std::size_t i = 0; i < b; ++i) {
      ++cases;
      std::vector<std::vector<long double>> a(valid[i], std::vector<long double>(d)), cc = a;
      for (std::size_t j = 0; j < valid[i]; ++j) {
        for (std::size_t k = 0; k < d; ++k) {
          long double sa = ba[k], sc = bc[k];
          for (std::size_t t = 0; t < f; ++t) {
            sa += static_cast<long double>(items(i, j, t)) * wa(t, k);
            sc += static_cast<long double>(items(i, j, t)) * wc(t, k);
          }
          a[j][k] = std::max<long double>(sa, 0);
          cc[j][k] = std::max<long double>(sc, 0);
          err = std::max(err, static_cast<double>(std::abs(a[j][k] - ma(i, j, k))));
          err = std::max(err, static_cast<double>(std::abs(cc[j][k] - mc(i, j, k))));
        }
      }
      std::vector<long double> e(valid[i]);
      long double z = 0;
      for (std::size_t j = 0; j < valid[i]; ++j) {
        long double s = 0;
        for (std::size_t k = 0; k < d; ++k) s += static_cast<long double>(q(i, k)) * a[j][k];
        e[j] = std::exp(s);
        z += e[j];
      }
      for (std::size_t j = 0; j < J; ++j) {
        const long double ref = j < valid[i] ? e[j] / z : 0;
        err = std::max(err, static_cast<double>(std::abs(ref - p(i, j))));
      }
      for (std::size_t k = 0; k < d; ++k) {
        long double s = q(i, k);
        for (std::size_t j = 0; j < valid[i]; ++j) s += e[j] / z * cc[j][k];
        err = std::max(err, static_cast<double>(std::abs(s - o(i, k))));
      }
    }
  }
  std::ostringstream d;
  d << cases << " memories with <= 3 items, max deviation from brute force " << err << " <= " << kOracleTolerance;
  return {err <= kOracleTolerance, d.str()};
}

}  // namespace ccn::acceptance
