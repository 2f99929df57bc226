#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "ccn/errors.hpp"
#include "ccn/math/layers.hpp"
#include "ccn/math/lstm.hpp"
#include "ccn/math/optim.hpp"
#include "test_util.hpp"

namespace ccn {
namespace {

using testing::Probe;
using testing::random_tensor;

// --- linear -------------------------------------------------------------------

TEST(Linear, IdentityWeights) {
  const Tensor y = linear_forward(Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 0}, {0, 1}}),
                                  Tensor::vector({0, 0}));
  EXPECT_EQ(y, Tensor::matrix({{1, 2}}));
}

TEST(Linear, ZeroInputPassesBias) {
  const Tensor y = linear_forward(Tensor::matrix({{0, 0}}), Tensor::matrix({{5, -2}, {7, 1}}),
                                  Tensor::vector({3, 4}));
  EXPECT_EQ(y, Tensor::matrix({{3, 4}}));
}

TEST(Linear, HandEvaluated) {
  const Tensor y = linear_forward(Tensor::matrix({{1, 1}}), Tensor::matrix({{2, 3}, {4, 5}}),
                                  Tensor::vector({1, 1}));
  // [1*2 + 1*4 + 1, 1*3 + 1*5 + 1]
  EXPECT_EQ(y, Tensor::matrix({{7, 9}}));
}

TEST(Linear, ShapeMismatchNamesBothShapes) {
  try {
    linear_forward(Tensor({1, 3}), Tensor({2, 2}), Tensor({2}));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2x2]"), std::string::npos) << msg;
  }
}

TEST(Linear, FoldsLeadingAxes) {
  Rng rng(3);
  const Tensor x = random_tensor({2, 3, 4}, rng);
  const Tensor w = random_tensor({4, 5}, rng);
  const Tensor b = random_tensor({5}, rng);
  const Tensor y = linear_forward(x, w, b);
  ASSERT_EQ(y.shape(), (Shape{2, 3, 5}));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t m = 0; m < 5; ++m) {
        double s = b[m];
        for (std::size_t k = 0; k < 4; ++k) s += x(i, j, k) * w(k, m);
        EXPECT_NEAR(y(i, j, m), s, 1e-12);
      }
}

GradcheckReport check_linear(std::uint64_t seed) {
  Rng rng(seed);
  Linear layer("fc", 4, 3, rng);
  Parameter x("x", random_tensor({5, 4}, rng));
  const Probe probe({5, 3}, rng);
  Objective f = [&](bool with_grad) {
    const Tensor y = layer.forward(x.value);
    if (with_grad) {
      layer.weight().zero_grad();
      layer.bias().zero_grad();
      x.grad = layer.backward(probe.weights);
    }
    return probe(y);
  };
  std::vector<Parameter*> params{&layer.weight(), &layer.bias(), &x};
  return gradcheck(f, params);
}

TEST(Linear, GradcheckBelow1e6) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EXPECT_LT(check_linear(seed).max_rel_error, 1e-6) << "seed " << seed;
  }
}

// --- relu ---------------------------------------------------------------------

TEST(Relu, Values) {
  EXPECT_EQ(relu(Tensor::vector({-1, 0, 2})), Tensor::vector({0, 0, 2}));
  EXPECT_EQ(relu(Tensor::vector({0.5, 3})), Tensor::vector({0.5, 3}));
}

TEST(Relu, GradientMasksNegativeAndZero) {
  EXPECT_EQ(relu_backward(Tensor::vector({-1, 2}), Tensor::vector({1, 1})), Tensor::vector({0, 1}));
  EXPECT_EQ(relu_backward(Tensor::vector({0}), Tensor::vector({1})), Tensor::vector({0}));
}

// --- masked_softmax -----------------------------------------------------------

Mask full_mask(std::size_t r, std::size_t c) { return Mask(r, c, true); }

TEST(MaskedSoftmax, Symmetric) {
  const Tensor p = masked_softmax(Tensor::matrix({{0, 0}}), full_mask(1, 2));
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p(0, 1), 0.5);
}

TEST(MaskedSoftmax, SingleValidItem) {
  Mask m(1, 2);
  m.set(0, 0, true);
  const Tensor p = masked_softmax(Tensor::matrix({{5, -3}}), m);
  EXPECT_EQ(p(0, 0), 1.0);
  EXPECT_EQ(p(0, 1), 0.0);
}

TEST(MaskedSoftmax, ThreeLogitsOracle) {
  const Tensor p = masked_softmax(Tensor::matrix({{1, 2, 3}}), full_mask(1, 3));
  long double z = 0;
  for (int k = 1; k <= 3; ++k) z += std::exp(static_cast<long double>(k));
  for (int k = 1; k <= 3; ++k) {
    EXPECT_NEAR(p(0, k - 1), static_cast<double>(std::exp(static_cast<long double>(k)) / z), 1e-15);
  }
  EXPECT_NEAR(p(0, 0), 0.09003057, 1e-8);
  EXPECT_NEAR(p(0, 1), 0.24472847, 1e-8);
  EXPECT_NEAR(p(0, 2), 0.66524096, 1e-8);
}

TEST(MaskedSoftmax, EmptyRowIsZero) {
  const Tensor p = masked_softmax(Tensor::matrix({{1, 2}}), Mask(1, 2));
  EXPECT_EQ(p, Tensor::matrix({{0, 0}}));
}

TEST(MaskedSoftmax, PropertiesOnRandomRows) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t cols = 1 + rng.index(12);
    Tensor logits = random_tensor({1, cols}, rng, 5.0);
    Mask m(1, cols);
    for (std::size_t j = 0; j < cols; ++j) m.set(0, j, rng.bernoulli(0.7));
    const Tensor p = masked_softmax(logits, m);
    double sum = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      if (!m(0, j)) EXPECT_EQ(p(0, j), 0.0);
      sum += p(0, j);
    }
    if (m.count_row(0) > 0) EXPECT_NEAR(sum, 1.0, 1e-12);

    const double shift = rng.uniform(-50, 50);
    Tensor shifted = logits;
    for (std::size_t j = 0; j < cols; ++j) {
      if (m(0, j)) shifted(0, j) += shift;
    }
    EXPECT_LT(testing::max_abs_diff(masked_softmax(shifted, m), p), 1e-9);
  }
}

TEST(MaskedSoftmax, Gradcheck) {
  Rng rng(5);
  Parameter logits("logits", random_tensor({3, 4}, rng));
  Mask m(3, 4);
  for (std::size_t j = 0; j < 4; ++j) m.set(0, j, true);
  m.set(1, 2, true);
  m.set(2, 0, true);
  m.set(2, 3, true);
  const Probe probe({3, 4}, rng);
  Objective f = [&](bool with_grad) {
    const Tensor p = masked_softmax(logits.value, m);
    if (with_grad) logits.grad = masked_softmax_backward(p, probe.weights);
    return probe(p);
  };
  std::vector<Parameter*> params{&logits};
  EXPECT_LT(gradcheck(f, params).max_rel_error, 1e-8);
}

// --- batchnorm ----------------------------------------------------------------

TEST(BatchNorm, ZeroVarianceColumnsGiveZero) {
  BatchNorm bn("bn", 2);
  const Tensor y = bn.forward(Tensor::matrix({{3, -1}, {3, -1}, {3, -1}}), Mode::train);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm, ZeroGammaGivesBeta) {
  BatchNorm bn("bn", 2);
  bn.gamma().value.fill(0.0);
  bn.beta().value = Tensor::vector({0.5, -2});
  const Tensor y = bn.forward(Tensor::matrix({{1, 2}, {4, 8}, {0, 3}}), Mode::train);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(y(i, 0), 0.5);
    EXPECT_EQ(y(i, 1), -2.0);
  }
}

TEST(BatchNorm, TwoRowOracle) {
  BatchNorm bn("bn", 1);
  const Tensor y = bn.forward(Tensor::matrix({{1}, {3}}), Mode::train);
  // mean 2, biased variance 1
  const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(y(0, 0), -expected, 1e-15);
  EXPECT_NEAR(y(1, 0), expected, 1e-15);
}

TEST(BatchNorm, RunningStatsUseMomentumAndUnbiasedVariance) {
  BatchNorm bn("bn", 1);
  bn.forward(Tensor::matrix({{1}, {3}}), Mode::train);
  // unbiased variance of {1,3} is 2
  EXPECT_NEAR(bn.running_mean().value[0], 0.1 * 2.0, 1e-15);
  EXPECT_NEAR(bn.running_var().value[0], 0.9 * 1.0 + 0.1 * 2.0, 1e-15);
  const Tensor y = bn.forward(Tensor::matrix({{0.2}}), Mode::eval);
  EXPECT_NEAR(y(0, 0), (0.2 - 0.2) / std::sqrt(1.1 + 1e-5), 1e-15);
}

TEST(BatchNorm, TrainWithOneRowThrows) {
  BatchNorm bn("bn", 3);
  EXPECT_THROW(bn.forward(Tensor({1, 3}), Mode::train), ConfigError);
  EXPECT_NO_THROW(bn.forward(Tensor({1, 3}), Mode::eval));
}

TEST(BatchNorm, TrainOutputStandardized) {
  Rng rng(8);
  BatchNorm bn("bn", 6);
  const Tensor x = random_tensor({40, 6}, rng, 5.0);
  const Tensor y = bn.forward(x, Mode::train);
  for (std::size_t k = 0; k < 6; ++k) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < 40; ++i) mean += y(i, k);
    mean /= 40;
    for (std::size_t i = 0; i < 40; ++i) var += (y(i, k) - mean) * (y(i, k) - mean);
    var /= 40;
    EXPECT_LT(std::abs(mean), 1e-9);
    // eps shrinks the variance by sigma^2 / (sigma^2 + eps), below 1e-6 once sigma^2 > 10
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

GradcheckReport check_batchnorm(std::uint64_t seed, Mode mode) {
  Rng rng(seed);
  BatchNorm bn("bn", 3);
  for (double& g : bn.gamma().value.data()) g = rng.uniform(0.5, 1.5);
  for (double& b : bn.beta().value.data()) b = rng.normal();
  bn.running_mean().value = random_tensor({3}, rng);
  for (double& v : bn.running_var().value.data()) v = rng.uniform(0.5, 2.0);
  const Tensor mean0 = bn.running_mean().value;
  const Tensor var0 = bn.running_var().value;
  Parameter x("x", random_tensor({5, 3}, rng));
  const Probe probe({5, 3}, rng);
  Objective f = [&](bool with_grad) {
    bn.running_mean().value = mean0;
    bn.running_var().value = var0;
    const Tensor y = bn.forward(x.value, mode);
    if (with_grad) {
      bn.gamma().zero_grad();
      bn.beta().zero_grad();
      x.grad = bn.backward(probe.weights);
    }
    return probe(y);
  };
  std::vector<Parameter*> params{&bn.gamma(), &bn.beta(), &x};
  return gradcheck(f, params);
}

TEST(BatchNorm, GradcheckTrainAndEval) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EXPECT_LT(check_batchnorm(seed, Mode::train).max_rel_error, 1e-6) << "seed " << seed;
    EXPECT_LT(check_batchnorm(seed, Mode::eval).max_rel_error, 1e-6) << "seed " << seed;
  }
}

// --- dropout ------------------------------------------------------------------

TEST(Dropout, IdentityCases) {
  Rng rng(1);
  const Tensor x = random_tensor({4, 5}, rng);
  Dropout zero(0.0);
  EXPECT_EQ(zero.forward(x, Mode::train, rng), x);
  Dropout quarter(0.25);
  const auto pos = rng.position();
  EXPECT_EQ(quarter.forward(x, Mode::eval, rng), x);
  EXPECT_EQ(rng.position(), pos);
  EXPECT_EQ(quarter.backward(x), x);
}

TEST(Dropout, MeanPreservedLawOfLargeNumbers) {
  Rng rng(2);
  Dropout d(0.5);
  const Tensor y = d.forward(Tensor({100000}, 1.0), Mode::train, rng);
  const double mean = std::accumulate(y.data().begin(), y.data().end(), 0.0) / 1e5;
  EXPECT_NEAR(mean, 1.0, 0.02);
  for (double v : y.data()) EXPECT_TRUE(v == 0.0 || v == 2.0);
}

TEST(Dropout, BackwardUsesSameMask) {
  Rng rng(4);
  Dropout d(0.3);
  const Tensor x({50}, 1.0);
  const Tensor y = d.forward(x, Mode::train, rng);
  EXPECT_EQ(d.backward(x), y);
}

TEST(Dropout, RateOutOfRangeIsConfigError) {
  EXPECT_THROW(Dropout(1.0), ConfigError);
  EXPECT_THROW(Dropout(-0.1), ConfigError);
}

// --- embedding ----------------------------------------------------------------

TEST(Embedding, LookupAndGradcheck) {
  Rng rng(6);
  Embedding emb("domain", 5, 4, rng);
  const std::vector<int> ids{0, 3, 3, 1};
  const Tensor y = emb.forward(ids);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(y(1, k), emb.table().value(3, k));
  const Probe probe({4, 4}, rng);
  Objective f = [&](bool with_grad) {
    const Tensor out = emb.forward(ids);
    if (with_grad) {
      emb.table().zero_grad();
      emb.backward(probe.weights);
    }
    return probe(out);
  };
  std::vector<Parameter*> params{&emb.table()};
  EXPECT_LT(gradcheck(f, params).max_rel_error, 1e-8);
  EXPECT_THROW(emb.forward(std::vector<int>{5}), DimensionError);
}

// --- lstm ---------------------------------------------------------------------

// Scalar per-gate loop in extended precision.
std::vector<long double> lstm_oracle(LstmEncoder& lstm, const Tensor& tokens) {
  const std::size_t h = lstm.hidden();
  const std::size_t e = lstm.input_width();
  const Tensor& wi = lstm.w_input().value;
  const Tensor& wh = lstm.w_hidden().value;
  const Tensor& b = lstm.bias().value;
  auto sig = [](long double v) { return 1.0L / (1.0L + std::exp(-v)); };
  std::vector<long double> hs(h, 0), cs(h, 0), sum(h, 0);
  for (std::size_t t = 0; t < tokens.dim(0); ++t) {
    std::vector<long double> nh(h), nc(h);
    for (std::size_t k = 0; k < h; ++k) {
      long double pre[4];
      for (std::size_t g = 0; g < 4; ++g) {
        long double s = b[g * h + k];
        for (std::size_t q = 0; q < e; ++q) s += static_cast<long double>(tokens(t, q)) * wi(q, g * h + k);
        for (std::size_t q = 0; q < h; ++q) s += hs[q] * wh(q, g * h + k);
        pre[g] = s;
      }
      const long double in = sig(pre[0]), fg = sig(pre[1]), cand = std::tanh(pre[2]), out = sig(pre[3]);
      nc[k] = fg * cs[k] + in * cand;
      nh[k] = out * std::tanh(nc[k]);
    }
    hs = nh;
    cs = nc;
    for (std::size_t k = 0; k < h; ++k) sum[k] += hs[k];
  }
  std::vector<long double> out(hs);
  for (std::size_t k = 0; k < h; ++k) out.push_back(sum[k] / tokens.dim(0));
  return out;
}

TEST(Lstm, MatchesScalarOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    LstmEncoder lstm("lstm", 4, 3, rng);
    for (double& v : lstm.bias().value.data()) v = 0.3 * rng.normal();
    const Tensor tokens = random_tensor({5, 4}, rng);
    const Tensor y = lstm.encode(tokens);
    const auto ref = lstm_oracle(lstm, tokens);
    ASSERT_EQ(y.size(), 6u);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(y[k], static_cast<double>(ref[k]), 1e-10);
  }
}

TEST(Lstm, SingleStepRepeatsHidden) {
  Rng rng(2);
  LstmEncoder lstm("lstm", 3, 4, rng);
  const Tensor y = lstm.encode(random_tensor({1, 3}, rng));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(y[k], y[4 + k]);
}

TEST(Lstm, ZeroWeightsGiveZeroOutput) {
  Rng rng(2);
  LstmEncoder lstm("lstm", 3, 4, rng);
  lstm.w_input().value.fill(0);
  lstm.w_hidden().value.fill(0);
  const Tensor y = lstm.encode(random_tensor({6, 3}, rng));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, EmptyOrWrongWidthRejected) {
  Rng rng(2);
  LstmEncoder lstm("lstm", 3, 4, rng);
  EXPECT_THROW(lstm.encode(Tensor({0, 3})), DimensionError);
  EXPECT_THROW(lstm.encode(Tensor({2, 4})), DimensionError);
}

TEST(Lstm, GradcheckParametersAndInputs) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    LstmEncoder lstm("lstm", 3, 2, rng);
    Parameter a("seq_a", random_tensor({4, 3}, rng));
    Parameter b("seq_b", random_tensor({1, 3}, rng));
    const Probe probe({2, 4}, rng);
    Objective f = [&](bool with_grad) {
      const std::vector<const Tensor*> seqs{&a.value, &b.value};
      const Tensor y = lstm.encode_batch(seqs);
      if (with_grad) {
        lstm.w_input().zero_grad();
        lstm.w_hidden().zero_grad();
        lstm.bias().zero_grad();
        auto dx = lstm.backward_batch(probe.weights, true);
        a.grad = dx[0];
        b.grad = dx[1];
      }
      return probe(y);
    };
    std::vector<Parameter*> params{&lstm.w_input(), &lstm.w_hidden(), &lstm.bias(), &a, &b};
    EXPECT_LT(gradcheck(f, params).max_rel_error, 1e-6) << "seed " << seed;
  }
}

// --- loss, optimizer, schedule ------------------------------------------------

TEST(Bce, Values) {
  EXPECT_NEAR(bce_loss(0.5, 1.0), 0.6931472, 1e-7);
  EXPECT_NEAR(bce_loss(0.5, 0.0), std::log(2.0), 1e-15);
  EXPECT_LT(bce_loss(1.0, 1.0), 1e-6);
  EXPECT_NEAR(bce_loss(0.0, 1.0), -std::log(1e-7), 1e-9);
}

TEST(Bce, GradientOnClampedValue) {
  EXPECT_NEAR(bce_grad(0.25, 1.0), (0.25 - 1.0) / (0.25 * 0.75), 1e-12);
  const double p = 1e-7;
  EXPECT_NEAR(bce_grad(0.0, 1.0), (p - 1.0) / (p * (1 - p)), 1e-3);
}

TEST(Adam, ZeroGradientIsIdentity) {
  Parameter p("p", Tensor::vector({1.5, -2.0}));
  adam_step(p, 0.1);
  EXPECT_EQ(p.value, Tensor::vector({1.5, -2.0}));
  EXPECT_EQ(p.step_count, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p("p", Tensor::vector({0.0}));
  p.grad = Tensor::vector({1.0});
  adam_step(p, 0.001);
  // m_hat = 1, v_hat = 1, so the update is lr / (1 + eps)
  EXPECT_NEAR(p.value[0], -0.001 / (1.0 + 1e-8), 1e-15);
  const double after_one = p.value[0];
  adam_step(p, 0.001);
  EXPECT_LT(p.value[0], after_one);
}

TEST(CyclicalLr, TriangleShape) {
  const double max = 6e-5, base = 6e-6;
  EXPECT_DOUBLE_EQ(cyclical_lr(0, max, base, 10), base);
  EXPECT_DOUBLE_EQ(cyclical_lr(10, max, base, 10), 6e-5);
  EXPECT_NEAR(cyclical_lr(5, max, base, 10), (base + max) / 2, 1e-18);
  EXPECT_NEAR(cyclical_lr(15, max, base, 10), (base + max) / 2, 1e-18);
  EXPECT_DOUBLE_EQ(cyclical_lr(20, max, base, 10), base);
  EXPECT_THROW(cyclical_lr(0, max, base, 0), ConfigError);
}

TEST(Gradcheck, ConstantFunction) {
  Parameter p("p", Tensor::vector({1, 2, 3}));
  Objective f = [&](bool with_grad) {
    if (with_grad) p.zero_grad();
    return 4.0;
  };
  std::vector<Parameter*> params{&p};
  const auto r = gradcheck(f, params);
  EXPECT_EQ(r.max_rel_error, 0.0);
  EXPECT_EQ(r.analytic, 0.0);
  EXPECT_EQ(r.numeric, 0.0);
}

TEST(Gradcheck, DetectsWrongGradient) {
  Parameter p("p", Tensor::vector({1.0}));
  Objective f = [&](bool with_grad) {
    if (with_grad) p.grad = Tensor::vector({5.0});
    return p.value[0] * p.value[0];
  };
  std::vector<Parameter*> params{&p};
  const auto r = gradcheck(f, params);
  EXPECT_GT(r.max_rel_error, 0.5);
  EXPECT_EQ(r.worst_parameter, "p");
}

TEST(Gradcheck, NonFiniteNamesParameter) {
  Parameter p("weights", Tensor::vector({0.0}));
  Objective f = [&](bool with_grad) {
    if (with_grad) p.zero_grad();
    return std::log(p.value[0] + 1e-6 > 0 ? p.value[0] + 1e-6 : -1.0);
  };
  std::vector<Parameter*> params{&p};
  try {
    gradcheck(f, params);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("weights"), std::string::npos);
  }
}

// --- rng ----------------------------------------------------------------------

TEST(Rng, DeterministicPerSeed) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
  EXPECT_EQ(a.position(), b.position());
  Rng c(43);
  EXPECT_NE(Rng(42).next_u64(), c.next_u64());
}

TEST(Tensor, RejectsMismatchedDataAndNonFinite) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  Tensor t({2});
  t[1] = std::nan("");
  EXPECT_THROW(t.require_finite("probe"), NumericError);
}

}  // namespace
}  // namespace ccn
