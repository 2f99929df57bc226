#include "ccn/train/trainer.hpp"

#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

#include "ccn/errors.hpp"
#include "ccn/math/optim.hpp"

namespace ccn {

using nlohmann::json;

void TrainConfig::validate() const {
  model.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (batch_size < 2 && kind != ModelKind::clip_only) {
    throw ConfigError("batch_size must be at least 2 when batch norm is used");
  }
  if (!(max_lr > 0) || !std::isfinite(max_lr)) throw ConfigError("max_lr must be positive");
  if (!(base_lr_fraction > 0 && base_lr_fraction <= 1)) throw ConfigError("base_lr_fraction must be in (0, 1]");
  if (!(half_cycle_epochs > 0)) throw ConfigError("half_cycle_epochs must be positive");
  if (eval_batch_size == 0) throw ConfigError("eval_batch_size must be positive");
  for (double r : {model.dropout.input, model.dropout.domain, model.dropout.memory}) {
    if (!(r >= 0 && r < 1)) throw ConfigError("dropout rates must be in [0, 1)");
  }
}

TrainConfig TrainConfig::clip_only(const CcnConfig& model) {
  TrainConfig c;
  c.kind = ModelKind::clip_only;
  c.model = model;
  c.batch_size = 64;
  c.epochs = 100;
  c.max_lr = 5e-5;
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"kind", std::string(to_string(c.kind))},
          {"model", to_json(c.model)},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"max_lr", c.max_lr},
          {"base_lr_fraction", c.base_lr_fraction},
          {"half_cycle_epochs", c.half_cycle_epochs},
          {"seed", c.seed},
          {"eval_batch_size", c.eval_batch_size}};
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  TrainConfig c;
  const json known = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("training config: unknown key '" + key + "'");
  }
  try {
    if (j.contains("kind")) c.kind = parse_model_kind(j.at("kind").get<std::string>());
    if (j.contains("model")) c.model = config_from_json(j.at("model"));
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.max_lr = j.value("max_lr", c.max_lr);
    c.base_lr_fraction = j.value("base_lr_fraction", c.base_lr_fraction);
    c.half_cycle_epochs = j.value("half_cycle_epochs", c.half_cycle_epochs);
    c.seed = j.value("seed", c.seed);
    c.eval_batch_size = j.value("eval_batch_size", c.eval_batch_size);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const Metrics& m) {
  return {{"accuracy_all", m.accuracy_all},   {"accuracy_falsified", m.accuracy_falsified},
          {"accuracy_pristine", m.accuracy_pristine}, {"loss", m.loss},
          {"n_falsified", m.n_falsified},     {"n_pristine", m.n_pristine}};
}

json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"lr", r.lr},
          {"loss", r.train_loss},
          {"acc_all", r.val.accuracy_all},
          {"acc_f", r.val.accuracy_falsified},
          {"acc_p", r.val.accuracy_pristine}};
}

Metrics compute_metrics(const std::vector<double>& probs, const std::vector<Label>& labels) {
  if (probs.empty()) throw ValidationError("cannot compute metrics of an empty split");
  if (probs.size() != labels.size()) throw ValidationError("predictions and labels differ in length");
  Metrics m;
  std::size_t hit_f = 0, hit_p = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool falsified = labels[i] == Label::falsified;
    const bool said_falsified = probs[i] >= 0.5;
    m.loss += bce_loss(probs[i], label_value(labels[i]));
    if (falsified) {
      ++m.n_falsified;
      hit_f += said_falsified;
    } else {
      ++m.n_pristine;
      hit_p += !said_falsified;
    }
  }
  const auto n = static_cast<double>(probs.size());
  m.loss /= n;
  m.accuracy_all = static_cast<double>(hit_f + hit_p) / n;
  m.accuracy_falsified = m.n_falsified ? static_cast<double>(hit_f) / static_cast<double>(m.n_falsified) : 0.0;
  m.accuracy_pristine = m.n_pristine ? static_cast<double>(hit_p) / static_cast<double>(m.n_pristine) : 0.0;
  return m;
}

std::vector<Prediction> predict(Model& model, const std::vector<ExampleRecord>& examples,
                                const EmbeddingStore& store, const DomainVocabulary& vocab,
                                std::size_t batch_size) {
  std::vector<Prediction> out;
  out.reserve(examples.size());
  Rng unused(0);
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    std::vector<const ExampleRecord*> chunk;
    for (std::size_t i = start; i < end; ++i) chunk.push_back(&examples[i]);
    const Batch batch = assemble_batch(chunk, store, vocab, model.batch_config());
    const Tensor p = model.forward(batch, Mode::eval, unused);
    for (std::size_t i = 0; i < chunk.size(); ++i) out.push_back({chunk[i]->id, p[i]});
  }
  return out;
}

Metrics evaluate(Model& model, const std::vector<ExampleRecord>& examples, const EmbeddingStore& store,
                 const DomainVocabulary& vocab, std::size_t batch_size) {
  if (examples.empty()) throw ValidationError("cannot evaluate an empty split");
  std::vector<Label> labels;
  for (const auto& ex : examples) {
    if (!ex.label) throw ValidationError("example '" + ex.id + "' has no label");
    labels.push_back(*ex.label);
  }
  std::vector<double> probs;
  for (const auto& p : predict(model, examples, store, vocab, batch_size)) probs.push_back(p.p_falsified);
  return compute_metrics(probs, labels);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    if (end - start == 1 && !batches.empty()) {
      batches.back().push_back(order[start]);
    } else {
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  return batches;
}

TrainResult train(const TrainConfig& config, const std::vector<ExampleRecord>& train,
                  const std::vector<ExampleRecord>& val, const EmbeddingStore& store,
                  const DomainVocabulary& vocab, const TrainHooks& hooks) {
  config.validate();
  for (const auto& ex : train) {
    if (!ex.label) throw ValidationError("training example '" + ex.id + "' has no label");
  }
  if (train.size() < 2 && config.epochs > 0 && config.kind != ModelKind::clip_only) {
    throw ValidationError("training needs at least two examples");
  }

  auto model = make_model(config.kind, config.model, vocab.rows(), config.seed);
  const ParameterList params = model->parameters();
  Rng order_rng(config.seed * 0x9E3779B97F4A7C15ULL + 1);
  Rng dropout_rng(config.seed * 0x9E3779B97F4A7C15ULL + 2);

  const std::size_t steps_per_epoch = std::max<std::size_t>(1, epoch_batches(train.size(), config.batch_size, order_rng).size());
  order_rng = Rng(config.seed * 0x9E3779B97F4A7C15ULL + 1);
  const auto half_cycle = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::llround(config.half_cycle_epochs * static_cast<double>(steps_per_epoch))));
  const double base_lr = config.max_lr * config.base_lr_fraction;

  auto meta = [&](std::size_t epoch, const std::optional<Metrics>& m) {
    json j = {{"epoch", epoch}, {"seed", config.seed}, {"train", to_json(config)}};
    if (m) j["val"] = to_json(*m);
    return j;
  };

  TrainResult result;
  result.best = Checkpoint::capture(*model, vocab, meta(0, std::nullopt));
  std::uint64_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0, lr = 0.0;
    std::size_t seen = 0;
    for (const auto& idx : epoch_batches(train.size(), config.batch_size, order_rng)) {
      std::vector<const ExampleRecord*> chunk;
      for (std::size_t i : idx) chunk.push_back(&train[i]);
      const Batch batch = assemble_batch(chunk, store, vocab, model->batch_config());
      const Tensor p = model->forward(batch, Mode::train, dropout_rng);
      const std::size_t b = p.size();
      Tensor dp({b});
      double loss = 0.0;
      for (std::size_t i = 0; i < b; ++i) {
        loss += bce_loss(p[i], batch.labels[i]);
        dp[i] = bce_grad(p[i], batch.labels[i]) / static_cast<double>(b);
      }
      loss /= static_cast<double>(b);
      lr = cyclical_lr(step, config.max_lr, base_lr, half_cycle);
      model->zero_grad();
      model->backward(dp);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at step " + std::to_string(step) + " (epoch " + std::to_string(epoch) +
                           ", lr " + std::to_string(lr) + ", gradient norm " + std::to_string(grad_norm(params)) +
                           ")");
      }
      if (hooks.on_step) {
        StepRecord rec{epoch, static_cast<std::size_t>(step), lr, loss, {p.data().begin(), p.data().end()},
                       batch.labels};
        hooks.on_step(rec);
      }
      for (Parameter* prm : params) adam_step(*prm, lr);
      loss_sum += loss * static_cast<double>(b);
      seen += b;
      ++step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    const bool has_val = !val.empty();
    if (has_val) rec.val = evaluate(*model, val, store, vocab, config.eval_batch_size);
    result.epochs.push_back(rec);
    if (hooks.metrics_log) *hooks.metrics_log << to_json(rec).dump() << '\n' << std::flush;
    if (hooks.on_epoch) hooks.on_epoch(rec);

    const bool better = !has_val || !result.best_val || rec.val.accuracy_all > result.best_val->accuracy_all;
    if (better) {
      result.best_epoch = epoch;
      if (has_val) result.best_val = rec.val;
      result.best = Checkpoint::capture(*model, vocab, meta(epoch, result.best_val));
    }
  }
  return result;
}

}  // namespace ccn
