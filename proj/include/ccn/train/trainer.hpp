#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ccn/data/domain_vocab.hpp"
#include "ccn/data/embedding_store.hpp"
#include "ccn/data/example.hpp"
#include "ccn/model/checkpoint.hpp"

namespace ccn {

/// Optimization settings. Dropout rates live in the model configuration.
struct TrainConfig {
  ModelKind kind = ModelKind::ccn;
  CcnConfig model;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  double max_lr = 6e-5;
  // Lower end of the cyclical schedule as a fraction of max_lr.
  double base_lr_fraction = 0.1;
  // Half period of the schedule in epochs.
  double half_cycle_epochs = 2.0;
  std::uint64_t seed = 1;
  std::size_t eval_batch_size = 256;

  // Throws ConfigError.
  void validate() const;

  // Head-only CLIP baseline: lr 5e-5, batch 64, 100 epochs.
  static TrainConfig clip_only(const CcnConfig& model);
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct Metrics {
  double accuracy_all = 0.0;
  double accuracy_falsified = 0.0;  // recall of falsified at threshold 0.5
  double accuracy_pristine = 0.0;
  double loss = 0.0;
  std::size_t n_falsified = 0;
  std::size_t n_pristine = 0;
};

nlohmann::json to_json(const Metrics& m);

// Metrics of probabilities p_f against labels. Throws ValidationError on an
// empty or mismatched input.
Metrics compute_metrics(const std::vector<double>& probs, const std::vector<Label>& labels);

struct Prediction {
  std::string id;
  double p_falsified = 0.0;
};

// Eval-mode predictions in input order. Examples must be labeled only when
// metrics are requested.
std::vector<Prediction> predict(Model& model, const std::vector<ExampleRecord>& examples,
                                const EmbeddingStore& store, const DomainVocabulary& vocab,
                                std::size_t batch_size = 256);
// Throws ValidationError on an empty split.
Metrics evaluate(Model& model, const std::vector<ExampleRecord>& examples, const EmbeddingStore& store,
                 const DomainVocabulary& vocab, std::size_t batch_size = 256);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;        // at the last step of the epoch
  double train_loss = 0.0;
  Metrics val;
};

nlohmann::json to_json(const EpochRecord& r);

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;  // global, 0-based
  double lr = 0.0;
  double loss = 0.0;
  std::vector<double> probs;
  std::vector<double> labels;
};

struct TrainResult {
  Checkpoint best;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  std::optional<Metrics> best_val;
  std::vector<EpochRecord> epochs;
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
  // JSON lines per epoch: {epoch, lr, loss, acc_all, acc_f, acc_p}.
  std::ostream* metrics_log = nullptr;
};

// Trains on `train`, keeps the checkpoint with the best validation
// accuracy_all (earlier epoch on ties). With zero epochs the initialized
// model is returned. A non-finite loss raises NumericError carrying the step,
// learning rate and gradient norm.
TrainResult train(const TrainConfig& config, const std::vector<ExampleRecord>& train,
                  const std::vector<ExampleRecord>& val, const EmbeddingStore& store,
                  const DomainVocabulary& vocab, const TrainHooks& hooks = {});

// Batches of one epoch: a seeded shuffle cut into batch_size chunks, with a
// trailing single example merged into the previous batch.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng);

}  // namespace ccn
