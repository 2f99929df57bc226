#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ccn/train/trainer.hpp"

namespace ccn {

/// One row of an ablation matrix.
struct AblationRow {
  std::string id;
  std::string description;
  CcnConfig config;
  // Remove exact query matches from pristine evidence before training.
  bool dataset_filter = false;
};

// The thirteen rows of the reference ablation table. Feature widths, layer
// widths and dropout come from `base`; every switch is set by the row.
std::vector<AblationRow> reference_rows(const CcnConfig& base);

// The strongest configuration and one row per removed component: image
// evidence (with scenes and label overlap), caption evidence, batch norm, and
// the separate-memory layout.
std::vector<AblationRow> directional_rows(const CcnConfig& full);

// Copies of `config` without any image evidence / without caption evidence.
CcnConfig without_images(CcnConfig config);
CcnConfig without_captions(CcnConfig config);

struct AblationResult {
  AblationRow row;
  std::uint64_t seed = 0;
  std::optional<Metrics> metrics;  // empty when the row failed
  std::size_t best_epoch = 0;
  std::string error;
};

using DatasetFilter = std::function<std::vector<ExampleRecord>(const std::vector<ExampleRecord>&)>;

struct AblationData {
  std::vector<ExampleRecord> train, val, eval;
  const EmbeddingStore* store = nullptr;
  const DomainVocabulary* vocab = nullptr;
  // Applied to every split of rows that ask for it. Without one, such rows
  // fail.
  DatasetFilter filter;
};

// Trains and evaluates every row under every seed. `train` supplies the
// optimization settings; its model configuration and seed are replaced per
// row. A failing row is reported and does not stop the others.
std::vector<AblationResult> run_ablation(const std::vector<AblationRow>& rows, const TrainConfig& train,
                                         const std::vector<std::uint64_t>& seeds, const AblationData& data,
                                         const std::function<void(const AblationResult&)>& on_row = {});

// CSV with one line per result: the switch columns of the reference table,
// then seed, status and metrics.
void write_ablation_csv(std::ostream& out, const std::vector<AblationResult>& results);
std::string ablation_csv_header();

}  // namespace ccn
