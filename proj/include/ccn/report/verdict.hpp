#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ccn/data/embedding_store.hpp"
#include "ccn/data/example.hpp"
#include "ccn/model/checkpoint.hpp"
#include "ccn/model/model.hpp"

namespace ccn {

inline constexpr std::size_t kDefaultReportK = 4;
inline constexpr double kFalsifiedThreshold = 0.5;

struct ReportItem {
  std::size_t index = 0;  // position among the memory's valid items
  std::string item_id;
  std::optional<std::string> text;   // textual evidence
  std::optional<std::string> image;  // visual evidence: image id
  double weight = 0.0;

  friend bool operator==(const ReportItem&, const ReportItem&) = default;
};

/// Highest and lowest attention items of one memory. Both lists follow the
/// descending attention order; bottom is the tail of that order.
struct MemoryReport {
  std::string memory;
  std::size_t valid_items = 0;
  std::size_t k = 0;  // min(requested k, valid_items)
  std::vector<ReportItem> top;
  std::vector<ReportItem> bottom;

  friend bool operator==(const MemoryReport&, const MemoryReport&) = default;
};

struct VerdictReport {
  std::string example_id;
  Label verdict = Label::pristine;
  double p_falsified = 0.0;
  std::string model_kind;
  std::vector<MemoryReport> memories;
  std::string config_fingerprint;
  std::string checkpoint_fingerprint;

  friend bool operator==(const VerdictReport&, const VerdictReport&) = default;
};

Label verdict_for(double p_falsified);

// Indices of `weights` by descending weight, ties by ascending index.
std::vector<std::size_t> descending_order(const std::vector<double>& weights);

// Listing for example `row` of a forward pass. Items whose id is one of the
// example's evidence image ids are reported as images.
MemoryReport memory_report(const AttentionRecord& record, std::size_t row, const ExampleRecord& example,
                           std::size_t k);

// Runs the checkpoint's model on one example in eval mode.
VerdictReport verify_example(const Checkpoint& checkpoint, const ExampleRecord& example,
                             const EmbeddingStore& store, std::size_t k = kDefaultReportK);

nlohmann::json to_json(const VerdictReport& r);
VerdictReport verdict_report_from_json(const nlohmann::json& j);

// Plain-text rendering: verdict line, then per memory the top and bottom
// listings with weights.
std::string render_text(const VerdictReport& r);

}  // namespace ccn
