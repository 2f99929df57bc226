#include "ccn/report/verdict.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ccn/data/batch.hpp"
#include "ccn/errors.hpp"

namespace ccn {

using json = nlohmann::json;

Label verdict_for(double p_falsified) {
  return p_falsified >= kFalsifiedThreshold ? Label::falsified : Label::pristine;
}

std::vector<std::size_t> descending_order(const std::vector<double>& weights) {
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  return order;
}

MemoryReport memory_report(const AttentionRecord& record, std::size_t row, const ExampleRecord& example,
                           std::size_t k) {
  if (row >= record.weights.size()) throw DimensionError("attention record has no row " + std::to_string(row));
  const auto& w = record.weights[row];
  const auto& keys = record.item_keys[row];
  const auto& texts = record.item_texts[row];
  MemoryReport m;
  m.memory = record.memory;
  m.valid_items = w.size();
  m.k = std::min(k, w.size());
  auto item = [&](std::size_t j) {
    ReportItem it;
    it.index = j;
    it.item_id = keys[j];
    it.weight = w[j];
    const bool is_image = std::any_of(example.evidence_images.begin(), example.evidence_images.end(),
                                      [&](const EvidenceImageMeta& im) { return im.image_id == keys[j]; });
    if (is_image) {
      it.image = keys[j];
    } else {
      it.text = texts[j];
    }
    return it;
  };
  const auto order = descending_order(w);
  for (std::size_t r = 0; r < m.k; ++r) m.top.push_back(item(order[r]));
  for (std::size_t r = order.size() - m.k; r < order.size(); ++r) m.bottom.push_back(item(order[r]));
  return m;
}

VerdictReport verify_example(const Checkpoint& checkpoint, const ExampleRecord& example,
                             const EmbeddingStore& store, std::size_t k) {
  auto model = checkpoint.instantiate();
  const std::vector<const ExampleRecord*> one{&example};
  const Batch batch = assemble_batch(one, store, checkpoint.vocab, model->batch_config());
  Rng unused(0);
  const Tensor p = model->forward(batch, Mode::eval, unused);

  VerdictReport r;
  r.example_id = example.id;
  r.p_falsified = p[0];
  r.verdict = verdict_for(p[0]);
  r.model_kind = std::string(to_string(checkpoint.kind));
  for (const auto& rec : model->attention()) r.memories.push_back(memory_report(rec, 0, example, k));
  r.config_fingerprint = checkpoint.config.fingerprint();
  r.checkpoint_fingerprint = checkpoint.fingerprint();
  return r;
}

namespace {

json item_json(const ReportItem& it) {
  json j = {{"index", it.index}, {"item_id", it.item_id}, {"weight", it.weight}};
  if (it.text) j["text"] = *it.text;
  if (it.image) j["image"] = *it.image;
  return j;
}

ReportItem item_from_json(const json& j) {
  ReportItem it;
  it.index = j.at("index").get<std::size_t>();
  it.item_id = j.at("item_id").get<std::string>();
  it.weight = j.at("weight").get<double>();
  if (j.contains("text")) it.text = j.at("text").get<std::string>();
  if (j.contains("image")) it.image = j.at("image").get<std::string>();
  return it;
}

}  // namespace

json to_json(const VerdictReport& r) {
  json memories = json::array();
  for (const auto& m : r.memories) {
    json top = json::array(), bottom = json::array();
    for (const auto& it : m.top) top.push_back(item_json(it));
    for (const auto& it : m.bottom) bottom.push_back(item_json(it));
    memories.push_back(
        {{"memory", m.memory}, {"valid_items", m.valid_items}, {"k", m.k}, {"top", top}, {"bottom", bottom}});
  }
  return {{"example_id", r.example_id},
          {"verdict", std::string(to_string(r.verdict))},
          {"p_falsified", r.p_falsified},
          {"model_kind", r.model_kind},
          {"memories", memories},
          {"config_fingerprint", r.config_fingerprint},
          {"checkpoint_fingerprint", r.checkpoint_fingerprint}};
}

VerdictReport verdict_report_from_json(const json& j) {
  try {
    VerdictReport r;
    r.example_id = j.at("example_id").get<std::string>();
    r.verdict = parse_label(j.at("verdict").get<std::string>());
    r.p_falsified = j.at("p_falsified").get<double>();
    r.model_kind = j.at("model_kind").get<std::string>();
    for (const auto& m : j.at("memories")) {
      MemoryReport mr;
      mr.memory = m.at("memory").get<std::string>();
      mr.valid_items = m.at("valid_items").get<std::size_t>();
      mr.k = m.at("k").get<std::size_t>();
      for (const auto& it : m.at("top")) mr.top.push_back(item_from_json(it));
      for (const auto& it : m.at("bottom")) mr.bottom.push_back(item_from_json(it));
      r.memories.push_back(std::move(mr));
    }
    r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    r.checkpoint_fingerprint = j.at("checkpoint_fingerprint").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed verdict report: ") + e.what());
  }
}

std::string render_text(const VerdictReport& r) {
  std::ostringstream out;
  out << "example " << r.example_id << ": " << to_string(r.verdict) << " (p_falsified " << std::fixed
      << std::setprecision(4) << r.p_falsified << ", model " << r.model_kind << ")\n";
  auto listing = [&](const char* title, const std::vector<ReportItem>& items) {
    out << "  " << title << ":\n";
    for (const auto& it : items) {
      out << "    " << std::setprecision(4) << it.weight << "  [" << it.index << "] ";
      if (it.image) {
        out << "image " << *it.image;
      } else {
        out << '"' << it.text.value_or("") << "\" (" << it.item_id << ")";
      }
      out << '\n';
    }
  };
  for (const auto& m : r.memories) {
    out << m.memory << " memory, " << m.valid_items << " items\n";
    if (m.valid_items == 0) continue;
    listing(("top " + std::to_string(m.k)).c_str(), m.top);
    listing(("bottom " + std::to_string(m.k)).c_str(), m.bottom);
  }
  out << "config " << r.config_fingerprint << ", checkpoint " << r.checkpoint_fingerprint << '\n';
  return out.str();
}

}  // namespace ccn
