#include "ccn/train/ablation.hpp"

#include <ostream>
#include <sstream>

#include "ccn/errors.hpp"

namespace ccn {

namespace {

CcnConfig switches_off(const CcnConfig& base) {
  CcnConfig c = base;
  c.use_images = c.use_captions = c.use_entities = true;
  c.use_scenes = c.use_labels_feature = c.use_ner_feature = false;
  c.use_clip = c.use_bn = false;
  c.use_domains = true;
  c.evidence_only = false;
  c.text_encoder = TextEncoder::sentence_768;
  c.memory_layout = MemoryLayout::separate;
  c.fusion = Fusion::concat;
  return c;
}

const char* on_off(bool v) { return v ? "on" : "off"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

CcnConfig without_images(CcnConfig config) {
  config.use_images = false;
  config.use_scenes = false;
  config.use_labels_feature = false;
  return config;
}

CcnConfig without_captions(CcnConfig config) {
  config.use_captions = false;
  return config;
}

std::vector<AblationRow> reference_rows(const CcnConfig& base) {
  std::vector<AblationRow> rows;
  const CcnConfig r1 = switches_off(base);
  rows.push_back({"1", "separate memories, sentence embeddings", r1, false});
  rows.push_back({"2", "row 1 without images", without_images(r1), false});
  rows.push_back({"3", "row 1 without captions", without_captions(r1), false});
  CcnConfig c = r1;
  c.use_entities = false;
  rows.push_back({"4", "row 1 without entities", c, false});

  c = r1;
  c.use_bn = true;
  rows.push_back({"5", "+ batch norm", c, false});
  c.memory_layout = MemoryLayout::unified;
  rows.push_back({"6", "+ unified memory", c, false});
  rows.push_back({"7", "+ dataset filter", c, true});
  c.use_ner_feature = true;
  rows.push_back({"8", "+ entity overlap", c, true});
  c.use_clip = true;
  rows.push_back({"9", "+ joint embedding", c, true});
  c.use_scenes = true;
  rows.push_back({"10", "+ scenes", c, true});
  c.use_labels_feature = true;
  rows.push_back({"11", "+ label overlap", c, true});
  c.text_encoder = TextEncoder::token_lstm_512;
  c.memory_layout = MemoryLayout::separate;
  rows.push_back({"12", "full model, token encoder", c, true});
  c.use_domains = false;
  rows.push_back({"13", "full model without domains", c, true});
  return rows;
}

std::vector<AblationRow> directional_rows(const CcnConfig& full) {
  std::vector<AblationRow> rows;
  rows.push_back({"full", "all components", full, false});
  rows.push_back({"no_images", "without image evidence", without_images(full), false});
  rows.push_back({"no_captions", "without caption evidence", without_captions(full), false});
  CcnConfig c = full;
  c.use_bn = false;
  rows.push_back({"no_bn", "without batch norm", c, false});
  c = full;
  c.memory_layout = MemoryLayout::unified;
  rows.push_back({"unified", "unified memory", c, false});
  return rows;
}

std::vector<AblationResult> run_ablation(const std::vector<AblationRow>& rows, const TrainConfig& train_base,
                                         const std::vector<std::uint64_t>& seeds, const AblationData& data,
                                         const std::function<void(const AblationResult&)>& on_row) {
  if (!data.store || !data.vocab) throw ValidationError("ablation needs a store and a vocabulary");
  std::vector<AblationResult> results;
  for (const auto& row : rows) {
    for (std::uint64_t seed : seeds) {
      AblationResult r;
      r.row = row;
      r.seed = seed;
      try {
        TrainConfig tc = train_base;
        tc.model = row.config;
        tc.seed = seed;
        const std::vector<ExampleRecord>* tr = &data.train;
        const std::vector<ExampleRecord>* va = &data.val;
        const std::vector<ExampleRecord>* ev = &data.eval;
        std::vector<ExampleRecord> ftr, fva, fev;
        if (row.dataset_filter) {
          if (!data.filter) throw ConfigError("row " + row.id + " needs a dataset filter");
          ftr = data.filter(data.train);
          fva = data.filter(data.val);
          fev = data.filter(data.eval);
          tr = &ftr;
          va = &fva;
          ev = &fev;
        }
        TrainResult res = train(tc, *tr, *va, *data.store, *data.vocab);
        auto model = res.best.instantiate();
        r.metrics = evaluate(*model, *ev, *data.store, *data.vocab, tc.eval_batch_size);
        r.best_epoch = res.best_epoch;
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      if (on_row) on_row(r);
      results.push_back(std::move(r));
    }
  }
  return results;
}

std::string ablation_csv_header() {
  return "row,description,images,captions,entities,bn,memory,filter,ner,clip,scenes,labels,text_encoder,domains,"
         "seed,status,acc_all,acc_f,acc_p,loss,best_epoch,error";
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationResult>& results) {
  out << ablation_csv_header() << '\n';
  for (const auto& r : results) {
    const CcnConfig& c = r.row.config;
    // Scene and label columns are not applicable without image evidence.
    const std::string scenes = c.use_images ? on_off(c.use_scenes) : "-";
    const std::string labels = c.use_images ? on_off(c.use_labels_feature) : "-";
    std::ostringstream line;
    line.precision(6);
    line << csv_field(r.row.id) << ',' << csv_field(r.row.description) << ',' << on_off(c.use_images) << ','
         << on_off(c.use_captions) << ',' << on_off(c.use_entities) << ',' << on_off(c.use_bn) << ','
         << to_string(c.memory_layout) << ',' << on_off(r.row.dataset_filter) << ',' << on_off(c.use_ner_feature)
         << ',' << on_off(c.use_clip) << ',' << scenes << ',' << labels << ',' << to_string(c.text_encoder) << ','
         << on_off(c.use_domains) << ',' << r.seed << ',';
    if (r.metrics) {
      line << "ok," << r.metrics->accuracy_all << ',' << r.metrics->accuracy_falsified << ','
           << r.metrics->accuracy_pristine << ',' << r.metrics->loss << ',' << r.best_epoch << ',';
    } else {
      line << "failed,,,,,," << csv_field(r.error);
    }
    out << line.str() << '\n';
  }
}

}  // namespace ccn
