// ccn: command-line front end. Exit codes: 0 success, 1 operational failure
// (error JSON on stderr), 2 usage error.

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ccn/errors.hpp"
#include "ccn/evidence/filter.hpp"
#include "ccn/evidence/ingest.hpp"
#include "ccn/report/verdict.hpp"
#include "ccn/train/ablation.hpp"
#include "ccn/train/gradient_suite.hpp"
#include "ccn/train/synthetic.hpp"
#include "ccn/train/trainer.hpp"
#include "ccn/util/kv_config.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ccn {
namespace {

std::string error_type(const std::exception& e) {
  const auto* ccn_error = dynamic_cast<const Error*>(&e);
  return ccn_error ? ccn_error->kind() : "internal";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

// Writes to `path`, or to stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

std::map<std::string, PerceptualHash> read_hashes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open hashes " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("hashes file is not JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw FormatError("hashes file must map image ids to hex hashes");
  std::map<std::string, PerceptualHash> out;
  for (const auto& [id, hex] : j.items()) {
    if (!hex.is_string()) throw FormatError("hash of '" + id + "' must be a string");
    out[id] = PerceptualHash::from_hex(hex.get<std::string>());
  }
  return out;
}

json hashes_json(const std::map<std::string, PerceptualHash>& hashes) {
  json j = json::object();
  for (const auto& [id, h] : hashes) j[id] = h.to_hex();
  return j;
}

// --config FILE and --set key=value on top of a settings object.
struct Overrides {
  std::string file;
  std::vector<std::string> assignments;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", file, "key-value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", assignments, "override one key (key=value), repeatable");
  }
  json apply(json base) const {
    if (!file.empty()) base = apply_kv_file(std::move(base), file);
    for (const auto& a : assignments) base = apply_kv_assignment(std::move(base), a);
    return base;
  }
};

Split parse_split_flag(const std::string& s) { return parse_split(s); }

struct World {
  std::vector<ExampleRecord> examples;
  EmbeddingStore store;
};

World load_world(const std::string& dataset, const std::string& store, bool require_labels = true) {
  World w;
  w.examples = load_dataset(dataset, require_labels);
  w.store = EmbeddingStore::read(store);
  return w;
}

DomainVocabulary vocab_or_build(const std::string& path, const std::vector<ExampleRecord>& examples) {
  if (!path.empty()) return DomainVocabulary::read(path);
  return DomainVocabulary::build(filter_split(examples, Split::train));
}

const ExampleRecord& find_example(const std::vector<ExampleRecord>& examples, const std::string& id) {
  if (id.empty()) {
    if (examples.size() == 1) return examples.front();
    throw ValidationError("dataset has " + std::to_string(examples.size()) + " examples; choose one with --id");
  }
  const auto it = std::find_if(examples.begin(), examples.end(), [&](const ExampleRecord& e) { return e.id == id; });
  if (it == examples.end()) throw ValidationError("no example with id '" + id + "'");
  return *it;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("seeds must be comma-separated integers, got '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("no seeds given");
  return out;
}

// Listing of a report as `inspect` prints it: per memory, top then bottom.
std::string render_listing(const VerdictReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  for (const auto& m : r.memories) {
    auto rows = [&](const char* side, const std::vector<ReportItem>& items) {
      for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& it = items[i];
        out << m.memory << '\t' << side << '\t' << i + 1 << '\t' << it.index << '\t' << it.weight << '\t'
            << it.item_id << '\t' << (it.image ? "image:" + *it.image : it.text.value_or("")) << '\n';
      }
    };
    rows("top", m.top);
    rows("bottom", m.bottom);
  }
  return out.str();
}

}  // namespace
}  // namespace ccn

int main(int argc, char** argv) {
  using namespace ccn;
  CLI::App app{"Consistency-checking network for image/caption claims"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "turn raw crawl records into dataset JSON lines");
  std::string crawl_path, out_path, hashes_out;
  bool heuristic = false;
  ingest->add_option("--crawl", crawl_path, "crawl records (JSON lines)")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", out_path, "dataset output")->required();
  ingest->add_option("--hashes-out", hashes_out, "write image hashes keyed by image id (JSON)");
  ingest->add_flag("--language-heuristic", heuristic, "drop pages whose title fails the built-in English heuristic");

  // filter-evidence
  auto* filter = app.add_subcommand("filter-evidence", "drop evidence matching pristine claims from their own site");
  std::string dataset_path, hashes_path;
  int threshold = 8;
  filter->add_option("--dataset", dataset_path, "input dataset")->required()->check(CLI::ExistingFile);
  filter->add_option("--hashes", hashes_path, "image hashes keyed by image id (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  filter->add_option("--out", out_path, "filtered dataset")->required();
  filter->add_option("--threshold", threshold, "maximum Hamming distance for a claim-image match")
      ->check(CLI::Range(0, 64));

  // build-vocab
  auto* build_vocab = app.add_subcommand("build-vocab", "domain vocabulary from the training split");
  std::size_t min_count = DomainVocabulary::kDefaultMinCount;
  build_vocab->add_option("--dataset", dataset_path, "dataset")->required()->check(CLI::ExistingFile);
  build_vocab->add_option("--min-count", min_count, "minimum occurrences")->check(CLI::PositiveNumber);
  build_vocab->add_option("--out", out_path, "vocabulary JSON")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset, store and matching train config");
  std::string out_dir;
  Overrides synth_cfg;
  synth->add_option("--out-dir", out_dir, "output directory")->required();
  synth_cfg.add_to(synth);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model and keep the best validation checkpoint");
  std::string store_path, vocab_path, metrics_log;
  Overrides train_cfg;
  train_cmd->add_option("--dataset", dataset_path, "dataset")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--store", store_path, "embedding store")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--vocab", vocab_path, "domain vocabulary (default: built from train)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out_path, "checkpoint output")->required();
  train_cmd->add_option("--metrics-log", metrics_log, "per-epoch JSON lines");
  train_cfg.add_to(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "metrics of a checkpoint on one split");
  std::string checkpoint_path, split_name = "test";
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--dataset", dataset_path, "dataset")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--store", store_path, "embedding store")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", split_name, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train and evaluate a matrix of configurations");
  std::string rows_name = "reference", seeds_text = "1";
  Overrides ablate_cfg;
  ablate->add_option("--dataset", dataset_path, "dataset")->required()->check(CLI::ExistingFile);
  ablate->add_option("--store", store_path, "embedding store")->required()->check(CLI::ExistingFile);
  ablate->add_option("--vocab", vocab_path, "domain vocabulary")->check(CLI::ExistingFile);
  ablate->add_option("--hashes", hashes_path, "image hashes, enables the dataset-filter row")
      ->check(CLI::ExistingFile);
  ablate->add_option("--rows", rows_name, "reference or directional")
      ->check(CLI::IsMember({"reference", "directional"}));
  ablate->add_option("--seeds", seeds_text, "comma-separated seeds");
  ablate->add_option("--split", split_name, "evaluation split")->check(CLI::IsMember({"val", "test"}));
  ablate->add_option("--out", out_path, "CSV output (default stdout)");
  ablate_cfg.add_to(ablate);

  // verify / inspect
  auto* verify = app.add_subcommand("verify", "verdict report for one claim");
  auto* inspect = app.add_subcommand("inspect", "attention-ranked evidence of one claim");
  std::string example_id, format = "both";
  std::size_t k = kDefaultReportK;
  bool as_json = false;
  for (auto* cmd : {verify, inspect}) {
    cmd->add_option("--checkpoint", checkpoint_path, "checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_option("--dataset", dataset_path, "dataset holding the claim")->required()->check(CLI::ExistingFile);
    cmd->add_option("--store", store_path, "embedding store")->required()->check(CLI::ExistingFile);
    cmd->add_option("--id", example_id, "example id (optional for one-example datasets)");
    cmd->add_option("--k", k, "items listed per memory and side")->check(CLI::Range(1, 1000000));
  }
  verify->add_option("--format", format, "json, text or both")->check(CLI::IsMember({"json", "text", "both"}));
  verify->add_option("--out", out_path, "write the JSON report here instead of stdout");
  inspect->add_flag("--json", as_json, "print the report JSON");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every layer and model variant");
  std::size_t n_seeds = 5;
  double h = 1e-5, tolerance = 1e-4;
  gradcheck->add_option("--seeds", n_seeds, "number of seeds (1..n)")->check(CLI::PositiveNumber);
  gradcheck->add_option("--step", h, "finite-difference step")->check(CLI::PositiveNumber);
  gradcheck->add_option("--tolerance", tolerance, "maximum relative error")->check(CLI::PositiveNumber);
  bool verbose = false;
  gradcheck->add_flag("--verbose", verbose, "print every check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    if (cmd == ingest) {
      const auto crawl = load_crawl(crawl_path);
      const HeuristicLanguageIdentifier heuristic_id;
      const AcceptAllLanguages accept_all;
      const LanguageIdentifier& identifier =
          heuristic ? static_cast<const LanguageIdentifier&>(heuristic_id) : accept_all;
      IngestStats stats;
      std::vector<ExampleRecord> examples;
      std::map<std::string, PerceptualHash> hashes;
      for (const auto& c : crawl) {
        examples.push_back(ingest_record(c, identifier, &stats));
        hashes.merge(crawl_image_hashes(c));
      }
      write_dataset(out_path, examples);
      if (!hashes_out.empty()) write_text(hashes_out, hashes_json(hashes).dump(2) + "\n");
      json summary = to_json(stats);
      summary["examples"] = examples.size();
      std::cout << summary.dump() << '\n';
    } else if (cmd == filter) {
      const auto examples = load_dataset(dataset_path);
      DatasetFilterStats stats;
      const auto hashes = read_hashes(hashes_path);
      std::vector<ExampleRecord> out;
      for (const auto& ex : examples) {
        const auto q = hashes.find(ex.query_image_id);
        const auto r = filter_pristine_evidence(
            ex, ex.query_domain, q == hashes.end() ? std::nullopt : std::optional<PerceptualHash>(q->second), hashes,
            threshold);
        if (r.dropped_images || r.dropped_sentences) ++stats.examples_changed;
        stats.dropped_images += r.dropped_images;
        stats.dropped_sentences += r.dropped_sentences;
        out.push_back(r.example);
      }
      write_dataset(out_path, out);
      std::cout << json{{"examples", out.size()},
                        {"examples_changed", stats.examples_changed},
                        {"dropped_images", stats.dropped_images},
                        {"dropped_sentences", stats.dropped_sentences}}
                       .dump()
                << '\n';
    } else if (cmd == build_vocab) {
      const auto examples = load_dataset(dataset_path);
      const auto vocab = DomainVocabulary::build(filter_split(examples, Split::train), min_count);
      vocab.write(out_path);
      std::cout << json{{"domains", vocab.domains().size()}, {"rows", vocab.rows()}}.dump() << '\n';
    } else if (cmd == synth) {
      const SyntheticSpec spec = synthetic_spec_from_json(synth_cfg.apply(to_json(SyntheticSpec{})));
      spec.validate();
      const SyntheticData data = generate_synthetic(spec);
      fs::create_directories(out_dir);
      write_dataset(fs::path(out_dir) / "dataset.jsonl", data.examples);
      data.store.write(fs::path(out_dir) / "store.ccns");
      TrainConfig tc;
      tc.model = synthetic_model_config(spec);
      write_text(fs::path(out_dir) / "train.conf",
                 "# model widths matching the synthetic store\n" + to_kv_text(to_json(tc)));
      write_text(fs::path(out_dir) / "spec.json", to_json(spec).dump(2) + "\n");
      std::cout << json{{"examples", data.examples.size()}, {"out_dir", out_dir}}.dump() << '\n';
    } else if (cmd == train_cmd) {
      const TrainConfig tc = train_config_from_json(train_cfg.apply(to_json(TrainConfig{})));
      tc.validate();
      const World w = load_world(dataset_path, store_path);
      const auto vocab = vocab_or_build(vocab_path, w.examples);
      std::ofstream log;
      TrainHooks hooks;
      if (!metrics_log.empty()) {
        log.open(metrics_log);
        if (!log) throw IoError("cannot write " + metrics_log);
        hooks.metrics_log = &log;
      }
      const auto result = train(tc, filter_split(w.examples, Split::train), filter_split(w.examples, Split::val),
                                w.store, vocab, hooks);
      result.best.write(out_path);
      json summary = {{"best_epoch", result.best_epoch}, {"checkpoint", result.best.fingerprint()}};
      if (result.best_val) summary["val"] = to_json(*result.best_val);
      std::cout << summary.dump() << '\n';
    } else if (cmd == eval_cmd) {
      const Checkpoint ckpt = Checkpoint::read(checkpoint_path);
      const World w = load_world(dataset_path, store_path);
      auto model = ckpt.instantiate();
      const auto m = evaluate(*model, filter_split(w.examples, parse_split_flag(split_name)), w.store, ckpt.vocab);
      json out = to_json(m);
      out["split"] = split_name;
      out["checkpoint"] = ckpt.fingerprint();
      std::cout << out.dump() << '\n';
    } else if (cmd == ablate) {
      const TrainConfig tc = train_config_from_json(ablate_cfg.apply(to_json(TrainConfig{})));
      tc.validate();
      const World w = load_world(dataset_path, store_path);
      const auto vocab = vocab_or_build(vocab_path, w.examples);
      AblationData data;
      data.train = filter_split(w.examples, Split::train);
      data.val = filter_split(w.examples, Split::val);
      data.eval = filter_split(w.examples, parse_split_flag(split_name));
      data.store = &w.store;
      data.vocab = &vocab;
      if (!hashes_path.empty()) {
        auto hashes = std::make_shared<std::map<std::string, PerceptualHash>>(read_hashes(hashes_path));
        data.filter = [hashes](const std::vector<ExampleRecord>& ex) { return filter_dataset(ex, *hashes); };
      }
      auto rows = rows_name == "reference" ? reference_rows(tc.model) : directional_rows(tc.model);
      if (!data.filter) {
        const auto before = rows.size();
        std::erase_if(rows, [](const AblationRow& r) { return r.dataset_filter; });
        if (rows.size() != before)
          std::cerr << "skipping " << before - rows.size() << " rows that need --hashes for the dataset filter\n";
      }
      const auto results = run_ablation(rows, tc, parse_seeds(seeds_text), data, [](const AblationResult& r) {
        std::cerr << "row " << r.row.id << " seed " << r.seed << ": "
                  << (r.metrics ? "acc " + std::to_string(r.metrics->accuracy_all) : "failed: " + r.error) << '\n';
      });
      std::ostringstream csv;
      write_ablation_csv(csv, results);
      emit(out_path, csv.str());
      if (std::any_of(results.begin(), results.end(), [](const AblationResult& r) { return !r.metrics; }))
        throw ValidationError("one or more ablation rows failed; see the status column");
    } else if (cmd == verify || cmd == inspect) {
      const Checkpoint ckpt = Checkpoint::read(checkpoint_path);
      const World w = load_world(dataset_path, store_path, false);
      const VerdictReport r = verify_example(ckpt, find_example(w.examples, example_id), w.store, k);
      if (cmd == verify) {
        if (format != "text") emit(out_path, to_json(r).dump(2) + "\n");
        if (format != "json") std::cout << render_text(r);
      } else {
        std::cout << (as_json ? to_json(r).dump(2) + "\n" : render_listing(r));
      }
    } else if (cmd == gradcheck) {
      std::vector<std::uint64_t> seeds;
      for (std::uint64_t s = 1; s <= n_seeds; ++s) seeds.push_back(s);
      const auto start = std::chrono::steady_clock::now();
      const auto checks = run_gradient_suite(seeds, h);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      const GradientCheck* worst = nullptr;
      for (const auto& c : checks) {
        if (!worst || c.report.max_rel_error > worst->report.max_rel_error) worst = &c;
        if (verbose)
          std::cout << c.name << " seed " << c.seed << ": " << std::scientific << std::setprecision(3)
                    << c.report.max_rel_error << '\n';
      }
      const double max_err = worst ? worst->report.max_rel_error : 0.0;
      std::cout << "gradcheck: " << checks.size() << " checks, max relative error " << std::scientific
                << std::setprecision(3) << max_err;
      if (worst) std::cout << " (" << worst->name << ", seed " << worst->seed << ", " << worst->report.worst_parameter << ")";
      std::cout << ", tolerance " << tolerance << ", " << std::fixed << std::setprecision(1) << secs << " s\n";
      if (!(max_err < tolerance)) throw NumericError("gradient check exceeded the tolerance");
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"command", cmd->get_name()}, {"type", error_type(e)}, {"message", e.what()}}}}.dump()
              << '\n';
    return 1;
  }
  return 0;
}
