#include <algorithm>
#include <set>
#include <sstream>

#include "acceptance_checks.hpp"
#include "ccn/evidence/filter.hpp"
#include "ccn/evidence/image.hpp"
#include "ccn/evidence/ingest.hpp"
#include "ccn/evidence/text.hpp"
#include "ccn/math/rng.hpp"
#include "html_fixtures.hpp"

namespace ccn::acceptance {

namespace {

const std::filesystem::path kFixtures = CCN_FIXTURE_DIR;
constexpr std::size_t kMinHtmlFixtures = 20;
constexpr int kHashThreshold = 8;
constexpr double kPerturbedShare = 0.05;

Outcome html_cases() {
  const auto results = testing::run_html_cases(kFixtures);
  std::set<std::string> covered;
  std::size_t passed = 0;
  std::ostringstream failures;
  for (const auto& r : results) {
    covered.insert(r.covers.begin(), r.covers.end());
    if (r.ok) {
      ++passed;
    } else {
      failures << " " << r.file << " (" << r.message << ")";
    }
  }
  std::vector<std::string> missing;
  for (const std::string need :
       {"figcaption", "alt", "image-alt", "caption", "data-caption", "title", "hash-relocation", "malformed"})
    if (!covered.count(need)) missing.push_back(need);
  std::ostringstream d;
  d << "html " << passed << "/" << results.size() << " fixtures match";
  if (!missing.empty()) {
    d << ", missing coverage:";
    for (const auto& m : missing) d << " " << m;
  }
  d << failures.str();
  return {results.size() >= kMinHtmlFixtures && passed == results.size() && missing.empty(), d.str()};
}

// Every combination of (claim match, same domain) for sentences and images;
// only the items satisfying both may go.
Outcome filter_rule() {
  const PerceptualHash query{0x0123456789ABCDEFull};
  PerceptualHash near = query, far = query;
  near.bits ^= 0x7F;    // 7 bits away
  far.bits ^= 0x1FF;    // 9 bits away
  ExampleRecord ex;
  ex.id = "grid";
  ex.query_image_id = "q";
  ex.query_caption = "Floods hit the valley.";
  ex.query_domain = "news.com";
  ex.label = Label::pristine;
  std::map<std::string, PerceptualHash> hashes{{"q", query}};
  std::set<std::string> expect_dropped;
  for (const bool match : {true, false})
    for (const std::string domain : {"news.com", "other.org"}) {
      const std::string id = std::string(match ? "match" : "far") + "@" + domain;
      ex.evidence_images.push_back({id, domain, ImageSource::direct_image_search});
      hashes[id] = match ? near : far;
      const std::string text = match ? "floods HIT the valley" : "Rain in the valley";
      ex.sentences.push_back({text, SentenceKind::caption, domain, "https://" + domain + "/", MatchedBy::url});
      if (match && domain == "news.com") expect_dropped.insert(id);
    }

  const auto r = filter_pristine_evidence(ex, ex.query_domain, query, hashes, kHashThreshold);
  bool ok = r.dropped_images == 1 && r.dropped_sentences == 1 && r.example.evidence_images.size() == 3 &&
            r.example.sentences.size() == 3;
  for (const auto& im : r.example.evidence_images) ok = ok && !expect_dropped.count(im.image_id);
  for (const auto& s : r.example.sentences)
    ok = ok && !(s.domain == "news.com" && normalize_caption(s.text) == normalize_caption(ex.query_caption));

  ExampleRecord falsified = ex;
  falsified.label = Label::falsified;
  const bool falsified_kept = filter_pristine_evidence(falsified, ex.query_domain, query, hashes).example == falsified;

  std::ostringstream d;
  d << "filter drops " << r.dropped_images << " image / " << r.dropped_sentences
    << " sentence of the 2x2 grid (expected 1/1)" << (falsified_kept ? "" : ", falsified example changed");
  return {ok && falsified_kept, d.str()};
}

Outcome filter_idempotence() {
  Rng rng(17);
  const std::vector<std::string> domains{"a.com", "b.org", "c.net"};
  const std::vector<std::string> captions{"Snow in Rome", "snow in rome!", "Rain in Milan", "A parade"};
  std::vector<ExampleRecord> examples;
  std::map<std::string, PerceptualHash> hashes;
  auto pick = [&](const std::vector<std::string>& v) { return v[rng.index(v.size())]; };
  for (int i = 0; i < 200; ++i) {
    ExampleRecord ex;
    ex.id = "e" + std::to_string(i);
    ex.query_image_id = ex.id + "/q";
    ex.query_caption = pick(captions);
    ex.query_domain = pick(domains);
    ex.label = rng.uniform() < 0.5 ? Label::pristine : Label::falsified;
    hashes[ex.query_image_id] = PerceptualHash{rng.uniform() < 0.5 ? 0xFFull : 0xFF00FF00FFull};
    for (int j = 0; j < 6; ++j) {
      const std::string id = ex.id + "/i" + std::to_string(j);
      ex.evidence_images.push_back({id, pick(domains), ImageSource::direct_image_search});
      hashes[id] = PerceptualHash{rng.uniform() < 0.5 ? 0xF7ull : 0xFF00FF00F0ull};
      ex.sentences.push_back({pick(captions), SentenceKind::caption, pick(domains), "", MatchedBy::url});
    }
    examples.push_back(std::move(ex));
  }
  for (const auto& c : load_crawl(kFixtures / "crawl" / "crawl.jsonl")) {
    examples.push_back(ingest_record(c, AcceptAllLanguages{}));
    for (const auto& [id, h] : crawl_image_hashes(c)) hashes[id] = h;
  }
  DatasetFilterStats first, second;
  const auto once = filter_dataset(examples, hashes, &first);
  const auto twice = filter_dataset(once, hashes, &second);
  std::ostringstream d;
  d << "filter idempotent on " << examples.size() << " examples (first pass dropped " << first.dropped_images
    << " images, " << first.dropped_sentences << " sentences; second pass " << second.dropped_images << "/"
    << second.dropped_sentences << ")";
  return {twice == once && first.dropped_images > 0 && first.dropped_sentences > 0 && second.examples_changed == 0,
          d.str()};
}

Outcome hash_robustness() {
  const Image base = read_image(kFixtures / "images" / "scene.png");
  const auto h = perceptual_hash(base);
  const int fixture = hamming_distance(h, perceptual_hash(read_image(kFixtures / "images" / "scene_perturbed.png")));
  int worst = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    Image noisy = base;
    const std::size_t n = base.width * base.height;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx.begin(), idx.end());
    for (std::size_t k = 0; k < static_cast<std::size_t>(kPerturbedShare * n); ++k) {
      const int delta = rng.uniform() < 0.5 ? -1 : 1;
      for (std::size_t ch = 0; ch < base.channels; ++ch) {
        auto& v = noisy.pixels[idx[k] * base.channels + ch];
        v = static_cast<std::uint8_t>(std::clamp(static_cast<int>(v) + delta, 0, 255));
      }
    }
    worst = std::max(worst, hamming_distance(h, perceptual_hash(noisy)));
  }
  std::ostringstream d;
  d << "pHash under 5% +-1 brightness: fixture distance " << fixture << ", worst of 50 generated " << worst
    << " (<= " << kHashThreshold << ")";
  return {fixture <= kHashThreshold && worst <= kHashThreshold, d.str()};
}

Outcome caption_table() {
  const std::vector<std::pair<std::string, std::string>> table = {
      {"Hello, World!", "hello world"},  {"", ""},
      {"A.B.C -- test", "abc test"},     {"  Tabs\tand\nnewlines  ", "tabs and newlines"},
      {"«Quoted» — text", "quoted text"}, {"ÉCOLE fermée", "école fermée"},
      {"¿Qué pasa?", "qué pasa"},        {"!!!", ""},
  };
  std::size_t ok = 0;
  std::ostringstream bad;
  for (const auto& [in, want] : table) {
    const std::string got = normalize_caption(in);
    if (got == want) {
      ++ok;
    } else {
      bad << " '" << in << "' -> '" << got << "'";
    }
  }
  std::ostringstream d;
  d << "normalize_caption " << ok << "/" << table.size() << bad.str();
  return {ok == table.size(), d.str()};
}

}  // namespace

Outcome pipeline_fixtures() {
  bool pass = true;
  std::ostringstream d;
  for (auto part : {html_cases, filter_rule, filter_idempotence, hash_robustness, caption_table}) {
    Outcome o;
    try {
      o = part();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    pass = pass && o.pass;
    d << (d.tellp() > 0 ? "; " : "") << o.detail;
  }
  return {pass, d.str()};
}

}  // namespace ccn::acceptance
