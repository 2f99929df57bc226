#include "ccn/train/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "ccn/errors.hpp"
#include "ccn/math/rng.hpp"

namespace ccn {

using nlohmann::json;

std::string_view to_string(EvidenceMode m) {
  switch (m) {
    case EvidenceMode::informative: return "informative";
    case EvidenceMode::label_independent: return "label_independent";
    case EvidenceMode::label_leaking: return "label_leaking";
  }
  return "?";
}

EvidenceMode parse_evidence_mode(std::string_view s) {
  if (s == "informative") return EvidenceMode::informative;
  if (s == "label_independent") return EvidenceMode::label_independent;
  if (s == "label_leaking") return EvidenceMode::label_leaking;
  throw ConfigError("unknown evidence mode '" + std::string(s) + "'");
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("synthetic spec: " + m); };
  if (n_train + n_val + n_test == 0) fail("no examples requested");
  if (!(falsified_share >= 0 && falsified_share <= 1)) fail("falsified_share must be in [0, 1]");
  if (latent_dim == 0) fail("latent_dim must be positive");
  if (features.image == 0 || features.scene == 0 || features.sentence == 0 || features.token == 0 ||
      features.clip == 0) {
    fail("feature widths must be positive");
  }
  if (signal < 0 || noise < 0 || clip_noise < 0) fail("signal and noise must be non-negative");
  if (!(image_scale > 0 && text_scale > 0)) fail("modality scales must be positive");
  if (clip_noise == 0 && !clip_signal) fail("clip_noise must be positive when clip_signal is off");
  if (min_images == 0 || min_images > max_images) fail("image count range is empty");
  if (min_sentences == 0 || min_sentences > max_sentences) fail("sentence count range is empty");
  if (min_entities > max_entities) fail("entity count range is empty");
  for (double p : {topic_share, spurious_match_rate, missing_images, missing_sentences, relevant_rate, entity_relevant_rate, reliable_rate}) {
    if (!(p >= 0 && p <= 1)) fail("rates must be in [0, 1]");
  }
  if (missing_images + missing_sentences > 1) fail("missing_images + missing_sentences exceeds 1");
  if (labels_per_event == 0 || labels_per_event > label_pool) fail("labels_per_event must be in [1, label_pool]");
  if (entities_per_event == 0 || entities_per_event > entity_pool) {
    fail("entities_per_event must be in [1, entity_pool]");
  }
  if (domain_pool == 0 || reliable_domains > domain_pool) fail("reliable_domains must not exceed domain_pool");
}

json to_json(const SyntheticSpec& s) {
  return {{"n_train", s.n_train},
          {"n_val", s.n_val},
          {"n_test", s.n_test},
          {"falsified_share", s.falsified_share},
          {"latent_dim", s.latent_dim},
          {"features",
           {{"image", s.features.image},
            {"scene", s.features.scene},
            {"sentence", s.features.sentence},
            {"token", s.features.token},
            {"clip", s.features.clip}}},
          {"topic_share", s.topic_share},
          {"signal", s.signal},
          {"noise", s.noise},
          {"evidence_mode", to_string(s.evidence_mode)},
          {"clip_signal", s.clip_signal},
          {"clip_noise", s.clip_noise},
          {"leak_strength", s.leak_strength},
          {"image_scale", s.image_scale},
          {"image_offset", s.image_offset},
          {"text_scale", s.text_scale},
          {"min_images", s.min_images},
          {"max_images", s.max_images},
          {"min_sentences", s.min_sentences},
          {"max_sentences", s.max_sentences},
          {"min_entities", s.min_entities},
          {"max_entities", s.max_entities},
          {"missing_images", s.missing_images},
          {"missing_sentences", s.missing_sentences},
          {"relevant_rate", s.relevant_rate},
          {"spurious_match_rate", s.spurious_match_rate},
          {"entity_relevant_rate", s.entity_relevant_rate},
          {"label_pool", s.label_pool},
          {"labels_per_event", s.labels_per_event},
          {"entity_pool", s.entity_pool},
          {"entities_per_event", s.entities_per_event},
          {"domain_pool", s.domain_pool},
          {"reliable_domains", s.reliable_domains},
          {"reliable_rate", s.reliable_rate},
          {"seed", s.seed}};
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
  SyntheticSpec s;
  const json defaults = to_json(s);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("synthetic spec: unknown key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("n_train", s.n_train);
    get("n_val", s.n_val);
    get("n_test", s.n_test);
    get("falsified_share", s.falsified_share);
    get("latent_dim", s.latent_dim);
    if (j.contains("features")) {
      const json& f = j.at("features");
      for (const auto& [key, value] : f.items()) {
        if (!defaults["features"].contains(key)) throw ConfigError("synthetic spec: unknown feature '" + key + "'");
      }
      if (f.contains("image")) s.features.image = f.at("image").get<std::size_t>();
      if (f.contains("scene")) s.features.scene = f.at("scene").get<std::size_t>();
      if (f.contains("sentence")) s.features.sentence = f.at("sentence").get<std::size_t>();
      if (f.contains("token")) s.features.token = f.at("token").get<std::size_t>();
      if (f.contains("clip")) s.features.clip = f.at("clip").get<std::size_t>();
    }
    get("topic_share", s.topic_share);
    get("signal", s.signal);
    get("noise", s.noise);
    if (j.contains("evidence_mode")) s.evidence_mode = parse_evidence_mode(j.at("evidence_mode").get<std::string>());
    get("clip_signal", s.clip_signal);
    get("clip_noise", s.clip_noise);
    get("leak_strength", s.leak_strength);
    get("image_scale", s.image_scale);
    get("image_offset", s.image_offset);
    get("text_scale", s.text_scale);
    get("min_images", s.min_images);
    get("max_images", s.max_images);
    get("min_sentences", s.min_sentences);
    get("max_sentences", s.max_sentences);
    get("min_entities", s.min_entities);
    get("max_entities", s.max_entities);
    get("missing_images", s.missing_images);
    get("missing_sentences", s.missing_sentences);
    get("relevant_rate", s.relevant_rate);
    get("spurious_match_rate", s.spurious_match_rate);
    get("entity_relevant_rate", s.entity_relevant_rate);
    get("label_pool", s.label_pool);
    get("labels_per_event", s.labels_per_event);
    get("entity_pool", s.entity_pool);
    get("entities_per_event", s.entities_per_event);
    get("domain_pool", s.domain_pool);
    get("reliable_domains", s.reliable_domains);
    get("reliable_rate", s.reliable_rate);
    get("seed", s.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

struct Event {
  std::size_t id = 0;
  std::vector<double> visual;    // drives image and scene features
  std::vector<double> semantic;  // drives text and joint embeddings
  std::vector<std::size_t> labels;
  std::vector<std::size_t> entities;
};

class Generator {
 public:
  explicit Generator(const SyntheticSpec& spec) : s_(spec), rng_(spec.seed) {
    const std::size_t L = s_.latent_dim;
    const FeatureDims& f = s_.features;
    for (std::size_t dim : {f.image, f.scene, f.sentence, f.token, f.clip}) {
      proj_.push_back(random_matrix(dim, L, 1.0 / std::sqrt(static_cast<double>(L))));
      leak_.push_back(random_matrix(dim, 1, s_.leak_strength).front());
    }
    entity_vec_ = random_matrix(f.token, s_.entity_pool, 1.0);
    entity_sentence_ = random_matrix(f.sentence, s_.entity_pool, 1.0);
  }

  SyntheticData run() {
    SyntheticData out;
    const FeatureDims& f = s_.features;
    out.store.declare(Section::image_obj, f.image);
    out.store.declare(Section::image_scene, f.scene);
    out.store.declare(Section::sentence, f.sentence);
    out.store.declare(Section::tokens, f.token);
    out.store.declare(Section::clip_image, f.clip);
    out.store.declare(Section::clip_text, f.clip);
    std::size_t n = 0;
    for (auto [split, count] : {std::pair{Split::train, s_.n_train}, std::pair{Split::val, s_.n_val},
                                std::pair{Split::test, s_.n_test}}) {
      const auto n_f = static_cast<std::size_t>(std::llround(s_.falsified_share * static_cast<double>(count)));
      std::vector<Label> labels(count, Label::pristine);
      std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_f), Label::falsified);
      rng_.shuffle(labels.begin(), labels.end());
      for (Label label : labels) out.examples.push_back(example(n++, split, label, out.store));
    }
    return out;
  }

 private:
  enum Modality { kImage, kScene, kSentence, kToken, kClip };

  std::vector<std::vector<double>> random_matrix(std::size_t rows, std::size_t cols, double scale) {
    std::vector<std::vector<double>> m(cols, std::vector<double>(rows));
    for (auto& col : m)
      for (double& v : col) v = scale * rng_.normal();
    return m;
  }

  void new_topic() {
    topic_visual_.assign(s_.latent_dim, 0.0);
    topic_semantic_.assign(s_.latent_dim, 0.0);
    for (double& v : topic_visual_) v = rng_.normal();
    for (double& v : topic_semantic_) v = rng_.normal();
  }

  // Event around the current topic, with unit variance per latent component.
  Event event() {
    Event e;
    e.id = next_event_++;
    const double shared = std::sqrt(s_.topic_share), own = std::sqrt(1.0 - s_.topic_share);
    e.visual.resize(s_.latent_dim);
    e.semantic.resize(s_.latent_dim);
    for (std::size_t l = 0; l < s_.latent_dim; ++l) {
      e.visual[l] = shared * topic_visual_[l] + own * rng_.normal();
      e.semantic[l] = shared * topic_semantic_[l] + own * rng_.normal();
    }
    e.labels = distinct(s_.labels_per_event, s_.label_pool);
    e.entities = distinct(s_.entities_per_event, s_.entity_pool);
    return e;
  }

  std::vector<std::size_t> distinct(std::size_t k, std::size_t pool) {
    std::vector<std::size_t> out;
    while (out.size() < k) {
      const std::size_t v = rng_.index(pool);
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
  }

  // signal * P z + noise, plus the leak offset when requested.
  std::vector<double> embed(Modality m, const Event& e, double noise, bool leak) {
    const auto& P = proj_[m];
    const auto& z = (m == kImage || m == kScene) ? e.visual : e.semantic;
    std::vector<double> x(P.front().size(), 0.0);
    for (std::size_t l = 0; l < z.size(); ++l)
      for (std::size_t k = 0; k < x.size(); ++k) x[k] += P[l][k] * z[l];
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] = s_.signal * x[k] + noise * rng_.normal() + (leak ? leak_[m][k] : 0.0);
    }
    finish(m, x);
    return x;
  }

  void finish(Modality m, std::vector<double>& x) const {
    if (m == kImage || m == kScene) {
      for (double& v : x) v = s_.image_scale * (v + s_.image_offset);
    } else if (m == kSentence || m == kToken) {
      for (double& v : x) v *= s_.text_scale;
    }
  }

  // Token rows about the event, with one row per mentioned entity mixed in.
  Tensor tokens(const Event& e, std::size_t len, const std::vector<std::size_t>& mentioned, bool leak) {
    const std::size_t d = s_.features.token;
    Tensor t({len + mentioned.size(), d});
    std::size_t row = 0;
    std::size_t next_mention = 0;
    for (std::size_t i = 0; i < len + mentioned.size(); ++i) {
      std::vector<double> v;
      const bool mention = next_mention < mentioned.size() && (row >= len || rng_.bernoulli(0.4));
      if (mention) {
        v = entity_vec_[mentioned[next_mention++]];
        for (std::size_t k = 0; k < d; ++k) v[k] += s_.noise * rng_.normal() + (leak ? leak_[kToken][k] : 0.0);
        finish(kToken, v);
      } else {
        v = embed(kToken, e, s_.noise, leak);
        ++row;
      }
      std::copy(v.begin(), v.end(), t.data().begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    return t;
  }

  // Name embedding of an entity string; unrelated to any event.
  std::vector<double> entity_sentence(std::size_t entity, bool leak) {
    std::vector<double> x = entity_sentence_[entity];
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += s_.noise * rng_.normal() + (leak ? leak_[kSentence][k] : 0.0);
    finish(kSentence, x);
    return x;
  }

  std::vector<std::string> image_labels(const Event& e) {
    std::vector<std::string> out;
    const double keep = 0.75 * std::min(1.0, s_.signal);
    for (std::size_t l : e.labels) {
      if (rng_.bernoulli(keep)) out.push_back("label" + std::to_string(l));
    }
    const std::string extra = "label" + std::to_string(rng_.index(s_.label_pool));
    if (std::find(out.begin(), out.end(), extra) == out.end()) out.push_back(extra);
    return out;
  }

  std::vector<std::size_t> text_entities(const Event& e, double keep) {
    std::vector<std::size_t> out;
    keep *= std::min(1.0, s_.signal);
    for (std::size_t k : e.entities) {
      if (rng_.bernoulli(keep)) out.push_back(k);
    }
    if (out.empty()) out.push_back(rng_.index(s_.entity_pool));
    return out;
  }

  static std::vector<std::string> names(const std::vector<std::size_t>& entities) {
    std::vector<std::string> out;
    for (std::size_t k : entities) out.push_back(entity_name(k));
    return out;
  }

  static std::string entity_name(std::size_t k) { return "Entity " + std::to_string(k); }

  std::string domain(bool relevant) {
    std::size_t k = rng_.index(s_.domain_pool);
    if (relevant && s_.reliable_domains > 0 && rng_.bernoulli(s_.reliable_rate)) k = rng_.index(s_.reliable_domains);
    return "site" + std::to_string(k) + ".example";
  }

  ExampleRecord example(std::size_t n, Split split, Label label, EmbeddingStore& store) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "syn%06zu", n);
    ExampleRecord ex;
    ex.id = buf;
    ex.split = split;
    ex.label = label;
    ex.query_image_id = ex.id + "/img";
    ex.query_domain = "news" + std::to_string(rng_.index(s_.domain_pool)) + ".example";

    new_topic();
    const Event image_event = event();
    const Event caption_event = label == Label::pristine ? image_event : event();
    ex.query_caption = "Claim about event " + std::to_string(caption_event.id);

    const bool leak = s_.evidence_mode == EvidenceMode::label_leaking && label == Label::falsified;
    const bool unrelated = s_.evidence_mode == EvidenceMode::label_independent;

    store.put_vector(Section::image_obj, ex.query_image_id, embed(kImage, image_event, s_.noise, false));
    store.put_vector(Section::image_scene, ex.query_image_id, embed(kScene, image_event, s_.noise, false));
    store.put_strings(Section::image_labels, ex.query_image_id, image_labels(image_event));
    const std::string ck = caption_key(ex);
    store.put_vector(Section::sentence, ck, embed(kSentence, caption_event, s_.noise, false));
    const auto caption_entities = text_entities(caption_event, 0.8);
    store.put_tokens(ck, tokens(caption_event, rng_.between(3, 8), caption_entities, false));
    store.put_strings(Section::caption_entities, ck, names(caption_entities));

    store.put_vector(Section::clip_image, ex.query_image_id, embed(kClip, image_event, s_.clip_noise, false));
    const Event clip_text_event = s_.clip_signal ? caption_event : event();
    store.put_vector(Section::clip_text, ck, embed(kClip, clip_text_event, s_.clip_noise, false));

    const double r = rng_.uniform();
    const bool no_images = r < s_.missing_images;
    const bool no_text = !no_images && r < s_.missing_images + s_.missing_sentences;
    const bool spurious = !unrelated && label == Label::falsified && !no_images && !no_text &&
                          rng_.bernoulli(s_.spurious_match_rate);
    const bool spurious_visual = spurious && rng_.bernoulli(0.5);
    const bool spurious_text = spurious && !spurious_visual;

    // caption search: images of the caption event
    if (!no_images) {
      const std::size_t count = rng_.between(s_.min_images, s_.max_images);
      const std::size_t spurious_at = spurious_visual ? rng_.index(count) : count;
      for (std::size_t j = 0; j < count; ++j) {
        const bool relevant = !unrelated && (j == 0 || rng_.bernoulli(s_.relevant_rate));
        const Event e = j == spurious_at ? image_event : relevant ? caption_event : event();
        EvidenceImageMeta meta{ex.id + "/ev" + std::to_string(j), domain(relevant), ImageSource::direct_image_search};
        store.put_vector(Section::image_obj, meta.image_id, embed(kImage, e, s_.noise, leak));
        store.put_vector(Section::image_scene, meta.image_id, embed(kScene, e, s_.noise, leak));
        store.put_strings(Section::image_labels, meta.image_id, image_labels(e));
        ex.evidence_images.push_back(std::move(meta));
      }
    }

    // image search: text about the image event
    if (!no_text) {
      const std::size_t count = rng_.between(s_.min_sentences, s_.max_sentences);
      const std::size_t spurious_at = spurious_text ? rng_.index(count) : count;
      for (std::size_t j = 0; j < count; ++j) {
        const bool relevant = !unrelated && (j == 0 || rng_.bernoulli(s_.relevant_rate));
        const Event e = j == spurious_at ? caption_event : relevant ? image_event : event();
        const std::string dom = domain(relevant);
        ex.sentences.push_back({"Report on event " + std::to_string(e.id) + " from " + dom,
                                rng_.bernoulli(0.5) ? SentenceKind::caption : SentenceKind::title, dom,
                                "https://" + dom + "/story/" + std::to_string(e.id), MatchedBy::url});
        const std::string key = sentence_key(ex, j);
        store.put_vector(Section::sentence, key, embed(kSentence, e, s_.noise, leak));
        const auto mentioned = text_entities(e, 0.7);
        store.put_tokens(key, tokens(e, rng_.between(3, 8), mentioned, leak));
        store.put_strings(Section::caption_entities, key, names(mentioned));
      }
      const std::size_t n_entities = rng_.between(s_.min_entities, s_.max_entities);
      for (std::size_t j = 0; j < n_entities; ++j) {
        const bool relevant = !unrelated && rng_.bernoulli(s_.entity_relevant_rate);
        const Event e = relevant ? image_event : event();
        const std::size_t pick = e.entities[rng_.index(e.entities.size())];
        ex.entities.push_back(entity_name(pick));
        const std::string key = entity_key(ex, j);
        store.put_vector(Section::sentence, key, entity_sentence(pick, leak));
        store.put_tokens(key, tokens(e, 0, {pick}, leak));
      }
    }
    return ex;
  }

  const SyntheticSpec& s_;
  Rng rng_;
  std::vector<std::vector<std::vector<double>>> proj_;  // per modality, latent x dim
  std::vector<std::vector<double>> leak_;
  std::vector<std::vector<double>> entity_vec_, entity_sentence_;  // per entity
  std::vector<double> topic_visual_, topic_semantic_;
  std::size_t next_event_ = 0;
};

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  return Generator(spec).run();
}

CcnConfig synthetic_model_config(const SyntheticSpec& spec) {
  CcnConfig c;
  c.features = spec.features;
  c.dims.visual_mem = 32;
  c.dims.domain = 20;
  c.dims.lstm_hidden = 16;
  c.dims.classifier_hidden = 64;
  return c;
}

}  // namespace ccn
