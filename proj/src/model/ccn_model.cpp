#include "ccn/model/ccn_model.hpp"

#include <array>
#include <cmath>

#include "ccn/errors.hpp"

namespace ccn {

namespace {

const MemoryBatch& require(const std::optional<MemoryBatch>& m, MemoryKind kind) {
  if (!m) {
    throw ConfigError("batch lacks the " + std::string(to_string(kind)) +
                      " memory the model configuration needs");
  }
  return *m;
}

Tensor gather_rows(const Tensor& table, std::span<const long> rows, std::size_t width) {
  Tensor out({rows.size(), width});
  for (std::size_t n = 0; n < rows.size(); ++n) {
    if (rows[n] < 0) continue;
    std::copy_n(table.data().begin() + rows[n] * static_cast<long>(width), width,
                out.data().begin() + static_cast<std::ptrdiff_t>(n * width));
  }
  return out;
}

void scatter_rows(Tensor& table, std::span<const long> rows, const Tensor& grad, std::size_t width) {
  for (std::size_t n = 0; n < rows.size(); ++n) {
    if (rows[n] < 0) continue;
    for (std::size_t k = 0; k < width; ++k) {
      table[static_cast<std::size_t>(rows[n]) * width + k] += grad[n * width + k];
    }
  }
}

}  // namespace

CcnModel::CcnModel(const CcnConfig& config, std::size_t domain_rows, std::uint64_t seed)
    : config_(config), drop_text_(config.dropout.input), clip_bn_() {
  config_.validate();
  if (domain_rows == 0) throw ConfigError("domain vocabulary needs at least the UNK row");
  Rng rng(seed);
  const std::size_t vm = config_.dims.visual_mem;

  const std::vector<MemoryKind> kinds = active_memories(config_);

  use_domain_table_ = false;
  for (MemoryKind k : kinds) use_domain_table_ = use_domain_table_ || config_.uses_domain(k);
  if (use_domain_table_) domain_ = Embedding("domain", domain_rows, config_.dims.domain, rng);

  bool any_text = false;
  for (MemoryKind k : kinds) any_text = any_text || (k != MemoryKind::image && k != MemoryKind::scene);
  if (any_text && config_.token_path()) {
    lstm_.emplace("lstm", config_.features.token, config_.dims.lstm_hidden, rng);
  }

  for (MemoryKind k : kinds) {
    Unit u;
    u.kind = k;
    u.name = std::string(to_string(k));
    u.mem_dim = config_.mem_dim(k);
    switch (k) {
      case MemoryKind::image: u.visual_width = config_.features.image; break;
      case MemoryKind::scene: u.visual_width = config_.features.scene; break;
      case MemoryKind::unified:
        u.visual_width = config_.features.image;
        u.text_part = true;
        break;
      case MemoryKind::entity:
      case MemoryKind::sentence: u.text_part = true; break;
    }
    if (config_.evidence_only) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(u.mem_dim));
      Tensor init({u.mem_dim});
      for (double& v : init.data()) v = rng.uniform(-bound, bound);
      u.constant_query = Parameter(u.name + ".query", std::move(init));
    } else if (u.visual_width > 0) {
      u.query_proj = Linear(u.name + ".query", u.visual_width, vm, rng);
      u.has_query_proj = true;
    }
    u.bank = MemoryBank(u.name, config_.item_dim(k), u.mem_dim, rng);
    u.drop_items = Dropout(config_.dropout.input);
    u.drop_query = Dropout(config_.dropout.input);
    u.drop_domain = Dropout(config_.dropout.domain);
    u.drop_ma = Dropout(config_.dropout.memory);
    u.drop_mc = Dropout(config_.dropout.memory);
    units_.push_back(std::move(u));
  }

  for (const Unit& u : units_) {
    const bool needs_align = config_.fusion != Fusion::concat && u.mem_dim != vm;
    aligned_.push_back(needs_align);
    align_.push_back(needs_align ? Linear(u.name + ".align", u.mem_dim, vm, rng) : Linear());
    if (config_.use_bn) {
      unit_bn_.emplace_back("bn." + u.name, needs_align || config_.fusion != Fusion::concat ? vm : u.mem_dim);
    }
  }
  if (config_.use_clip && config_.use_bn) clip_bn_ = BatchNorm("bn.clip", config_.features.clip);
  head_ = ClassifierHead("classifier", fused_width(config_), config_.dims.classifier_hidden, rng);
}

std::vector<MemoryKind> active_memories(const CcnConfig& config) {
  std::vector<MemoryKind> kinds;
  if (config.memory_layout == MemoryLayout::unified) {
    if (config.memory_enabled(MemoryKind::unified)) kinds.push_back(MemoryKind::unified);
    if (config.memory_enabled(MemoryKind::scene)) kinds.push_back(MemoryKind::scene);
  } else {
    for (MemoryKind k : {MemoryKind::image, MemoryKind::scene, MemoryKind::entity, MemoryKind::sentence}) {
      if (config.memory_enabled(k)) kinds.push_back(k);
    }
  }
  return kinds;
}

std::size_t fused_width(const CcnConfig& config) {
  std::size_t w = config.use_clip ? config.features.clip : 0;
  const auto kinds = active_memories(config);
  if (kinds.empty()) return w;
  if (config.fusion != Fusion::concat) return w + config.dims.visual_mem;
  for (MemoryKind k : kinds) w += config.mem_dim(k);
  return w;
}

std::vector<Tensor> CcnModel::memory_queries() const {
  std::vector<Tensor> out;
  for (const Unit& u : units_) out.push_back(u.query);
  return out;
}

ParameterList CcnModel::parameters() {
  ParameterList p;
  if (use_domain_table_) domain_.collect(p);
  if (lstm_) lstm_->collect(p);
  for (Unit& u : units_) {
    if (u.has_query_proj) u.query_proj.collect(p);
    if (config_.evidence_only) p.push_back(&u.constant_query);
    u.bank.collect(p);
  }
  for (std::size_t n = 0; n < units_.size(); ++n) {
    if (aligned_[n]) align_[n].collect(p);
  }
  for (BatchNorm& bn : unit_bn_) bn.collect(p);
  if (config_.use_clip && config_.use_bn) clip_bn_.collect(p);
  head_.collect(p);
  return p;
}

BufferList CcnModel::buffers() {
  BufferList b;
  for (BatchNorm& bn : unit_bn_) bn.collect(b);
  if (config_.use_clip && config_.use_bn) clip_bn_.collect(b);
  head_.collect(b);
  return b;
}

void CcnModel::build_text_table(const Batch& batch, Mode mode, Rng& rng) {
  text_sequences_.clear();
  sentence_rows_.clear();
  entity_rows_.clear();
  sentence_J_ = entity_J_ = 0;
  text_table_ = Tensor();
  bool needed = false;
  for (const Unit& u : units_) needed = needed || u.text_part;
  if (!needed) return;

  const MemoryBatch* sentence = batch.sentence ? &*batch.sentence : nullptr;
  const MemoryBatch* entity = batch.entity ? &*batch.entity : nullptr;
  const MemoryBatch* captions = sentence ? sentence : entity;
  if (!captions) throw ConfigError("batch lacks a textual memory to take caption embeddings from");
  const std::size_t b = batch.size();
  const std::size_t d = config_.text_dim();
  const bool tokens = config_.token_path();
  if (tokens != captions->token_path()) {
    throw ConfigError("batch text representation does not match the model's text encoder");
  }

  long next = static_cast<long>(b);
  auto number = [&](const MemoryBatch* m, std::vector<long>& rows, std::size_t& J) {
    if (!m) return;
    J = m->max_items;
    rows.assign(b * J, -1);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < J; ++j) {
        if (m->mask(i, j)) rows[i * J + j] = next++;
      }
    }
  };
  const bool want_sentence = sentence && (config_.memory_enabled(MemoryKind::sentence) ||
                                          config_.memory_enabled(MemoryKind::unified));
  const bool want_entity = entity && (config_.memory_enabled(MemoryKind::entity) ||
                                      config_.memory_enabled(MemoryKind::unified));
  if (want_sentence) number(sentence, sentence_rows_, sentence_J_);
  if (want_entity) number(entity, entity_rows_, entity_J_);
  const auto total = static_cast<std::size_t>(next);

  if (tokens) {
    text_sequences_.reserve(total);
    for (std::size_t i = 0; i < b; ++i) text_sequences_.push_back(captions->query_tokens[i]);
    auto add = [&](const MemoryBatch* m, const std::vector<long>& rows) {
      for (std::size_t s = 0; s < rows.size(); ++s) {
        if (rows[s] >= 0) text_sequences_.push_back(m->item_tokens[s]);
      }
    };
    if (want_sentence) add(sentence, sentence_rows_);
    if (want_entity) add(entity, entity_rows_);
    text_table_ = lstm_->encode_batch(text_sequences_);
  } else {
    text_table_ = Tensor({total, d});
    auto copy_row = [&](const Tensor& src, std::size_t src_row, std::size_t dst_row) {
      std::copy_n(src.data().begin() + static_cast<std::ptrdiff_t>(src_row * d), d,
                  text_table_.data().begin() + static_cast<std::ptrdiff_t>(dst_row * d));
    };
    for (std::size_t i = 0; i < b; ++i) copy_row(captions->query, i, i);
    auto add = [&](const MemoryBatch* m, const std::vector<long>& rows) {
      for (std::size_t s = 0; s < rows.size(); ++s) {
        if (rows[s] >= 0) copy_row(m->items, s, static_cast<std::size_t>(rows[s]));
      }
    };
    if (want_sentence) add(sentence, sentence_rows_);
    if (want_entity) add(entity, entity_rows_);
  }
  text_table_ = drop_text_.forward(text_table_, mode, rng);
}

CcnModel::UnitInput CcnModel::gather_input(const Unit& u, const Batch& batch) const {
  UnitInput in;
  const std::size_t b = batch.size();
  in.b = b;
  auto caption_rows = [&] {
    std::vector<long> rows(b);
    for (std::size_t i = 0; i < b; ++i) rows[i] = static_cast<long>(i);
    return rows;
  };
  auto copy_meta = [&](const MemoryBatch& m) {
    in.J = m.max_items;
    in.side = m.side;
    in.mask = m.mask;
    in.keys = m.item_keys;
    in.texts = m.item_texts;
    in.domains = config_.uses_domain(u.kind);
    if (in.domains) {
      in.domain_ids = m.domain_ids;
      for (std::size_t s = 0; s < in.domain_ids.size(); ++s) {
        if (!m.mask(s / in.J, s % in.J)) in.domain_ids[s] = -1;
      }
    }
  };

  switch (u.kind) {
    case MemoryKind::image:
    case MemoryKind::scene: {
      const MemoryBatch& m = require(u.kind == MemoryKind::image ? batch.image : batch.scene, u.kind);
      copy_meta(m);
      in.visual = m.items;
      in.visual_query = m.query;
      break;
    }
    case MemoryKind::entity:
    case MemoryKind::sentence: {
      const MemoryBatch& m = require(u.kind == MemoryKind::entity ? batch.entity : batch.sentence, u.kind);
      copy_meta(m);
      in.text_rows = u.kind == MemoryKind::entity ? entity_rows_ : sentence_rows_;
      in.caption_rows = caption_rows();
      break;
    }
    case MemoryKind::unified: {
      const MemoryBatch& im = require(batch.image, MemoryKind::image);
      const MemoryBatch& se = require(batch.sentence, MemoryKind::sentence);
      const MemoryBatch& en = require(batch.entity, MemoryKind::entity);
      const std::size_t fv = u.visual_width;
      const std::size_t s = config_.side_width(MemoryKind::unified);
      const bool domains = config_.uses_domain(MemoryKind::unified);
      std::size_t J = 0;
      for (std::size_t i = 0; i < b; ++i) {
        J = std::max(J, im.valid_items(i) + se.valid_items(i) + en.valid_items(i));
      }
      in.J = J;
      in.visual = Tensor({b, J, fv});
      in.text_rows.assign(b * J, -1);
      in.side = Tensor({b, J, s});
      in.mask = Mask(b, J);
      in.keys.assign(b * J, "");
      in.texts.assign(b * J, "");
      in.domains = domains;
      if (domains) in.domain_ids.assign(b * J, -1);
      for (std::size_t i = 0; i < b; ++i) {
        std::size_t slot = 0;
        auto place = [&](const MemoryBatch& m, const std::vector<long>* rows, std::size_t mJ) {
          for (std::size_t j = 0; j < m.max_items; ++j) {
            if (!m.mask(i, j)) continue;
            const std::size_t dst = i * J + slot;
            const std::size_t src = i * m.max_items + j;
            in.mask.set(i, slot, true);
            in.keys[dst] = m.item_keys[src];
            in.texts[dst] = m.item_texts[src];
            if (rows) {
              in.text_rows[dst] = (*rows)[i * mJ + j];
            } else {
              std::copy_n(m.items.data().begin() + static_cast<std::ptrdiff_t>(src * fv), fv,
                          in.visual.data().begin() + static_cast<std::ptrdiff_t>(dst * fv));
            }
            if (s > 0 && m.side.dim(2) == s) in.side(i, slot, 0) = m.side(i, j, 0);
            if (domains) in.domain_ids[dst] = m.domain_ids.empty() ? DomainVocabulary::kUnk : m.domain_ids[src];
            ++slot;
          }
        };
        place(im, nullptr, 0);
        if (!sentence_rows_.empty()) place(se, &sentence_rows_, sentence_J_);
        if (!entity_rows_.empty()) place(en, &entity_rows_, entity_J_);
      }
      in.visual_query = im.query;
      in.caption_rows = caption_rows();
      break;
    }
  }
  return in;
}

void CcnModel::forward_unit(Unit& u, Mode mode, Rng& rng) {
  const UnitInput& in = u.in;
  const std::size_t b = in.b, J = in.J;
  const std::size_t d = config_.text_dim();

  Tensor visual;
  if (u.visual_width > 0) visual = u.drop_items.forward(in.visual, mode, rng);
  Tensor text;
  if (u.text_part) text = gather_rows(text_table_, in.text_rows, d).reshaped({b, J, d});
  Tensor domain;
  if (in.domains) {
    std::vector<int> ids(in.domain_ids);
    for (int& id : ids) id = std::max(id, 0);
    domain = domain_.lookup(ids);
    const std::size_t w = domain_.width();
    for (std::size_t s = 0; s < ids.size(); ++s) {
      if (in.domain_ids[s] < 0) std::fill_n(domain.data().begin() + static_cast<std::ptrdiff_t>(s * w), w, 0.0);
    }
    domain = u.drop_domain.forward(domain.reshaped({b, J, w}), mode, rng);
  }
  const std::array<const Tensor*, 4> parts{&visual, &text, &in.side, &domain};
  u.item_widths.clear();
  for (const Tensor* t : parts) u.item_widths.push_back(t->empty() ? 0 : t->shape().back());
  u.item = concat_last(parts);
  if (u.item.empty()) u.item = Tensor({b, J, 0});

  u.bank.embed(u.item, u.m_a, u.m_c);
  u.m_a = u.drop_ma.forward(u.m_a, mode, rng);
  u.m_c = u.drop_mc.forward(u.m_c, mode, rng);

  if (config_.evidence_only) {
    u.query = Tensor({b, u.mem_dim});
    for (std::size_t i = 0; i < b; ++i) {
      std::copy(u.constant_query.value.data().begin(), u.constant_query.value.data().end(),
                u.query.data().begin() + static_cast<std::ptrdiff_t>(i * u.mem_dim));
    }
  } else {
    Tensor qv, qt;
    if (u.has_query_proj) qv = u.query_proj.forward(u.drop_query.forward(in.visual_query, mode, rng));
    if (u.text_part) qt = gather_rows(text_table_, in.caption_rows, d);
    const std::array<const Tensor*, 2> q{&qv, &qt};
    u.query = concat_last(q);
  }
  u.p = attend(u.query, u.m_a, in.mask);
  u.o = memory_output(u.p, u.m_c, u.query, in.mask);
}

void CcnModel::backward_unit(Unit& u, const Tensor& dout) {
  const UnitInput& in = u.in;
  const std::size_t b = in.b;
  const std::size_t d = config_.text_dim();
  const OutputGrad og = memory_output_backward(u.p, u.m_c, dout);
  const AttendGrad ag = attend_backward(u.query, u.m_a, u.p, og.p);
  Tensor dq = og.query_hat;
  dq += ag.query_hat;

  const Tensor ditem = u.bank.backward(u.drop_ma.backward(ag.m_a), u.drop_mc.backward(og.m_c));
  const auto parts = split_last(ditem, u.item_widths);
  if (u.text_part) scatter_rows(dtext_table_, in.text_rows, parts[1], d);
  if (in.domains) {
    const std::size_t w = domain_.width();
    Tensor dd = u.drop_domain.backward(parts[3]).reshaped({b * in.J, w});
    std::vector<int> ids;
    std::vector<std::size_t> valid;
    for (std::size_t s = 0; s < in.domain_ids.size(); ++s) {
      if (in.domain_ids[s] >= 0) {
        ids.push_back(in.domain_ids[s]);
        valid.push_back(s);
      }
    }
    Tensor rows({ids.size(), w});
    for (std::size_t n = 0; n < valid.size(); ++n) {
      std::copy_n(dd.data().begin() + static_cast<std::ptrdiff_t>(valid[n] * w), w,
                  rows.data().begin() + static_cast<std::ptrdiff_t>(n * w));
    }
    domain_.accumulate(ids, rows);
  }

  if (config_.evidence_only) {
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t k = 0; k < u.mem_dim; ++k) u.constant_query.grad[k] += dq(i, k);
    }
    return;
  }
  std::vector<std::size_t> qwidths;
  if (u.has_query_proj) qwidths.push_back(config_.dims.visual_mem);
  if (u.text_part) qwidths.push_back(d);
  const auto qparts = split_last(dq, qwidths);
  std::size_t n = 0;
  if (u.has_query_proj) u.query_proj.backward(qparts[n++]);
  if (u.text_part) scatter_rows(dtext_table_, in.caption_rows, qparts[n], d);
}

Tensor CcnModel::forward(const Batch& batch, Mode mode, Rng& rng) {
  const std::size_t b = batch.size();
  if (b == 0) throw ConfigError("empty batch");
  batch_size_ = b;
  build_text_table(batch, mode, rng);

  outputs_.clear();
  attention_.clear();
  for (Unit& u : units_) {
    u.in = gather_input(u, batch);
    forward_unit(u, mode, rng);
    outputs_.push_back(u.o);

    AttentionRecord rec;
    rec.memory = u.name;
    rec.weights.resize(b);
    rec.item_keys.resize(b);
    rec.item_texts.resize(b);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < u.in.J; ++j) {
        if (!u.in.mask(i, j)) continue;
        rec.weights[i].push_back(u.p(i, j));
        rec.item_keys[i].push_back(u.in.keys[i * u.in.J + j]);
        rec.item_texts[i].push_back(u.in.texts[i * u.in.J + j]);
      }
    }
    attention_.push_back(std::move(rec));
  }

  std::vector<Tensor> components;
  aligned_out_.clear();
  normed_.clear();
  if (config_.fusion == Fusion::concat) {
    for (std::size_t n = 0; n < units_.size(); ++n) {
      components.push_back(config_.use_bn ? unit_bn_[n].forward(outputs_[n], mode) : outputs_[n]);
    }
  } else if (!units_.empty()) {
    for (std::size_t n = 0; n < units_.size(); ++n) {
      aligned_out_.push_back(aligned_[n] ? align_[n].forward(outputs_[n]) : outputs_[n]);
      normed_.push_back(config_.use_bn ? unit_bn_[n].forward(aligned_out_[n], mode) : aligned_out_[n]);
    }
    components.push_back(combine(config_.fusion, normed_));
  }
  if (config_.use_clip) {
    if (batch.clip_image.empty()) throw ConfigError("batch lacks the joint image/caption embeddings");
    clip_joint_ = clip_joint(batch.clip_image, batch.clip_text);
    components.push_back(config_.use_bn ? clip_bn_.forward(clip_joint_, mode) : clip_joint_);
  }
  fused_widths_.clear();
  std::vector<const Tensor*> ptrs;
  for (const Tensor& t : components) {
    fused_widths_.push_back(t.dim(1));
    ptrs.push_back(&t);
  }
  fused_ = concat_last(ptrs);
  const Tensor logits = head_.forward(fused_, mode);
  probs_ = Tensor({b});
  for (std::size_t i = 0; i < b; ++i) probs_[i] = sigmoid(logits[i]);
  return probs_;
}

void CcnModel::backward(const Tensor& dprob) {
  const std::size_t b = batch_size_;
  if (dprob.size() != b) throw DimensionError("backward: gradient for " + std::to_string(dprob.size()) +
                                              " examples, forward saw " + std::to_string(b));
  Tensor dlogits({b});
  for (std::size_t i = 0; i < b; ++i) dlogits[i] = dprob[i] * probs_[i] * (1.0 - probs_[i]);
  const Tensor dfused = head_.backward(dlogits);
  const auto parts = split_last(dfused, fused_widths_);

  if (!text_table_.empty()) dtext_table_ = Tensor(text_table_.shape());
  std::vector<Tensor> douts(units_.size());
  if (config_.fusion == Fusion::concat) {
    for (std::size_t n = 0; n < units_.size(); ++n) {
      douts[n] = config_.use_bn ? unit_bn_[n].backward(parts[n]) : parts[n];
    }
  } else if (!units_.empty()) {
    const auto dnormed = combine_backward(config_.fusion, normed_, parts[0]);
    for (std::size_t n = 0; n < units_.size(); ++n) {
      Tensor da = config_.use_bn ? unit_bn_[n].backward(dnormed[n]) : dnormed[n];
      douts[n] = aligned_[n] ? align_[n].backward(da) : da;
    }
  }
  if (config_.use_clip && config_.use_bn) clip_bn_.backward(parts.back());

  for (std::size_t n = 0; n < units_.size(); ++n) backward_unit(units_[n], douts[n]);

  if (!text_table_.empty() && lstm_) {
    lstm_->backward_batch(drop_text_.backward(dtext_table_), false);
  }
}

}  // namespace ccn
