#include "ccn/data/embedding_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ccn/errors.hpp"
#include "io/byte_io.hpp"

namespace ccn {

namespace {

using io::ByteReader;
using io::ByteWriter;
using io::round_to_float;

constexpr std::array<std::string_view, 8> kSectionNames{
    "image_obj", "image_scene", "sentence", "tokens",
    "clip_image", "clip_text", "image_labels", "caption_entities"};

}  // namespace

std::string_view section_name(Section s) {
  return kSectionNames[static_cast<std::size_t>(s) - 1];
}

bool is_string_section(Section s) {
  return s == Section::image_labels || s == Section::caption_entities;
}

void EmbeddingStore::declare(Section s, std::size_t dim) {
  if (is_string_section(s)) {
    if (dim != 0) throw FormatError(std::string(section_name(s)) + " holds strings; dim must be 0");
    return;
  }
  if (dim == 0) throw FormatError(std::string(section_name(s)) + ": dimension must be positive");
  const std::size_t current = dims_[index(s)];
  if (current != 0 && current != dim && !tensors_[index(s)].empty()) {
    throw FormatError(std::string(section_name(s)) + ": cannot redeclare dimension " +
                      std::to_string(current) + " as " + std::to_string(dim));
  }
  dims_[index(s)] = dim;
}

void EmbeddingStore::require_dim(Section s, std::size_t expected) const {
  if (dim(s) != expected) {
    throw FormatError(std::string(section_name(s)) + ": store dimension " +
                      std::to_string(dim(s)) + ", expected " + std::to_string(expected));
  }
}

void EmbeddingStore::put_vector(Section s, const std::string& key, std::span<const double> values) {
  if (is_string_section(s) || s == Section::tokens) {
    throw FormatError(std::string(section_name(s)) + " is not a vector section");
  }
  const std::size_t d = dims_[index(s)];
  if (d == 0) throw FormatError(std::string(section_name(s)) + ": dimension not declared");
  if (values.size() != d) {
    throw FormatError(std::string(section_name(s)) + "[" + key + "]: vector of " +
                      std::to_string(values.size()) + " values, header dimension " +
                      std::to_string(d));
  }
  Tensor t({d});
  for (std::size_t i = 0; i < d; ++i) t[i] = round_to_float(values[i]);
  t.require_finite(std::string(section_name(s)) + "[" + key + "]");
  tensors_[index(s)][key] = std::move(t);
}

void EmbeddingStore::put_tokens(const std::string& key, const Tensor& tokens) {
  const std::size_t d = dims_[index(Section::tokens)];
  if (d == 0) throw FormatError("tokens: dimension not declared");
  if (tokens.rank() != 2 || tokens.dim(1) != d) {
    throw FormatError("tokens[" + key + "]: shape " + shape_string(tokens.shape()) +
                      ", header dimension " + std::to_string(d));
  }
  if (tokens.dim(0) < 1 || tokens.dim(0) > kMaxTokens) {
    throw FormatError("tokens[" + key + "]: " + std::to_string(tokens.dim(0)) +
                      " tokens, expected 1.." + std::to_string(kMaxTokens));
  }
  Tensor t = tokens;
  for (double& v : t.data()) v = round_to_float(v);
  t.require_finite("tokens[" + key + "]");
  tensors_[index(Section::tokens)][key] = std::move(t);
}

void EmbeddingStore::put_strings(Section s, const std::string& key, std::vector<std::string> values) {
  if (!is_string_section(s)) {
    throw FormatError(std::string(section_name(s)) + " is not a string-list section");
  }
  strings_[index(s)][key] = std::move(values);
}

bool EmbeddingStore::contains(Section s, const std::string& key) const {
  return is_string_section(s) ? strings_[index(s)].contains(key) : tensors_[index(s)].contains(key);
}

const Tensor& EmbeddingStore::vector(Section s, const std::string& key) const {
  const auto& m = tensors_[index(s)];
  auto it = m.find(key);
  if (it == m.end()) {
    throw ValidationError("missing embedding " + std::string(section_name(s)) + "[" + key + "]");
  }
  return it->second;
}

const Tensor& EmbeddingStore::tokens(const std::string& key) const {
  return vector(Section::tokens, key);
}

const std::vector<std::string>& EmbeddingStore::strings(Section s, const std::string& key) const {
  const auto* found = find_strings(s, key);
  if (!found) {
    throw ValidationError("missing entry " + std::string(section_name(s)) + "[" + key + "]");
  }
  return *found;
}

const std::vector<std::string>* EmbeddingStore::find_strings(Section s, const std::string& key) const {
  const auto& m = strings_[index(s)];
  auto it = m.find(key);
  return it == m.end() ? nullptr : &it->second;
}

std::size_t EmbeddingStore::count(Section s) const {
  return is_string_section(s) ? strings_[index(s)].size() : tensors_[index(s)].size();
}

std::vector<std::string> EmbeddingStore::keys(Section s) const {
  std::vector<std::string> out;
  if (is_string_section(s)) {
    for (const auto& [k, _] : strings_[index(s)]) out.push_back(k);
  } else {
    for (const auto& [k, _] : tensors_[index(s)]) out.push_back(k);
  }
  return out;
}

std::string EmbeddingStore::serialize() const {
  ByteWriter w;
  w.bytes(std::string_view(kStoreMagic, 8));
  std::vector<Section> present;
  for (Section s : kAllSections) {
    if (dim(s) != 0 || count(s) != 0) present.push_back(s);
  }
  w.u32(static_cast<std::uint32_t>(present.size()));
  for (Section s : present) {
    const std::size_t i = index(s);
    w.u32(static_cast<std::uint32_t>(s));
    w.u32(static_cast<std::uint32_t>(dims_[i]));
    w.u32(static_cast<std::uint32_t>(count(s)));
    if (is_string_section(s)) {
      for (const auto& [key, values] : strings_[i]) {
        w.str(key);
        w.u32(static_cast<std::uint32_t>(values.size()));
      }
      for (const auto& [key, values] : strings_[i]) {
        for (const auto& v : values) w.str(v);
      }
    } else {
      for (const auto& [key, t] : tensors_[i]) {
        w.str(key);
        w.u32(static_cast<std::uint32_t>(s == Section::tokens ? t.dim(0) : 1));
      }
      for (const auto& [key, t] : tensors_[i]) {
        for (double v : t.data()) w.f32(v);
      }
    }
  }
  return w.take();
}

EmbeddingStore EmbeddingStore::deserialize(std::string_view bytes) {
  ByteReader r(bytes, "store");
  if (r.bytes(8) != std::string_view(kStoreMagic, 8)) {
    throw FormatError("not an embedding store (bad magic)");
  }
  EmbeddingStore store;
  const std::uint32_t sections = r.u32();
  std::uint32_t last_tag = 0;
  for (std::uint32_t n = 0; n < sections; ++n) {
    const std::uint32_t tag = r.u32();
    if (tag < 1 || tag > 8) throw FormatError("unknown section tag " + std::to_string(tag));
    if (tag <= last_tag) throw FormatError("section tags out of order");
    last_tag = tag;
    const auto s = static_cast<Section>(tag);
    const std::uint32_t dim = r.u32();
    const std::uint32_t count = r.u32();
    if (is_string_section(s) != (dim == 0)) {
      throw FormatError(std::string(section_name(s)) + ": invalid header dimension " +
                        std::to_string(dim));
    }
    if (dim != 0) store.declare(s, dim);
    std::vector<std::pair<std::string, std::uint32_t>> table;
    table.reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
      std::string key = r.str();
      const std::uint32_t rows = r.u32();
      if (!table.empty() && !(table.back().first < key)) {
        throw FormatError(std::string(section_name(s)) + ": keys not strictly ordered at '" + key + "'");
      }
      if (!is_string_section(s) && s != Section::tokens && rows != 1) {
        throw FormatError(std::string(section_name(s)) + "[" + key + "]: " + std::to_string(rows) +
                          " rows in a vector section");
      }
      table.emplace_back(std::move(key), rows);
    }
    for (const auto& [key, rows] : table) {
      if (is_string_section(s)) {
        std::vector<std::string> values;
        values.reserve(rows);
        for (std::uint32_t v = 0; v < rows; ++v) values.push_back(r.str());
        store.put_strings(s, key, std::move(values));
      } else {
        std::vector<double> values(static_cast<std::size_t>(rows) * dim);
        for (double& v : values) v = r.f32();
        if (s == Section::tokens) {
          store.put_tokens(key, Tensor({rows, dim}, std::move(values)));
        } else {
          store.put_vector(s, key, values);
        }
      }
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after last section");
  return store;
}

void EmbeddingStore::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write store " + path.string());
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

EmbeddingStore EmbeddingStore::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open store " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace ccn
