#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ccn/math/tensor.hpp"

namespace ccn {

/// Sections of the store. The numeric values are the on-disk tags.
enum class Section : std::uint32_t {
  image_obj = 1,
  image_scene = 2,
  sentence = 3,
  tokens = 4,
  clip_image = 5,
  clip_text = 6,
  image_labels = 7,
  caption_entities = 8,
};

inline constexpr std::array<Section, 8> kAllSections{
    Section::image_obj, Section::image_scene, Section::sentence,     Section::tokens,
    Section::clip_image, Section::clip_text,  Section::image_labels, Section::caption_entities};

std::string_view section_name(Section s);
bool is_string_section(Section s);

inline constexpr std::size_t kMaxTokens = 150;
inline constexpr char kStoreMagic[9] = "CCNSTOR1";

/// Keyed store of precomputed representations.
///
/// Values are held as doubles but always rounded through 32-bit floats on
/// insertion, so writing and re-reading a store reproduces it exactly.
///
/// File layout (all integers u32 little-endian, floats f32 little-endian):
///
///   "CCNSTOR1" | section_count
///   per section, ascending tag:
///     tag | dim | count
///     key table, keys in byte order: key_len | key bytes | rows
///     payload: vector and token sections store rows * dim floats per key;
///              string sections store rows * (len | bytes) per key
///
/// Vector sections have rows = 1, token sections 1 <= rows <= 150, and string
/// sections dim = 0. A section is written when it has a declared dimension
/// or at least one record.
class EmbeddingStore {
 public:
  void declare(Section s, std::size_t dim);
  std::size_t dim(Section s) const { return dims_[index(s)]; }
  // Throws FormatError when the declared dimension differs from `expected`.
  void require_dim(Section s, std::size_t expected) const;

  void put_vector(Section s, const std::string& key, std::span<const double> values);
  void put_tokens(const std::string& key, const Tensor& tokens);
  void put_strings(Section s, const std::string& key, std::vector<std::string> values);

  bool contains(Section s, const std::string& key) const;
  // Throws ValidationError naming the section and key when absent.
  const Tensor& vector(Section s, const std::string& key) const;
  const Tensor& tokens(const std::string& key) const;
  const std::vector<std::string>& strings(Section s, const std::string& key) const;
  const std::vector<std::string>* find_strings(Section s, const std::string& key) const;

  std::size_t count(Section s) const;
  std::vector<std::string> keys(Section s) const;

  std::string serialize() const;
  static EmbeddingStore deserialize(std::string_view bytes);
  void write(const std::filesystem::path& path) const;
  static EmbeddingStore read(const std::filesystem::path& path);

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

 private:
  static std::size_t index(Section s) { return static_cast<std::size_t>(s) - 1; }

  std::array<std::size_t, 8> dims_{};
  std::array<std::map<std::string, Tensor>, 8> tensors_;
  std::array<std::map<std::string, std::vector<std::string>>, 8> strings_;
};

}  // namespace ccn
