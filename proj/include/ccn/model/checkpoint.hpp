#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccn/data/domain_vocab.hpp"
#include "ccn/model/model.hpp"

namespace ccn {

inline constexpr char kCheckpointMagic[9] = "CCNCKPT1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Trained model state: architecture, domain vocabulary, parameters and
/// buffers.
///
/// Values are rounded through 32-bit floats when captured, so a checkpoint
/// written and re-read is identical to the one in memory.
///
/// File layout (u32 and f32 little-endian):
///
///   "CCNCKPT1" | version | model kind (0 ccn, 1 averaged, 2 clip_only)
///   config JSON (len | bytes) | vocabulary JSON (len | bytes)
///   metadata JSON (len | bytes)
///   parameter count, then per parameter: name (len | bytes) | rank | dims | values
///   buffer count, then buffers as parameters
class Checkpoint {
 public:
  ModelKind kind = ModelKind::ccn;
  CcnConfig config;
  DomainVocabulary vocab;
  // Free-form training record (epoch, validation metrics, seed).
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> parameters;
  std::vector<NamedTensor> buffers;

  static Checkpoint capture(Model& model, const DomainVocabulary& vocab,
                            nlohmann::json meta = nlohmann::json::object());

  // Builds the model and loads the stored values. Throws FormatError when
  // names or shapes disagree with the architecture.
  std::unique_ptr<Model> instantiate() const;
  void load_into(Model& model) const;

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);
  void write(const std::filesystem::path& path) const;
  static Checkpoint read(const std::filesystem::path& path);

  // FNV-1a digest of the serialized bytes.
  std::string fingerprint() const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

}  // namespace ccn
