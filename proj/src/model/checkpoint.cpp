#include "ccn/model/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "ccn/errors.hpp"
#include "io/byte_io.hpp"

namespace ccn {

namespace {

using io::ByteReader;
using io::ByteWriter;
using io::round_to_float;

constexpr std::uint32_t kMaxRank = 8;

Tensor rounded(const Tensor& t) {
  Tensor r = t;
  for (double& v : r.data()) v = round_to_float(v);
  return r;
}

void write_tensors(ByteWriter& w, const std::vector<NamedTensor>& list) {
  w.u32(static_cast<std::uint32_t>(list.size()));
  for (const auto& nt : list) {
    w.str(nt.name);
    w.u32(static_cast<std::uint32_t>(nt.value.rank()));
    for (std::size_t d : nt.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : nt.value.data()) w.f32(v);
  }
}

std::vector<NamedTensor> read_tensors(ByteReader& r) {
  const std::uint32_t n = r.u32();
  std::vector<NamedTensor> list;
  for (std::uint32_t i = 0; i < n; ++i) {
    NamedTensor nt;
    nt.name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > kMaxRank) throw FormatError("checkpoint tensor '" + nt.name + "' has rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = r.u32();
      count *= d;
    }
    std::vector<double> values(count);
    for (double& v : values) v = r.f32();
    nt.value = Tensor(std::move(shape), std::move(values));
    list.push_back(std::move(nt));
  }
  return list;
}

template <typename T>
void assign(std::vector<T*> targets, const std::vector<NamedTensor>& stored, const char* what) {
  if (targets.size() != stored.size()) {
    throw FormatError(std::string("checkpoint has ") + std::to_string(stored.size()) + " " + what +
                      "s, model expects " + std::to_string(targets.size()));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i]->name != stored[i].name) {
      throw FormatError(std::string("checkpoint ") + what + " " + std::to_string(i) + " is '" + stored[i].name +
                        "', model expects '" + targets[i]->name + "'");
    }
    if (targets[i]->value.shape() != stored[i].value.shape()) {
      throw FormatError(std::string("checkpoint ") + what + " '" + stored[i].name + "' has shape " +
                        shape_string(stored[i].value.shape()) + ", model expects " +
                        shape_string(targets[i]->value.shape()));
    }
    targets[i]->value = stored[i].value;
  }
}

}  // namespace

Checkpoint Checkpoint::capture(Model& model, const DomainVocabulary& vocab, nlohmann::json meta) {
  Checkpoint c;
  c.kind = model.kind();
  c.config = model.batch_config();
  c.vocab = vocab;
  c.meta = std::move(meta);
  for (Parameter* p : model.parameters()) c.parameters.push_back({p->name, rounded(p->value)});
  for (Buffer* b : model.buffers()) c.buffers.push_back({b->name, rounded(b->value)});
  return c;
}

void Checkpoint::load_into(Model& model) const {
  if (model.kind() != kind) {
    throw FormatError("checkpoint holds a " + std::string(to_string(kind)) + " model, got " +
                      std::string(to_string(model.kind())));
  }
  assign(model.parameters(), parameters, "parameter");
  assign(model.buffers(), buffers, "buffer");
}

std::unique_ptr<Model> Checkpoint::instantiate() const {
  auto model = make_model(kind, config, vocab.rows(), 0);
  load_into(*model);
  return model;
}

std::string Checkpoint::serialize() const {
  ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, 8));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(kind));
  w.str(to_json(config).dump());
  w.str(vocab.to_json_string());
  w.str(meta.dump());
  write_tensors(w, parameters);
  write_tensors(w, buffers);
  return w.take();
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.bytes(8) != std::string_view(kCheckpointMagic, 8)) throw FormatError("not a checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  const std::uint32_t kind = r.u32();
  if (kind > static_cast<std::uint32_t>(ModelKind::clip_only)) {
    throw FormatError("unknown model kind " + std::to_string(kind) + " in checkpoint");
  }
  c.kind = static_cast<ModelKind>(kind);
  try {
    c.config = config_from_json(nlohmann::json::parse(r.str()));
    c.vocab = DomainVocabulary::from_json_string(r.str());
    c.meta = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  c.parameters = read_tensors(r);
  c.buffers = read_tensors(r);
  if (!r.done()) throw FormatError("trailing bytes after checkpoint at byte " + std::to_string(r.position()));
  return c;
}

void Checkpoint::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint Checkpoint::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

std::string Checkpoint::fingerprint() const { return fnv1a_hex(serialize()); }

}  // namespace ccn
