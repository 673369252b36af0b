#include "shiftlab/cli/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "shiftlab/baselines/baselines.hpp"
#include "shiftlab/core/error.hpp"
#include "shiftlab/model/config.hpp"

namespace shiftlab::cli {

namespace {

template <typename U>
void put(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string where;

  void need(std::size_t n) {
    if (buf.size() - pos < n) throw ValidationError(where + ": truncated checkpoint");
  }
  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += sizeof(U);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::string meta = ckpt.meta.dump();
  put<std::uint64_t>(out, meta.size());
  out += meta;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (std::size_t i = 0; i < ckpt.arrays.size(); ++i) {
    const std::string& name = ckpt.arrays.name(i);
    const Tensor& t = ckpt.arrays.at(i);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    for (float v : t.values()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf, 0, path.string()};
  if (r.bytes(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic)) {
    throw ValidationError(path.string() + ": not a checkpoint (bad magic)");
  }
  Checkpoint c;
  const auto meta_len = r.get<std::uint64_t>();
  try {
    c.meta = nlohmann::json::parse(r.bytes(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": bad checkpoint metadata: " + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t a = 0; a < count; ++a) {
    std::string name = r.bytes(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw ValidationError(path.string() + ": array '" + name + "' has rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.get<std::uint64_t>();
      n *= d;
    }
    r.need(n * 4);
    Tensor t(shape);
    for (auto& v : t.values()) v = std::bit_cast<float>(r.get<std::uint32_t>());
    c.arrays.add(std::move(name), std::move(t));
  }
  if (r.pos != buf.size()) throw ValidationError(path.string() + ": trailing bytes after checkpoint arrays");
  return c;
}

Checkpoint make_checkpoint(const model::Model<float>& m, const scene::Vocabulary& vocab, const nlohmann::json& train,
                           std::uint64_t seed, int epoch, const nlohmann::json& metrics) {
  Checkpoint c;
  c.meta = {{"format", "SSAS0001"},
            {"kind", model::to_string(m.config().kind)},
            {"model", model::to_json(m.config())},
            {"train", train},
            {"vocab", {{"categories", vocab.categories}, {"predicates", vocab.predicates}}},
            {"seed", seed},
            {"epoch", epoch},
            {"metrics", metrics}};
  c.arrays = m.params();
  return c;
}

scene::Vocabulary checkpoint_vocab(const Checkpoint& ckpt) {
  try {
    scene::Vocabulary v;
    v.categories = ckpt.meta.at("vocab").at("categories").get<std::vector<std::string>>();
    v.predicates = ckpt.meta.at("vocab").at("predicates").get<std::vector<std::string>>();
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint metadata lacks a vocabulary: ") + e.what());
  }
}

std::unique_ptr<model::Model<float>> restore_model(const Checkpoint& ckpt) {
  model::ModelConfig config;
  std::string kind;
  try {
    config = model::model_config_from_json(ckpt.meta.at("model"));
    kind = ckpt.meta.at("kind").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint metadata incomplete: ") + e.what());
  }
  if (model::kind_from_string(kind) != config.kind) {
    throw ValidationError("checkpoint kind '" + kind + "' disagrees with its config snapshot");
  }
  auto m = model::make_model<float>(config, ckpt.meta.value("seed", std::uint64_t{0}));
  const ParamStore<float>& want = m->params();
  if (want.size() != ckpt.arrays.size()) {
    throw ValidationError("checkpoint has " + std::to_string(ckpt.arrays.size()) + " arrays, " + kind +
                          " model expects " + std::to_string(want.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (ckpt.arrays.name(i) != want.name(i)) {
      throw ValidationError("checkpoint array " + std::to_string(i) + " is '" + ckpt.arrays.name(i) + "', expected '" +
                            want.name(i) + "'");
    }
    if (ckpt.arrays.at(i).shape() != want.at(i).shape()) {
      throw ValidationError("checkpoint array '" + want.name(i) + "' has shape " +
                            shape_to_string(ckpt.arrays.at(i).shape()) + ", config expects " +
                            shape_to_string(want.at(i).shape()));
    }
  }
  m->load_params(ckpt.arrays);
  return m;
}

}  // namespace shiftlab::cli
