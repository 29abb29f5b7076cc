#include "imghop/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstring>
#include <fstream>
#include <utility>
#include <vector>

namespace imghop {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'I', 'M', 'G', 'H', 'O', 'P', 'C', 'K'};

std::uint32_t crc32_ieee(const unsigned char* data, std::size_t len, std::uint32_t seed = 0) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = seed ^ 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

struct NamedArray {
  std::string name;
  const Tensor<float>* tensor;
};

template <typename Net>
void append_params(const std::string& prefix, Net& net, std::vector<NamedArray>& out) {
  for (const Param<float>* p : net.params()) out.push_back({prefix + "." + p->name, &p->value});
}

void append_moments(const std::string& prefix, const std::vector<Param<float>*>& params,
                    const AdamState<float>& opt, std::vector<NamedArray>& out) {
  for (const Param<float>* p : params) {
    out.push_back({"optim." + prefix + "." + p->name + ".m",
                   &opt.first_moments()[static_cast<std::size_t>(p->id)]});
    out.push_back({"optim." + prefix + "." + p->name + ".v",
                   &opt.second_moments()[static_cast<std::size_t>(p->id)]});
  }
}

// The canonical array order: network parameters then optimizer moments,
// networks in bundle order.
std::vector<NamedArray> enumerate_arrays(const TrainingState& state) {
  auto& b = const_cast<TrainingState&>(state).bundle;
  auto& o = const_cast<TrainingState&>(state).optimizers;
  std::vector<NamedArray> arrays;
  append_params("gen_G", b.gen_G, arrays);
  append_params("gen_F", b.gen_F, arrays);
  append_params("disc_X", b.disc_X, arrays);
  append_params("disc_Y", b.disc_Y, arrays);
  append_params("disc_H", b.disc_H, arrays);
  append_moments("gen_G", b.gen_G.params(), o.g, arrays);
  append_moments("gen_F", b.gen_F.params(), o.f, arrays);
  append_moments("disc_X", b.disc_X.params(), o.dx, arrays);
  append_moments("disc_Y", b.disc_Y.params(), o.dy, arrays);
  append_moments("disc_H", b.disc_H.params(), o.dh, arrays);
  return arrays;
}

json config_to_json(const TrainingConfig& c) {
  return json{{"h", c.h},
              {"weights",
               {{"gamma", c.weights.gamma},
                {"epsilon", c.weights.epsilon},
                {"delta", c.weights.delta},
                {"zeta", c.weights.zeta}}},
              {"learning_rate", c.learning_rate},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"steps_per_epoch", c.steps_per_epoch},
              {"seed", c.seed},
              {"checkpoint_interval", c.checkpoint_interval}};
}

TrainingConfig config_from_json(const json& j) {
  TrainingConfig c;
  c.h = j.at("h").get<int>();
  c.weights.gamma = j.at("weights").at("gamma").get<double>();
  c.weights.epsilon = j.at("weights").at("epsilon").get<double>();
  c.weights.delta = j.at("weights").at("delta").get<double>();
  c.weights.zeta = j.at("weights").at("zeta").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.steps_per_epoch = j.at("steps_per_epoch").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.checkpoint_interval = j.at("checkpoint_interval").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const TrainingState& state, const std::string& path) {
  std::vector<NamedArray> arrays = enumerate_arrays(state);

  json meta;
  meta["format_version"] = kCheckpointFormatVersion;
  meta["created_unix"] = state.bundle.created_unix;
  meta["config_hash"] = state.bundle.config_hash;
  meta["generator_spec"] = {{"base_width", state.bundle.generator_spec.base_width},
                            {"n_residual_blocks", state.bundle.generator_spec.n_residual_blocks},
                            {"input_size", state.bundle.generator_spec.input_size}};
  meta["discriminator_spec"] = {{"base_width", state.bundle.discriminator_spec.base_width},
                                {"n_layers", state.bundle.discriminator_spec.n_layers}};
  meta["hops"] = state.bundle.trained_hop_count;
  meta["training_config"] = config_to_json(state.config);
  meta["epoch"] = state.epoch;
  meta["step"] = state.step;
  meta["rng_state"] = state.rng.save_state();
  meta["has_optimizer_state"] = true;
  meta["optimizer_t"] = {{"gen_G", state.optimizers.g.t()},
                         {"gen_F", state.optimizers.f.t()},
                         {"disc_X", state.optimizers.dx.t()},
                         {"disc_Y", state.optimizers.dy.t()},
                         {"disc_H", state.optimizers.dh.t()}};
  json dir = json::array();
  for (const NamedArray& a : arrays) {
    dir.push_back({{"name", a.name},
                   {"dtype", "f32"},
                   {"shape", {a.tensor->n(), a.tensor->c(), a.tensor->h(), a.tensor->w()}}});
  }
  meta["arrays"] = std::move(dir);

  std::string meta_str = meta.dump();
  std::string blob;
  blob.reserve(meta_str.size() + 1024);
  blob.append(kMagic, sizeof(kMagic));
  std::uint64_t meta_len = meta_str.size();
  blob.append(reinterpret_cast<const char*>(&meta_len), sizeof(meta_len));
  blob.append(meta_str);
  for (const NamedArray& a : arrays) {
    blob.append(reinterpret_cast<const char*>(a.tensor->data()),
                a.tensor->size() * sizeof(float));
  }
  std::uint32_t crc = crc32_ieee(reinterpret_cast<const unsigned char*>(blob.data()), blob.size());
  blob.append(reinterpret_cast<const char*>(&crc), sizeof(crc));

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("save_checkpoint: cannot open " + path + " for writing");
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  os.flush();
  if (!os) throw Error("save_checkpoint: write failed for " + path);
}

TrainingState load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IntegrityError("load_checkpoint: cannot open " + path);
  std::string blob((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (blob.size() < sizeof(kMagic) + sizeof(std::uint64_t) + sizeof(std::uint32_t))
    throw IntegrityError("load_checkpoint: truncated archive " + path);
  if (std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0)
    throw IntegrityError("load_checkpoint: bad magic in " + path);

  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, blob.data() + blob.size() - sizeof(stored_crc), sizeof(stored_crc));
  std::uint32_t actual_crc = crc32_ieee(reinterpret_cast<const unsigned char*>(blob.data()),
                                        blob.size() - sizeof(stored_crc));
  if (stored_crc != actual_crc)
    throw IntegrityError("load_checkpoint: CRC mismatch, archive is corrupt: " + path);

  std::uint64_t meta_len;
  std::memcpy(&meta_len, blob.data() + sizeof(kMagic), sizeof(meta_len));
  std::size_t meta_off = sizeof(kMagic) + sizeof(meta_len);
  if (meta_off + meta_len > blob.size() - sizeof(stored_crc))
    throw IntegrityError("load_checkpoint: metadata overruns archive " + path);

  json meta;
  try {
    meta = json::parse(blob.substr(meta_off, meta_len));
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("load_checkpoint: malformed metadata: ") + e.what());
  }

  int version = meta.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion)
    throw UnsupportedVersionError("load_checkpoint: format version " + std::to_string(version) +
                                  " is not supported (expected " +
                                  std::to_string(kCheckpointFormatVersion) + ")");

  GeneratorSpec gspec;
  gspec.base_width = meta.at("generator_spec").at("base_width").get<int>();
  gspec.n_residual_blocks = meta.at("generator_spec").at("n_residual_blocks").get<int>();
  gspec.input_size = meta.at("generator_spec").at("input_size").get<int>();
  DiscriminatorSpec dspec;
  dspec.base_width = meta.at("discriminator_spec").at("base_width").get<int>();
  dspec.n_layers = meta.at("discriminator_spec").at("n_layers").get<int>();

  TrainingConfig cfg = config_from_json(meta.at("training_config"));
  TrainingState state(cfg, gspec, dspec);
  state.bundle.trained_hop_count = meta.at("hops").get<int>();
  state.bundle.config_hash = meta.at("config_hash").get<std::string>();
  state.bundle.created_unix = meta.at("created_unix").get<std::int64_t>();
  state.epoch = meta.at("epoch").get<std::int64_t>();
  state.step = meta.at("step").get<std::int64_t>();
  state.rng.load_state(meta.at("rng_state").get<std::string>());
  state.optimizers.g.set_t(meta.at("optimizer_t").at("gen_G").get<std::int64_t>());
  state.optimizers.f.set_t(meta.at("optimizer_t").at("gen_F").get<std::int64_t>());
  state.optimizers.dx.set_t(meta.at("optimizer_t").at("disc_X").get<std::int64_t>());
  state.optimizers.dy.set_t(meta.at("optimizer_t").at("disc_Y").get<std::int64_t>());
  state.optimizers.dh.set_t(meta.at("optimizer_t").at("disc_H").get<std::int64_t>());

  std::vector<NamedArray> arrays = enumerate_arrays(state);
  const json& dir = meta.at("arrays");
  if (dir.size() != arrays.size())
    throw IntegrityError("load_checkpoint: array directory size mismatch");

  std::size_t off = meta_off + meta_len;
  const std::size_t end = blob.size() - sizeof(stored_crc);
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    const json& entry = dir[i];
    if (entry.at("name").get<std::string>() != arrays[i].name)
      throw IntegrityError("load_checkpoint: unexpected array '" +
                           entry.at("name").get<std::string>() + "' (expected '" +
                           arrays[i].name + "')");
    if (entry.at("dtype").get<std::string>() != "f32")
      throw IntegrityError("load_checkpoint: unsupported dtype for " + arrays[i].name);
    const auto& shape = entry.at("shape");
    Tensor<float>* t = const_cast<Tensor<float>*>(arrays[i].tensor);
    if (shape.at(0).get<int>() != t->n() || shape.at(1).get<int>() != t->c() ||
        shape.at(2).get<int>() != t->h() || shape.at(3).get<int>() != t->w())
      throw IntegrityError("load_checkpoint: shape mismatch for " + arrays[i].name);
    std::size_t nbytes = t->size() * sizeof(float);
    if (off + nbytes > end) throw IntegrityError("load_checkpoint: arrays overrun archive");
    std::memcpy(t->data(), blob.data() + off, nbytes);
    off += nbytes;
  }
  if (off != end) throw IntegrityError("load_checkpoint: trailing bytes in archive");
  return state;
}

}  // namespace imghop
