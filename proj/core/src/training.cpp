#include "imghop/training.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "imghop/checkpoint.hpp"

namespace imghop {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<SubUpdateRecord> train_step(TrainingState& state, const Batch& x_batch,
                                        const Batch& y_batch) {
  if (x_batch.domain_label != DomainLabel::kX || y_batch.domain_label != DomainLabel::kY)
    throw ContractError("train_step: batches must come from domains X and Y respectively");
  Tensor<float> xt = batch_to_tensor(x_batch);
  Tensor<float> yt = batch_to_tensor(y_batch);
  return train_step_impl(state.bundle, state.optimizers, state.config, xt, yt, state.step);
}

int resolved_steps_per_epoch(const TrainingConfig& config, std::size_t x_items,
                             std::size_t y_items) {
  if (config.steps_per_epoch > 0) return config.steps_per_epoch;
  std::size_t m = std::min(x_items, y_items);
  return static_cast<int>((m + static_cast<std::size_t>(config.batch_size) - 1) /
                          static_cast<std::size_t>(config.batch_size));
}

namespace {

json config_json(const TrainingConfig& c, const GeneratorSpec& g, const DiscriminatorSpec& d) {
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
              {"checkpoint_interval", c.checkpoint_interval},
              {"generator_spec",
               {{"base_width", g.base_width},
                {"n_residual_blocks", g.n_residual_blocks},
                {"input_size", g.input_size}}},
              {"discriminator_spec", {{"base_width", d.base_width}, {"n_layers", d.n_layers}}}};
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

class TrainLogger {
 public:
  TrainLogger(const std::string& path) : os_(path, std::ios::app) {
    if (!os_) throw ConfigError("train: cannot open log file " + path);
  }

  void config_record(const json& cfg, std::int64_t step) {
    json j{{"event", "config"}, {"step", step}, {"config", cfg}};
    os_ << j.dump() << "\n";
    os_.flush();
  }

  void update_record(const SubUpdateRecord& r) {
    json j{{"event", "update"},
           {"step", r.step},
           {"hop", r.hop},
           {"update", to_string(r.kind)},
           {"direction", r.kind == UpdateKind::kDiscH ? "both" : to_string(r.losses.direction)},
           {"cycle", r.losses.cycle},
           {"adversarial", r.losses.adversarial},
           {"hybrid", r.losses.hybrid},
           {"smoothness", r.losses.smoothness},
           {"weighted_total", r.losses.weighted_total}};
    os_ << j.dump() << "\n";
  }

  void flush() { os_.flush(); }

 private:
  std::ofstream os_;
};

std::string checkpoint_path(const std::string& out_dir, std::int64_t step, bool final) {
  if (final) return out_dir + "/checkpoint_final.ckpt";
  std::ostringstream name;
  name << out_dir << "/checkpoint_step" << std::setw(8) << std::setfill('0') << step << ".ckpt";
  return name.str();
}

}  // namespace

std::string training_config_hash(const TrainingConfig& config, const GeneratorSpec& gspec,
                                 const DiscriminatorSpec& dspec) {
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0')
      << fnv1a64(config_json(config, gspec, dspec).dump());
  return hex.str();
}

std::string train(const TrainingConfig& config, const GeneratorSpec& gspec,
                  const DiscriminatorSpec& dspec, const UnpairedDataset& dataset_x,
                  const UnpairedDataset& dataset_y, const std::string& out_dir,
                  const std::string& resume_checkpoint) {
  config.validate();
  gspec.validate();
  dspec.validate();
  dataset_x.validate();
  dataset_y.validate();
  if (dataset_x.domain_label != DomainLabel::kX || dataset_y.domain_label != DomainLabel::kY)
    throw ConfigError("train: dataset_x/dataset_y must carry domain labels X/Y");
  for (const UnpairedDataset* ds : {&dataset_x, &dataset_y}) {
    if (ds->items.front().height != gspec.input_size || ds->items.front().width != gspec.input_size)
      throw ConfigError("train: dataset image size does not match generator input_size");
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir))
    throw ConfigError("train: output directory not writable: " + out_dir);
  {
    std::ofstream probe(out_dir + "/.write_probe");
    if (!probe) throw ConfigError("train: output directory not writable: " + out_dir);
    probe.close();
    fs::remove(out_dir + "/.write_probe", ec);
  }

  const std::string hash = training_config_hash(config, gspec, dspec);
  std::unique_ptr<TrainingState> state;
  if (!resume_checkpoint.empty()) {
    state = std::make_unique<TrainingState>(load_checkpoint(resume_checkpoint));
    if (state->bundle.config_hash != hash)
      throw ConfigError("train: refusing to resume, config hash mismatch (checkpoint " +
                        state->bundle.config_hash + " vs requested " + hash + ")");
  } else {
    state = std::make_unique<TrainingState>(config, gspec, dspec);
    state->bundle.config_hash = hash;
    state->bundle.created_unix = static_cast<std::int64_t>(
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
  }

  const int spe = resolved_steps_per_epoch(config, dataset_x.items.size(), dataset_y.items.size());
  const std::int64_t total_steps = static_cast<std::int64_t>(config.epochs) * spe;

  TrainLogger logger(out_dir + "/train_log.jsonl");
  logger.config_record(config_json(config, gspec, dspec), state->step);

  while (state->step < total_steps) {
    Batch xb = sample_batch(dataset_x, config.batch_size, state->rng);
    Batch yb = sample_batch(dataset_y, config.batch_size, state->rng);
    std::vector<SubUpdateRecord> records = train_step(*state, xb, yb);
    ++state->step;
    state->epoch = state->step / spe;
    for (const SubUpdateRecord& r : records) logger.update_record(r);
    if (state->step % config.checkpoint_interval == 0 && state->step < total_steps) {
      logger.flush();
      save_checkpoint(*state, checkpoint_path(out_dir, state->step, false));
    }
  }
  logger.flush();

  std::string final_path = checkpoint_path(out_dir, state->step, true);
  save_checkpoint(*state, final_path);
  return final_path;
}

}  // namespace imghop
