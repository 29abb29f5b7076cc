#include "imghop/inference.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

#include "imghop/checkpoint.hpp"

namespace imghop {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<HopSequence> translate(const ModelBundle<float>& bundle,
                                   const std::vector<Image>& images,
                                   const TranslationRequest& request) {
  int hops = request.hops >= 0 ? request.hops : bundle.trained_hop_count;
  const Generator<float>& gen =
      request.direction == Direction::kXToY ? bundle.gen_G : bundle.gen_F;
  const int size = bundle.generator_spec.input_size;

  std::vector<HopSequence> out;
  out.reserve(images.size());
  for (const Image& img : images) {
    if (img.height != size || img.width != size)
      throw ContractError("translate: image size does not match the checkpoint's input_size");
    HopSequence seq;
    seq.hops = hops;
    Tensor<float> cur = image_to_tensor(img);
    if (request.emit_intermediates) seq.images.push_back(img);
    for (int k = 1; k <= hops; ++k) {
      cur = gen.forward(cur);
      if (request.emit_intermediates || k == hops) seq.images.push_back(tensor_to_image(cur, 0));
    }
    if (hops == 0 && !request.emit_intermediates) seq.images.push_back(img);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<HopSequence> translate(const std::string& checkpoint_path,
                                   const std::vector<Image>& images,
                                   const TranslationRequest& request) {
  TrainingState state = load_checkpoint(checkpoint_path);
  return translate(state.bundle, images, request);
}

std::string write_hop_sequences(const std::vector<HopSequence>& sequences,
                                const std::vector<std::string>& input_stems,
                                const TranslationRequest& request, const std::string& out_dir) {
  if (sequences.size() != input_stems.size())
    throw ContractError("write_hop_sequences: one stem per sequence required");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw ConfigError("write_hop_sequences: cannot create " + out_dir);

  json manifest;
  manifest["direction"] = to_string(request.direction);
  manifest["emit_intermediates"] = request.emit_intermediates;
  json items = json::array();
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const HopSequence& seq = sequences[i];
    json files = json::array();
    for (std::size_t j = 0; j < seq.images.size(); ++j) {
      int hop_index = request.emit_intermediates ? static_cast<int>(j) : seq.hops;
      std::string name = input_stems[i] + "_hop" + std::to_string(hop_index) + ".png";
      save_png(seq.images[j], out_dir + "/" + name);
      files.push_back(name);
    }
    items.push_back({{"input", input_stems[i]}, {"hops", seq.hops}, {"files", files}});
  }
  manifest["sequences"] = std::move(items);

  std::string manifest_path = out_dir + "/manifest.json";
  std::ofstream os(manifest_path);
  if (!os) throw Error("write_hop_sequences: cannot write " + manifest_path);
  os << manifest.dump(2) << "\n";
  return manifest_path;
}

}  // namespace imghop
