#ifndef IMGHOP_INFERENCE_HPP
#define IMGHOP_INFERENCE_HPP

#include <string>
#include <vector>

#include "imghop/dataset.hpp"
#include "imghop/losses.hpp"
#include "imghop/networks.hpp"

namespace imghop {

struct TranslationRequest {
  Direction direction = Direction::kXToY;
  int hops = -1;  // negative: use the checkpoint's trained hop count
  bool emit_intermediates = true;
};

// Ordered hop outputs for one input. With emit_intermediates, images holds
// [input, hop 1, ..., hop n]; otherwise only the final image.
struct HopSequence {
  int hops = 0;
  std::vector<Image> images;
};

// Applies the requested direction's generator `hops` times to each image.
// Hop counts beyond the trained value are valid (extrapolation).
std::vector<HopSequence> translate(const ModelBundle<float>& bundle,
                                   const std::vector<Image>& images,
                                   const TranslationRequest& request);

// Convenience overload that loads the checkpoint first.
std::vector<HopSequence> translate(const std::string& checkpoint_path,
                                   const std::vector<Image>& images,
                                   const TranslationRequest& request);

// Writes <stem>_hop<k>.png per materialized hop plus a JSON manifest
// listing input, direction, hop count and per-hop paths. Returns the
// manifest path.
std::string write_hop_sequences(const std::vector<HopSequence>& sequences,
                                const std::vector<std::string>& input_stems,
                                const TranslationRequest& request, const std::string& out_dir);

}  // namespace imghop

#endif  // IMGHOP_INFERENCE_HPP
