#ifndef IMGHOP_DATASET_HPP
#define IMGHOP_DATASET_HPP

#include <string>
#include <vector>

#include "imghop/image.hpp"
#include "imghop/rng.hpp"

namespace imghop {

enum class DomainLabel { kX, kY };

inline const char* to_string(DomainLabel d) { return d == DomainLabel::kX ? "X" : "Y"; }

struct UnpairedDataset {
  DomainLabel domain_label = DomainLabel::kX;
  std::vector<Image> items;
  std::string source;

  void validate() const {
    if (items.empty()) throw EmptyDatasetError("UnpairedDataset: no items (" + source + ")");
    int h = items.front().height, w = items.front().width;
    for (const Image& img : items)
      if (img.height != h || img.width != w)
        throw ContractError("UnpairedDataset: items must share one size (" + source + ")");
  }
};

struct Batch {
  std::vector<Image> images;
  DomainLabel domain_label = DomainLabel::kX;
};

// Loads every decodable PNG under `directory` (non-recursive), resized to
// image_size x image_size and normalized to [-1, 1]. Items are ordered
// lexicographically by filename so epochs are reproducible. Undecodable
// files are skipped with a warning on stderr; it is an error only if
// nothing could be decoded.
UnpairedDataset load_unpaired_dataset(const std::string& directory, DomainLabel domain_label,
                                      int image_size);

// Uniform sampling with replacement, deterministic given the generator.
Batch sample_batch(const UnpairedDataset& dataset, int batch_size, Rng& rng);

Tensor<float> batch_to_tensor(const Batch& batch);

}  // namespace imghop

#endif  // IMGHOP_DATASET_HPP
