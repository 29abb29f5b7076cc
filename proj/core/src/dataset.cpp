#include "imghop/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>

namespace imghop {

namespace fs = std::filesystem;

UnpairedDataset load_unpaired_dataset(const std::string& directory, DomainLabel domain_label,
                                      int image_size) {
  if (image_size < 4 || image_size % 4 != 0)
    throw ConfigError("load_unpaired_dataset: image_size must be a positive multiple of 4");
  fs::path dir(directory);
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw ConfigError("load_unpaired_dataset: missing directory " + directory);

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());  // reproducible epoch order

  UnpairedDataset ds;
  ds.domain_label = domain_label;
  ds.source = directory;
  for (const std::string& f : files) {
    try {
      ds.items.push_back(load_png(f, image_size));
    } catch (const IntegrityError&) {
      std::cerr << "[imghop] warning: skipping undecodable file " << f << "\n";
    }
  }
  if (ds.items.empty())
    throw EmptyDatasetError("load_unpaired_dataset: no decodable images in " + directory);
  ds.validate();
  return ds;
}

Batch sample_batch(const UnpairedDataset& dataset, int batch_size, Rng& rng) {
  if (batch_size < 1) throw ContractError("sample_batch: batch_size must be >= 1");
  dataset.validate();
  Batch batch;
  batch.domain_label = dataset.domain_label;
  batch.images.reserve(static_cast<std::size_t>(batch_size));
  auto n = static_cast<std::int64_t>(dataset.items.size());
  for (int i = 0; i < batch_size; ++i)
    batch.images.push_back(dataset.items[static_cast<std::size_t>(rng.uniform_int(0, n - 1))]);
  return batch;
}

Tensor<float> batch_to_tensor(const Batch& batch) { return images_to_tensor(batch.images); }

}  // namespace imghop
