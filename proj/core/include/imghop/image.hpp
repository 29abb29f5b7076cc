#ifndef IMGHOP_IMAGE_HPP
#define IMGHOP_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "imghop/errors.hpp"
#include "imghop/tensor.hpp"

namespace imghop {

// One raster: HWC RGB, values in [-1, 1]. Height and width must be
// multiples of 4 so the generator's two stride-2 stages invert exactly.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // height * width * 3, channels-last

  float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  static Image blank(int height, int width, float value = 0.f) {
    Image img;
    img.height = height;
    img.width = width;
    img.pixels.assign(static_cast<std::size_t>(height) * width * 3, value);
    return img;
  }

  void validate() const {
    if (height < 4 || width < 4 || height % 4 != 0 || width % 4 != 0)
      throw ContractError("Image: height and width must be positive multiples of 4");
    if (pixels.size() != static_cast<std::size_t>(height) * width * 3)
      throw ContractError("Image: pixel buffer does not match dimensions");
  }
};

// [0, 255] -> [-1, 1], linear.
inline float normalize_u8(std::uint8_t v) { return static_cast<float>(v) / 127.5f - 1.f; }

// [-1, 1] -> [0, 255], round half to even, clamped.
std::uint8_t denormalize_u8(float v);

Image load_png(const std::string& path, int resize_to = 0);
void save_png(const Image& image, const std::string& path);

// Channels-last boundary type to NCHW compute layout and back.
Tensor<float> images_to_tensor(const std::vector<Image>& images);
Tensor<float> image_to_tensor(const Image& image);
std::vector<Image> tensor_to_images(const Tensor<float>& t);
Image tensor_to_image(const Tensor<float>& t, int index);

}  // namespace imghop

#endif  // IMGHOP_IMAGE_HPP
