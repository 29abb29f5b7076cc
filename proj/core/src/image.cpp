#include "imghop/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>

namespace imghop {

std::uint8_t denormalize_u8(float v) {
  double scaled = (static_cast<double>(v) + 1.0) * 127.5;
  double rounded = std::nearbyint(scaled);  // default FP mode: round half to even
  if (rounded < 0.0) return 0;
  if (rounded > 255.0) return 255;
  return static_cast<std::uint8_t>(rounded);
}

Image load_png(const std::string& path, int resize_to) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw IntegrityError("load_png: cannot decode " + path);
  if (resize_to > 0 && (bgr.rows != resize_to || bgr.cols != resize_to)) {
    int interp = (bgr.rows > resize_to || bgr.cols > resize_to) ? cv::INTER_AREA : cv::INTER_LINEAR;
    cv::Mat resized;
    cv::resize(bgr, resized, cv::Size(resize_to, resize_to), 0, 0, interp);
    bgr = resized;
  }
  Image img = Image::blank(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(y, x, 0) = normalize_u8(row[x][2]);
      img.at(y, x, 1) = normalize_u8(row[x][1]);
      img.at(y, x, 2) = normalize_u8(row[x][0]);
    }
  }
  return img;
}

void save_png(const Image& image, const std::string& path) {
  cv::Mat bgr(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x) {
      row[x][2] = denormalize_u8(image.at(y, x, 0));
      row[x][1] = denormalize_u8(image.at(y, x, 1));
      row[x][0] = denormalize_u8(image.at(y, x, 2));
    }
  }
  if (!cv::imwrite(path, bgr)) throw Error("save_png: cannot write " + path);
}

Tensor<float> images_to_tensor(const std::vector<Image>& images) {
  if (images.empty()) throw ContractError("images_to_tensor: empty list");
  int h = images.front().height, w = images.front().width;
  Tensor<float> t(static_cast<int>(images.size()), 3, h, w);
  for (std::size_t b = 0; b < images.size(); ++b) {
    const Image& img = images[b];
    if (img.height != h || img.width != w)
      throw ContractError("images_to_tensor: mixed image sizes");
    for (int c = 0; c < 3; ++c) {
      float* plane = t.plane(static_cast<int>(b), c);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) plane[static_cast<std::size_t>(y) * w + x] = img.at(y, x, c);
    }
  }
  return t;
}

Tensor<float> image_to_tensor(const Image& image) { return images_to_tensor({image}); }

Image tensor_to_image(const Tensor<float>& t, int index) {
  if (index < 0 || index >= t.n() || t.c() != 3)
    throw ContractError("tensor_to_image: bad index or channel count");
  Image img = Image::blank(t.h(), t.w());
  for (int c = 0; c < 3; ++c) {
    const float* plane = t.plane(index, c);
    for (int y = 0; y < t.h(); ++y)
      for (int x = 0; x < t.w(); ++x)
        img.at(y, x, c) = plane[static_cast<std::size_t>(y) * t.w() + x];
  }
  return img;
}

std::vector<Image> tensor_to_images(const Tensor<float>& t) {
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(t.n()));
  for (int b = 0; b < t.n(); ++b) out.push_back(tensor_to_image(t, b));
  return out;
}

}  // namespace imghop
