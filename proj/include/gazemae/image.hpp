#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gazemae {

// Pixel-space face box, sub-pixel coordinates allowed.
struct BBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  bool operator==(const BBox&) const = default;
};

// HxWx3 RGB, float values in [0,1], row-major interleaved.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  static Image zeros(int height, int width);

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool empty() const { return height == 0 || width == 0; }
};

// (T,H,W,3) clip tensor, same value convention as Image.
struct VideoTensor {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  static VideoTensor zeros(int frames, int height, int width);

  float& at(int t, int y, int x, int c) {
    return data[((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c];
  }
  float at(int t, int y, int x, int c) const {
    return data[((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c];
  }
  std::size_t size() const { return data.size(); }
};

// Double-precision variant fed to the model after normalization.
struct VideoTensorD {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static VideoTensorD zeros(int frames, int height, int width);

  double& at(int t, int y, int x, int c) {
    return data[((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c];
  }
  double at(int t, int y, int x, int c) const {
    return data[((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c];
  }
};

Image load_png(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const Image& image);

// Crop `box` out of `src` and bilinear-resize it to out_size x out_size.
// The box may extend past the image; samples outside contribute zeros.
// Throws ValidationError when the box is degenerate or misses the image
// entirely.
Image crop_and_resize(const Image& src, const BBox& box, int out_size);

}  // namespace gazemae
