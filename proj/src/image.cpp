#include "gazemae/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <sstream>

#include "gazemae/errors.hpp"

namespace gazemae {

Image Image::zeros(int height, int width) {
  Image img;
  img.height = height;
  img.width = width;
  img.data.assign(static_cast<std::size_t>(height) * width * 3, 0.0f);
  return img;
}

VideoTensor VideoTensor::zeros(int frames, int height, int width) {
  VideoTensor t;
  t.frames = frames;
  t.height = height;
  t.width = width;
  t.data.assign(static_cast<std::size_t>(frames) * height * width * 3, 0.0f);
  return t;
}

VideoTensorD VideoTensorD::zeros(int frames, int height, int width) {
  VideoTensorD t;
  t.frames = frames;
  t.height = height;
  t.width = width;
  t.data.assign(static_cast<std::size_t>(frames) * height * width * 3, 0.0);
  return t;
}

Image load_png(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (mat.empty()) {
    throw Error("failed to read image: " + path.string());
  }
  Image img = Image::zeros(mat.rows, mat.cols);
  for (int y = 0; y < mat.rows; ++y) {
    const cv::Vec3b* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < mat.cols; ++x) {
      // OpenCV loads BGR
      img.at(y, x, 0) = row[x][2] / 255.0f;
      img.at(y, x, 1) = row[x][1] / 255.0f;
      img.at(y, x, 2) = row[x][0] / 255.0f;
    }
  }
  return img;
}

void save_png(const std::filesystem::path& path, const Image& image) {
  if (image.empty()) throw ValidationError("save_png: empty image");
  cv::Mat mat(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    cv::Vec3b* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(y, x, c), 0.0f, 1.0f);
        row[x][2 - c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  if (!cv::imwrite(path.string(), mat)) {
    throw Error("failed to write image: " + path.string());
  }
}

namespace {

inline float sample_or_zero(const Image& img, int y, int x, int c) {
  if (y < 0 || y >= img.height || x < 0 || x >= img.width) return 0.0f;
  return img.at(y, x, c);
}

}  // namespace

Image crop_and_resize(const Image& src, const BBox& box, int out_size) {
  if (src.empty()) throw ValidationError("crop_and_resize: empty source image");
  if (out_size <= 0) throw ValidationError("crop_and_resize: out_size must be positive");
  if (!(box.w > 0.0) || !(box.h > 0.0)) {
    std::ostringstream msg;
    msg << "crop_and_resize: degenerate bbox w=" << box.w << " h=" << box.h;
    throw ValidationError(msg.str());
  }
  if (box.x >= src.width || box.y >= src.height || box.x + box.w <= 0.0 ||
      box.y + box.h <= 0.0) {
    throw ValidationError("crop_and_resize: bbox fully outside image");
  }

  Image dst = Image::zeros(out_size, out_size);
  const double sx = box.w / out_size;
  const double sy = box.h / out_size;
  for (int r = 0; r < out_size; ++r) {
    const double fy = box.y + (r + 0.5) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(fy));
    const double wy = fy - y0;
    for (int c = 0; c < out_size; ++c) {
      const double fx = box.x + (c + 0.5) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const double wx = fx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = (1.0 - wx) * sample_or_zero(src, y0, x0, ch) +
                           wx * sample_or_zero(src, y0, x0 + 1, ch);
        const double bot = (1.0 - wx) * sample_or_zero(src, y0 + 1, x0, ch) +
                           wx * sample_or_zero(src, y0 + 1, x0 + 1, ch);
        dst.at(r, c, ch) = static_cast<float>((1.0 - wy) * top + wy * bot);
      }
    }
  }
  return dst;
}

}  // namespace gazemae
