#include "railvo/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "railvo/error.hpp"

namespace railvo {

Image::Image(int width, int height, float fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorCode::InvalidArgument, "negative image size");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image::Image(int width, int height, std::vector<float> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0 ||
      data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::InvalidArgument, "image data length does not match width*height");
  }
}

std::vector<std::uint8_t>& Image::mask() {
  if (mask_.empty()) mask_.assign(data_.size(), 1);
  return mask_;
}

std::size_t Image::valid_count() const {
  if (mask_.empty()) return data_.size();
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

void Image::validate() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const float v = data_[i];
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw Error(ErrorCode::InvalidArgument,
                  "sample " + std::to_string(i) + " outside [0,1]: " + std::to_string(v));
    }
  }
}

bool sample_bilinear(const Image& img, double x, double y, float& out) {
  const int w = img.width();
  const int h = img.height();
  if (!(x >= 0.0 && y >= 0.0 && x <= w - 1 && y <= h - 1)) return false;
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = fx > 0.0 ? x0 + 1 : x0;
  const int y1 = fy > 0.0 ? y0 + 1 : y0;
  if (img.has_mask()) {
    if (!img.valid(x0, y0) || !img.valid(x1, y0) || !img.valid(x0, y1) || !img.valid(x1, y1)) {
      return false;
    }
  }
  const double top = img.at(x0, y0) + fx * (img.at(x1, y0) - img.at(x0, y0));
  const double bot = img.at(x0, y1) + fx * (img.at(x1, y1) - img.at(x0, y1));
  out = static_cast<float>(top + fy * (bot - top));
  return true;
}

}  // namespace railvo
