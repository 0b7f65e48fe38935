#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace railvo {

/// Row-major grayscale raster with samples normalized to [0,1].
///
/// An optional validity mask travels with the pixels: images produced by
/// warping or rendering mark samples that had no source data. An empty mask
/// means every sample is valid.
class Image {
 public:
  Image() = default;
  Image(int width, int height, float fill = 0.0f);
  Image(int width, int height, std::vector<float> data);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  float at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const float> pixels() const { return data_; }
  std::span<float> pixels() { return data_; }
  std::span<const float> row(int y) const {
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(y) * width_, width_);
  }

  bool has_mask() const { return !mask_.empty(); }
  bool valid(int x, int y) const {
    return mask_.empty() || mask_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  /// Allocates an all-valid mask if none exists yet.
  std::vector<std::uint8_t>& mask();
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  std::size_t valid_count() const;

  /// Throws Error(InvalidArgument) if a sample is non-finite or outside [0,1].
  void validate() const;

  friend bool operator==(const Image& a, const Image& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_ &&
           a.mask_ == b.mask_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
  std::vector<std::uint8_t> mask_;
};

/// Bilinear sample at a real-valued position. Returns false when any of the
/// four taps needed (those with non-zero weight) is outside the image or masked.
bool sample_bilinear(const Image& img, double x, double y, float& out);

}  // namespace railvo
