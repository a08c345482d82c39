#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ymap {

// H x W x C float raster stored planar (channel-major): element (c, y, x)
// lives at c*H*W + y*W + x. Every algorithm in this library works one
// channel at a time, so channel planes are contiguous.
class ImageGrid {
 public:
  ImageGrid() = default;
  ImageGrid(int height, int width, int channels, float fill = 0.0f);
  ImageGrid(int height, int width, int channels, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  float at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<float> plane(int c);
  std::span<const float> plane(int c) const;

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& storage() { return data_; }

  // Copies channel range [first, first + count) into a new grid.
  ImageGrid channels_slice(int first, int count) const;
  // Overwrites channels starting at `first` with all channels of `src`.
  void set_channels(int first, const ImageGrid& src);

  bool same_shape(const ImageGrid& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// value / 255 per element.
ImageGrid normalize_rgb(const ImageGrid& raw);

}  // namespace ymap
