#include "ymap/grid.hpp"

#include <algorithm>
#include <string>

#include "ymap/error.hpp"

namespace ymap {

namespace {

void check_dims(int height, int width, int channels) {
  if (height <= 0 || width <= 0 || channels <= 0) {
    throw ShapeError("grid dimensions must be positive, got " + std::to_string(height) + "x" +
                     std::to_string(width) + "x" + std::to_string(channels));
  }
}

}  // namespace

ImageGrid::ImageGrid(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

ImageGrid::ImageGrid(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ShapeError("grid data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(height) + "x" + std::to_string(width) + "x" +
                     std::to_string(channels));
  }
}

std::span<float> ImageGrid::plane(int c) {
  return std::span<float>(data_).subspan(static_cast<std::size_t>(c) * plane_size(), plane_size());
}

std::span<const float> ImageGrid::plane(int c) const {
  return std::span<const float>(data_).subspan(static_cast<std::size_t>(c) * plane_size(),
                                               plane_size());
}

ImageGrid ImageGrid::channels_slice(int first, int count) const {
  if (first < 0 || count <= 0 || first + count > channels_) {
    throw ShapeError("channel slice [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") out of range for " +
                     std::to_string(channels_) + " channels");
  }
  ImageGrid out(height_, width_, count);
  auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * plane_size());
  std::copy(begin, begin + static_cast<std::ptrdiff_t>(count * plane_size()), out.data_.begin());
  return out;
}

void ImageGrid::set_channels(int first, const ImageGrid& src) {
  if (src.height_ != height_ || src.width_ != width_ || first < 0 ||
      first + src.channels_ > channels_) {
    throw ShapeError("cannot place " + std::to_string(src.channels_) + " channels of " +
                     std::to_string(src.height_) + "x" + std::to_string(src.width_) +
                     " at channel " + std::to_string(first));
  }
  std::copy(src.data_.begin(), src.data_.end(),
            data_.begin() + static_cast<std::ptrdiff_t>(first * plane_size()));
}

ImageGrid normalize_rgb(const ImageGrid& raw) {
  ImageGrid out = raw;
  for (float& v : out.data()) v = v / 255.0f;
  return out;
}

}  // namespace ymap
