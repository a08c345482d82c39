#include "ymap/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace ymap {

float sample_bilinear(const ImageGrid& grid, int channel, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(grid.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(grid.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, grid.width() - 1);
  const int y1 = std::min(y0 + 1, grid.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = grid.at(channel, y0, x0) * (1.0 - fx) + grid.at(channel, y0, x1) * fx;
  const double bottom = grid.at(channel, y1, x0) * (1.0 - fx) + grid.at(channel, y1, x1) * fx;
  return static_cast<float>(top * (1.0 - fy) + bottom * fy);
}

ImageGrid warp(const ImageGrid& src, const ScaleOffset& transform, int out_h, int out_w,
               Interpolation mode) {
  ImageGrid out(out_h, out_w, src.channels());
  const double max_x = src.width() - 0.5;
  const double max_y = src.height() - 0.5;
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const Point2 s = transform.invert({static_cast<double>(x), static_cast<double>(y)});
      if (s.x < -0.5 || s.y < -0.5 || s.x >= max_x || s.y >= max_y) continue;
      if (mode == Interpolation::nearest) {
        const int sx = std::clamp(static_cast<int>(std::lround(s.x)), 0, src.width() - 1);
        const int sy = std::clamp(static_cast<int>(std::lround(s.y)), 0, src.height() - 1);
        for (int c = 0; c < src.channels(); ++c) out.at(c, y, x) = src.at(c, sy, sx);
      } else {
        for (int c = 0; c < src.channels(); ++c) out.at(c, y, x) = sample_bilinear(src, c, s.x, s.y);
      }
    }
  }
  return out;
}

}  // namespace ymap
