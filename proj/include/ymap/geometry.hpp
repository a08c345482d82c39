#pragma once

#include "ymap/grid.hpp"

namespace ymap {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

// Axis-aligned similarity without rotation: p' = scale * p + offset.
// Letterboxing and pan & zoom are both of this form.
struct ScaleOffset {
  double scale = 1.0;
  double offset_x = 0.0;
  double offset_y = 0.0;

  Point2 apply(Point2 p) const { return {scale * p.x + offset_x, scale * p.y + offset_y}; }
  Point2 invert(Point2 p) const { return {(p.x - offset_x) / scale, (p.y - offset_y) / scale}; }
  // Transform that applies `this` first, then `next`.
  ScaleOffset then(const ScaleOffset& next) const {
    return {scale * next.scale, next.scale * offset_x + next.offset_x,
            next.scale * offset_y + next.offset_y};
  }
  bool is_identity() const { return scale == 1.0 && offset_x == 0.0 && offset_y == 0.0; }
};

enum class Interpolation { nearest, bilinear };

// Resamples `src` into an out_h x out_w grid. Pixel (x, y) of the output
// takes the source value at transform.invert(x, y); pixel indices are sample
// positions. Samples falling outside [-0.5, size - 0.5) of the source are 0.
ImageGrid warp(const ImageGrid& src, const ScaleOffset& transform, int out_h, int out_w,
               Interpolation mode);

// Bilinear sample of one channel at continuous position, clamped to the grid.
float sample_bilinear(const ImageGrid& grid, int channel, double x, double y);

}  // namespace ymap
