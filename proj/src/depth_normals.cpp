#include "ymap/depth_normals.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ymap/error.hpp"

namespace ymap {

namespace {

constexpr int kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
constexpr int kSobelY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

void require_sobel_size(int height, int width) {
  if (height < 3 || width < 3) {
    throw ShapeError("Sobel filtering needs at least 3x3 pixels, got " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
}

// Double-precision plane used by the refinement loop.
struct Plane {
  int height;
  int width;
  std::vector<double> v;

  double& operator()(int y, int x) { return v[static_cast<std::size_t>(y) * width + x]; }
  double operator()(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

void sobel(const Plane& d, Plane& gx, Plane& gy) {
  const int h = d.height;
  const int w = d.width;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sx = 0.0;
      double sy = 0.0;
      for (int oy = -1; oy <= 1; ++oy) {
        const int yy = std::clamp(y + oy, 0, h - 1);
        for (int ox = -1; ox <= 1; ++ox) {
          const int xx = std::clamp(x + ox, 0, w - 1);
          const double value = d(yy, xx);
          sx += kSobelX[oy + 1][ox + 1] * value;
          sy += kSobelY[oy + 1][ox + 1] * value;
        }
      }
      gx(y, x) = sx;
      gy(y, x) = sy;
    }
  }
}

// Adds the transpose of the edge-replicated Sobel operators applied to
// (vx, vy), scaled by `scale`, into `out`.
void add_sobel_transpose(const Plane& vx, const Plane& vy, double scale, Plane& out) {
  const int h = vx.height;
  const int w = vx.width;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double ax = vx(y, x) * scale;
      const double ay = vy(y, x) * scale;
      if (ax == 0.0 && ay == 0.0) continue;
      for (int oy = -1; oy <= 1; ++oy) {
        const int yy = std::clamp(y + oy, 0, h - 1);
        for (int ox = -1; ox <= 1; ++ox) {
          const int xx = std::clamp(x + ox, 0, w - 1);
          out(yy, xx) += kSobelX[oy + 1][ox + 1] * ax + kSobelY[oy + 1][ox + 1] * ay;
        }
      }
    }
  }
}

Plane to_plane(const ImageGrid& grid, int channel) {
  Plane p{grid.height(), grid.width(), {}};
  auto src = grid.plane(channel);
  p.v.assign(src.begin(), src.end());
  return p;
}

}  // namespace

Gradients sobel_gradients(const ImageGrid& depth) {
  if (depth.channels() != 1) throw ShapeError("Sobel gradients expect a single-channel grid");
  require_sobel_size(depth.height(), depth.width());
  const Plane d = to_plane(depth, 0);
  Plane gx{d.height, d.width, std::vector<double>(d.v.size())};
  Plane gy = gx;
  sobel(d, gx, gy);
  Gradients out{ImageGrid(d.height, d.width, 1), ImageGrid(d.height, d.width, 1)};
  for (std::size_t i = 0; i < d.v.size(); ++i) {
    out.gx.data()[i] = static_cast<float>(gx.v[i]);
    out.gy.data()[i] = static_cast<float>(gy.v[i]);
  }
  return out;
}

ImageGrid normals_from_depth(const ImageGrid& depth, double epsilon) {
  if (depth.channels() != 1) throw ShapeError("normals need a single-channel depth grid");
  require_sobel_size(depth.height(), depth.width());
  const Plane d = to_plane(depth, 0);
  Plane gx{d.height, d.width, std::vector<double>(d.v.size())};
  Plane gy = gx;
  sobel(d, gx, gy);
  ImageGrid out(d.height, d.width, 3);
  auto nx = out.plane(0);
  auto ny = out.plane(1);
  auto nz = out.plane(2);
  for (std::size_t i = 0; i < d.v.size(); ++i) {
    const double inv = 1.0 / std::sqrt(gx.v[i] * gx.v[i] + gy.v[i] * gy.v[i] + 1.0 + epsilon);
    nx[i] = static_cast<float>(-gx.v[i] * inv);
    ny[i] = static_cast<float>(-gy.v[i] * inv);
    nz[i] = static_cast<float>(inv);
  }
  return out;
}

namespace {

void check_refine_inputs(const ImageGrid& depth, const ImageGrid& normals) {
  if (depth.channels() != 1) throw ShapeError("refine_depth expects a single-channel depth grid");
  if (normals.channels() != 3 || normals.height() != depth.height() ||
      normals.width() != depth.width()) {
    throw ShapeError("normals must be 3 channels matching the depth grid size");
  }
  require_sobel_size(depth.height(), depth.width());
  for (float v : depth.data()) {
    if (!std::isfinite(v)) throw ValueError("depth contains non-finite values");
  }
  for (float v : normals.data()) {
    if (!std::isfinite(v)) throw ValueError("normals contain non-finite values");
  }
}

// Mismatch fields d = N - g for the current depth; returns mean |d|.
double mismatch(const Plane& d, const ImageGrid& normals, Plane& gx, Plane& gy, Plane& dx,
                Plane& dy, Plane& dz) {
  sobel(d, gx, gy);
  auto nx = normals.plane(0);
  auto ny = normals.plane(1);
  auto nz = normals.plane(2);
  double total = 0.0;
  for (std::size_t i = 0; i < d.v.size(); ++i) {
    const double m = std::sqrt(gx.v[i] * gx.v[i] + gy.v[i] * gy.v[i] + 1.0);
    dx.v[i] = nx[i] - (-gx.v[i] / m);
    dy.v[i] = ny[i] - (-gy.v[i] / m);
    dz.v[i] = nz[i] - 1.0 / m;
    total += std::sqrt(dx.v[i] * dx.v[i] + dy.v[i] * dy.v[i] + dz.v[i] * dz.v[i]);
  }
  return total / static_cast<double>(d.v.size());
}

}  // namespace

double normal_consistency_error(const ImageGrid& depth, const ImageGrid& normals) {
  check_refine_inputs(depth, normals);
  const Plane d = to_plane(depth, 0);
  Plane scratch{d.height, d.width, std::vector<double>(d.v.size())};
  Plane gx = scratch, gy = scratch, dx = scratch, dy = scratch, dz = scratch;
  return mismatch(d, normals, gx, gy, dx, dy, dz);
}

ImageGrid refine_depth(const ImageGrid& depth, const ImageGrid& normals, const RefineParams& params,
                       const std::function<void(const RefineStep&)>& observer) {
  if (params.iterations < 0) throw ValueError("iterations must be non-negative");
  if (!(params.alpha > 0.0)) throw ValueError("alpha must be positive");
  check_refine_inputs(depth, normals);
  if (params.iterations == 0) return depth;

  Plane d = to_plane(depth, 0);
  const std::size_t n = d.v.size();
  std::vector<char> active(n);
  for (std::size_t i = 0; i < n; ++i) active[i] = d.v[i] >= params.far_mask_threshold;

  Plane scratch{d.height, d.width, std::vector<double>(n)};
  Plane gx = scratch, gy = scratch, dx = scratch, dy = scratch, dz = scratch, step = scratch;
  for (int it = 0; it < params.iterations; ++it) {
    const double err = mismatch(d, normals, gx, gy, dx, dy, dz);
    if (observer) observer({it, err});
    std::fill(step.v.begin(), step.v.end(), 0.0);
    add_sobel_transpose(dx, dy, -1.0, step);
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      d.v[i] = std::clamp(d.v[i] + params.alpha * (step.v[i] + dz.v[i]), 0.0, 1.0);
    }
  }

  ImageGrid out = depth;
  auto dst = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    if (active[i]) dst[i] = static_cast<float>(d.v[i]);
  }
  return out;
}

}  // namespace ymap
