#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. They are written per pixel from the definitions and share no code
// with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ymap/geometry.hpp"
#include "ymap/grid.hpp"

namespace oracle {

using ymap::ImageGrid;
using ymap::Point2;

// Crossing-number test with a horizontal ray towards +x.
inline bool point_in_polygon(const std::vector<Point2>& poly, double x, double y) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y > y) != (b.y > y)) {
      const double xint = (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x;
      if (x < xint) inside = !inside;
    }
  }
  return inside;
}

// Pixel (x, y) covers [x, x+1) x [y, y+1); it is set when its center is inside.
inline std::vector<std::uint8_t> polygon_mask(const std::vector<Point2>& poly, int h, int w) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m[y * w + x] = point_in_polygon(poly, x + 0.5, y + 0.5);
  }
  return m;
}

// Star-shaped random polygon around (cx, cy).
inline std::vector<Point2> random_polygon(std::mt19937_64& rng, double cx, double cy, double rmin,
                                          double rmax, int vertices) {
  std::uniform_real_distribution<double> r(rmin, rmax);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  std::vector<Point2> poly;
  for (int i = 0; i < vertices; ++i) {
    const double a = (i + 0.5 + jitter(rng)) * 2.0 * M_PI / vertices;
    const double rad = r(rng);
    poly.push_back({cx + rad * std::cos(a), cy + rad * std::sin(a)});
  }
  return poly;
}

// Truncated Gaussian of window `size` centered on a joint.
inline double gaussian(int size, double dx, double dy) {
  const double half = size / 2.0;
  if (!(std::abs(dx) < half && std::abs(dy) < half)) return 0.0;
  const double sigma = size / 4.0;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

// Band membership of pixel (x, y) for the limb a -> b.
inline bool in_band(double x, double y, Point2 a, Point2 b, int width) {
  const double half = width / 2.0;
  const double lx = b.x - a.x;
  const double ly = b.y - a.y;
  const double len2 = lx * lx + ly * ly;
  if (len2 < 1e-18) {
    return x - a.x >= -half - 1e-9 && x - a.x < half - 1e-9 && y - a.y >= -half - 1e-9 &&
           y - a.y < half - 1e-9;
  }
  const double len = std::sqrt(len2);
  // Projection length and signed perpendicular distance via 2D cross product.
  const double t = ((x - a.x) * lx + (y - a.y) * ly) / len;
  const double s = (lx * (y - a.y) - ly * (x - a.x)) / len;
  return t >= -1e-9 && t <= len + 1e-9 && s >= -half - 1e-9 && s < half - 1e-9;
}

inline double hdm_count(const std::vector<float>& truth, const std::vector<float>& pred, double T) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = std::fabs(static_cast<double>(truth[i]) - static_cast<double>(pred[i]));
    if (d <= T) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

// Sobel response at (x, y), neighbors clamped to the border.
inline void sobel_at(const std::vector<double>& d, int h, int w, int x, int y, double& gx,
                     double& gy) {
  auto at = [&](int yy, int xx) {
    yy = std::min(std::max(yy, 0), h - 1);
    xx = std::min(std::max(xx, 0), w - 1);
    return d[static_cast<std::size_t>(yy) * w + xx];
  };
  gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
       (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
  gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
       (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
}

// Scalar refinement loop in gather form. Each pixel collects the mismatch of
// every neighbor whose clamped stencil touches it, weighted by the stencil
// coefficient, so the update is the gradient of the squared normal mismatch
// with respect to the pixel's depth.
inline std::vector<double> refine(const std::vector<double>& depth, const std::vector<double>& nx,
                                  const std::vector<double>& ny, const std::vector<double>& nz,
                                  int h, int w, int iterations, double alpha, double far) {
  static const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  std::vector<double> d = depth;
  const std::size_t n = d.size();
  std::vector<double> ex(n), ey(n), ez(n);
  for (int it = 0; it < iterations; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double gx, gy;
        sobel_at(d, h, w, x, y, gx, gy);
        const double m = std::sqrt(gx * gx + gy * gy + 1.0);
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        ex[i] = nx[i] + gx / m;
        ey[i] = ny[i] + gy / m;
        ez[i] = nz[i] - 1.0 / m;
      }
    }
    std::vector<double> next = d;
    for (int py = 0; py < h; ++py) {
      for (int px = 0; px < w; ++px) {
        const std::size_t p = static_cast<std::size_t>(py) * w + px;
        if (depth[p] < far) continue;
        double acc = 0.0;
        for (int qy = std::max(0, py - 1); qy <= std::min(h - 1, py + 1); ++qy) {
          for (int qx = std::max(0, px - 1); qx <= std::min(w - 1, px + 1); ++qx) {
            const std::size_t q = static_cast<std::size_t>(qy) * w + qx;
            for (int oy = -1; oy <= 1; ++oy) {
              for (int ox = -1; ox <= 1; ++ox) {
                const int sy = std::min(std::max(qy + oy, 0), h - 1);
                const int sx = std::min(std::max(qx + ox, 0), w - 1);
                if (sy != py || sx != px) continue;
                acc += kx[oy + 1][ox + 1] * ex[q] + ky[oy + 1][ox + 1] * ey[q];
              }
            }
          }
        }
        next[p] = std::min(1.0, std::max(0.0, d[p] + alpha * (-acc + ez[p])));
      }
    }
    d = std::move(next);
  }
  return d;
}

// Closed-form parameter counts.
inline long long conv_params(int k, long long cin, long long cout) { return (k * k * cin + 1) * cout; }
inline long long dense_params(long long nin, long long nout) { return (nin + 1) * nout; }

}  // namespace oracle
