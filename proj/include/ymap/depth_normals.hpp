#pragma once

#include <functional>

#include "ymap/grid.hpp"

namespace ymap {

struct Gradients {
  ImageGrid gx;
  ImageGrid gy;
};

// 3x3 Sobel responses with edge replication. x grows to the right and y
// grows downward, so a depth ramp increasing to the right gives gx > 0.
// The kernels are unscaled (a unit-per-pixel ramp yields 8).
Gradients sobel_gradients(const ImageGrid& depth);

inline constexpr double kNormalEpsilon = 1e-6;

// n = (-gx, -gy, 1) / sqrt(gx^2 + gy^2 + 1 + epsilon), three channels.
ImageGrid normals_from_depth(const ImageGrid& depth, double epsilon = kNormalEpsilon);

struct RefineParams {
  int iterations = 35;
  double alpha = 0.01;
  // Pixels whose input depth is below this value (far) are left untouched.
  double far_mask_threshold = 0.05;
};

// Per-iteration statistics passed to the optional observer.
struct RefineStep {
  int iteration = 0;
  // Mean over all pixels of |N - n(D)| before the update.
  double mean_normal_error = 0.0;
};

// Normal-guided depth refinement. Each iteration takes the Sobel gradients
// of the current depth, forms the unit vector g = (-gx, -gy, 1) / M with
// M = sqrt(gx^2 + gy^2 + 1), and the mismatch d = N - g. The depth moves by
// alpha * (Sx^T d_x + Sy^T d_y + d_z) scaled so a matching surface is a
// fixed point: the x/y mismatch is pushed back through the Sobel stencils
// that produced the gradients (sign per the normal convention), d_z is added
// in place. Far pixels are frozen and the result is clamped to [0, 1].
ImageGrid refine_depth(const ImageGrid& depth, const ImageGrid& normals, const RefineParams& params,
                       const std::function<void(const RefineStep&)>& observer = {});

// Mean |N - n(depth)| over all pixels, using the refinement's gradient
// normalization (no epsilon).
double normal_consistency_error(const ImageGrid& depth, const ImageGrid& normals);

}  // namespace ymap
