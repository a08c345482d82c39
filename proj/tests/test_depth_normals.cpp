#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "ymap/depth_normals.hpp"
#include "ymap/error.hpp"

using namespace ymap;

namespace {

ImageGrid ramp(int h, int w, double a, double b, double c) {
  ImageGrid d(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) d.at(0, y, x) = static_cast<float>(a * x + b * y + c);
  }
  return d;
}

double mean_abs(const ImageGrid& a, const ImageGrid& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.data()[i] - b.data()[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("Sobel gradients of a ramp") {
  const ImageGrid d = ramp(8, 9, 0.01, -0.02, 0.5);
  const Gradients g = sobel_gradients(d);
  CHECK(g.gx.at(0, 4, 4) == doctest::Approx(0.08).epsilon(1e-4));
  CHECK(g.gy.at(0, 4, 4) == doctest::Approx(-0.16).epsilon(1e-4));
  // Edge replication halves the response at the border.
  CHECK(g.gx.at(0, 4, 0) == doctest::Approx(0.04).epsilon(1e-4));
  CHECK_THROWS_AS(sobel_gradients(ImageGrid(2, 5, 1)), ShapeError);
  CHECK_THROWS_AS(sobel_gradients(ImageGrid(5, 5, 2)), ShapeError);
}

TEST_CASE("normals match the explicit formula and have unit length") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 24, w = 20;
    ImageGrid d(h, w, 1);
    const double a = u(rng), b = u(rng), fx = 0.3 * u(rng), fy = 0.3 * u(rng);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        d.at(0, y, x) = static_cast<float>(0.5 + 0.2 * a * std::sin(fx * x) + 0.2 * b * std::cos(fy * y));
      }
    }
    const ImageGrid n = normals_from_depth(d);
    std::vector<double> dv(d.data().begin(), d.data().end());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double gx, gy;
        oracle::sobel_at(dv, h, w, x, y, gx, gy);
        const double m = std::sqrt(gx * gx + gy * gy + 1.0 + kNormalEpsilon);
        CHECK(n.at(0, y, x) == doctest::Approx(-gx / m).epsilon(1e-5));
        CHECK(n.at(1, y, x) == doctest::Approx(-gy / m).epsilon(1e-5));
        CHECK(n.at(2, y, x) == doctest::Approx(1.0 / m).epsilon(1e-5));
        const double len = std::sqrt(n.at(0, y, x) * n.at(0, y, x) + n.at(1, y, x) * n.at(1, y, x) +
                                     n.at(2, y, x) * n.at(2, y, x));
        CHECK(std::abs(len - 1.0) < 1e-4);
      }
    }
  }
}

TEST_CASE("flat depth has upward normals") {
  const ImageGrid n = normals_from_depth(ImageGrid(5, 5, 1, 0.3f));
  CHECK(n.at(0, 2, 2) == 0.0f);
  CHECK(n.at(2, 2, 2) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("refinement leaves a consistent flat map bit-unchanged") {
  const ImageGrid d(32, 32, 1, 0.625f);
  ImageGrid n(32, 32, 3);
  for (float& v : n.plane(2)) v = 1.0f;
  const ImageGrid r = refine_depth(d, n, RefineParams{});
  CHECK(r == d);
}

TEST_CASE("refinement argument checks") {
  const ImageGrid d(8, 8, 1, 0.5f);
  ImageGrid n(8, 8, 3);
  for (float& v : n.plane(2)) v = 1.0f;
  CHECK(refine_depth(d, n, RefineParams{0, 0.01, 0.05}) == d);
  CHECK_THROWS_AS(refine_depth(d, n, RefineParams{-1, 0.01, 0.05}), ValueError);
  CHECK_THROWS_AS(refine_depth(d, n, RefineParams{3, 0.0, 0.05}), ValueError);
  CHECK_THROWS_AS(refine_depth(d, ImageGrid(8, 7, 3), RefineParams{}), ShapeError);
  CHECK_THROWS_AS(refine_depth(ImageGrid(2, 2, 1), ImageGrid(2, 2, 3), RefineParams{}), ShapeError);
  ImageGrid bad = d;
  bad.at(0, 1, 1) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(refine_depth(bad, n, RefineParams{}), ValueError);
}

TEST_CASE("refinement denoises a ramp and matches the scalar loop") {
  const int h = 32, w = 32;
  const ImageGrid truth = ramp(h, w, 0.004, 0.006, 0.3);
  const ImageGrid normals = normals_from_depth(truth);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.01);
  ImageGrid noisy = truth;
  for (float& v : noisy.data()) v = static_cast<float>(std::clamp(v + noise(rng), 0.0, 1.0));

  std::vector<double> steps;
  const RefineParams params{35, 0.01, 0.05};
  const ImageGrid refined =
      refine_depth(noisy, normals, params, [&](const RefineStep& s) { steps.push_back(s.mean_normal_error); });
  CHECK(steps.size() == 35);
  CHECK(mean_abs(refined, truth) < mean_abs(noisy, truth));
  CHECK(normal_consistency_error(refined, normals) < normal_consistency_error(noisy, normals));

  std::vector<double> dv(noisy.data().begin(), noisy.data().end());
  auto plane = [&](int c) {
    auto p = normals.plane(c);
    return std::vector<double>(p.begin(), p.end());
  };
  const auto ref = oracle::refine(dv, plane(0), plane(1), plane(2), h, w, 35, 0.01, 0.05);
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - refined.data()[i]));
  CHECK(worst < 1e-6);
}

TEST_CASE("far pixels stay frozen and values stay in range") {
  ImageGrid d = ramp(16, 16, 0.05, 0.0, 0.0);  // first column below the threshold
  ImageGrid n(16, 16, 3);
  for (float& v : n.plane(0)) v = 0.6f;
  for (float& v : n.plane(2)) v = 0.8f;
  const ImageGrid r = refine_depth(d, n, RefineParams{50, 0.05, 0.05});
  for (int y = 0; y < 16; ++y) CHECK(r.at(0, y, 0) == d.at(0, y, 0));
  for (float v : r.data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}
