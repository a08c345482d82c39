#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "ymap/augment.hpp"
#include "ymap/error.hpp"

using namespace ymap;

namespace {

AugmentSample textured_sample(bool with_person, int size = 64) {
  AugmentSample s;
  s.rgb = ImageGrid(size, size, 3);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) s.rgb.at(c, y, x) = static_cast<float>((x + 2 * y + 5 * c) % 17) / 16.0f;
    }
  }
  ImageGrid depth(size, size, 1);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) depth.at(0, y, x) = 0.3f + 0.004f * static_cast<float>(x + y);
  }
  s.depth = depth;
  if (with_person) s.people.push_back(fixture::upright_person(size / 2.0, size * 0.2, size * 0.6));
  return s;
}

}  // namespace

TEST_CASE("visibility counts joints that stay in frame") {
  SkeletonAnnotation p;
  for (int j = 0; j < kNumJoints; ++j) p.joints[j] = {10.0 * j, 100.0, Visibility::visible};
  const std::vector<SkeletonAnnotation> people = {p, SkeletonAnnotation{}};
  const auto f = check_joint_visibility(people, ScaleOffset{1.0, -60.0, 0.0});
  REQUIRE(f.size() == 2);
  CHECK(f[0] == doctest::Approx(11.0 / 17.0));
  CHECK(f[1] == 1.0);
  CHECK(check_joint_visibility(people, ScaleOffset{})[0] == 1.0);
  // Occluded joints count as annotated.
  p.joints[3].visibility = Visibility::occluded;
  p.joints[0].visibility = Visibility::absent;
  const std::vector<SkeletonAnnotation> one = {p};
  CHECK(check_joint_visibility(one, ScaleOffset{1.0, -60.0, 0.0})[0] == doctest::Approx(11.0 / 16.0));
}

TEST_CASE("disabled augmentation is the identity") {
  const AugmentSample s = textured_sample(true);
  const AugmentResult r = augment(s, AugmentConfig::none());
  CHECK(r.ops.empty());
  CHECK(r.ops.to_json().empty());
  CHECK(r.sample.rgb == s.rgb);
  CHECK(*r.sample.depth == *s.depth);
  CHECK(r.sample.people == s.people);
}

TEST_CASE("identical seeds give identical results") {
  const AugmentSample s = textured_sample(false);
  AugmentConfig c;
  c.p_panzoom = c.p_brightness = c.p_gauss = c.p_burn = 1.0;
  for (std::uint64_t seed : {1ull, 7ull, 12345ull}) {
    c.rng_seed = seed;
    const AugmentResult a = augment(s, c);
    const AugmentResult b = augment(s, c);
    CHECK(a.sample.rgb == b.sample.rgb);
    CHECK(a.ops.to_json() == b.ops.to_json());
  }
  c.rng_seed = 1;
  const AugmentResult a = augment(s, c);
  c.rng_seed = 2;
  CHECK_FALSE(augment(s, c).sample.rgb == a.sample.rgb);
}

TEST_CASE("pan and zoom stays within bounds and moves keypoints with the image") {
  AugmentConfig c = AugmentConfig::none();
  c.p_panzoom = 1.0;
  const AugmentSample s = textured_sample(true);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    c.rng_seed = seed;
    const AugmentResult r = augment(s, c);
    CHECK(r.ops.pan_zoom);
    CHECK(r.ops.zoom >= 1.0);
    CHECK(r.ops.zoom <= 1.10);
    const auto f = check_joint_visibility(s.people, r.ops.transform, 64);
    CHECK(f[0] >= 0.30);
    for (int j = 0; j < kNumJoints; ++j) {
      const Point2 q = r.ops.transform.apply({s.people[0].joints[j].x, s.people[0].joints[j].y});
      CHECK(r.sample.people[0].joints[j].x == doctest::Approx(q.x));
      CHECK(r.sample.people[0].joints[j].y == doctest::Approx(q.y));
    }
    REQUIRE(r.sample.normals.has_value() == false);
  }
}

TEST_CASE("pan and zoom is skipped when no draw keeps the person visible") {
  AugmentSample s = textured_sample(false);
  SkeletonAnnotation edge;
  edge.joints[0] = {0.0, 0.0, Visibility::visible};
  s.people.push_back(edge);
  AugmentConfig c = AugmentConfig::none();
  c.p_panzoom = 1.0;
  c.zoom_max = 1.10;
  int skipped = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    c.rng_seed = seed;
    const AugmentResult r = augment(s, c);
    if (r.ops.pan_zoom_skipped) {
      ++skipped;
      CHECK(r.ops.pan_zoom_attempts == c.panzoom_attempts);
      CHECK(r.sample.rgb == s.rgb);
    }
  }
  CHECK(skipped > 0);
}

TEST_CASE("burned pixels are bounded and extreme") {
  AugmentConfig c = AugmentConfig::none();
  c.p_burn = 1.0;
  const AugmentSample s = textured_sample(false);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    c.rng_seed = seed;
    const AugmentResult r = augment(s, c);
    CHECK(r.ops.burned.size() >= 1);
    CHECK(r.ops.burned.size() <= 10);
    for (const BurnedPixel& b : r.ops.burned) {
      CHECK((b.value == 0.0f || b.value == 1.0f));
    }
    // The last write to each burned pixel wins.
    const BurnedPixel& last = r.ops.burned.back();
    CHECK(r.sample.rgb.at(1, last.y, last.x) == last.value);
  }
}

TEST_CASE("brightness gains stay within the delta") {
  AugmentConfig c = AugmentConfig::none();
  c.p_brightness = 1.0;
  const AugmentSample s = textured_sample(false);
  int per_channel = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    c.rng_seed = seed;
    const AugmentResult r = augment(s, c);
    for (int ch = 0; ch < 3; ++ch) {
      CHECK(std::abs(r.ops.gain[ch] - 1.0) <= 0.2);
      CHECK(std::abs(r.ops.bias[ch]) <= 0.2);
    }
    if (r.ops.per_channel) {
      ++per_channel;
    } else {
      CHECK(r.ops.gain[1] == r.ops.gain[0]);
      CHECK(r.ops.bias[2] == r.ops.bias[0]);
    }
    for (float v : r.sample.rgb.data()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  CHECK(per_channel > 25);
  CHECK(per_channel < 75);
}

TEST_CASE("noise replacement only without people") {
  AugmentConfig c = AugmentConfig::none();
  c.p_noise_replace_no_person = 1.0;
  const AugmentResult empty = augment(textured_sample(false), c);
  CHECK(empty.ops.noise_replace);
  CHECK_FALSE(empty.sample.rgb == textured_sample(false).rgb);
  CHECK_FALSE(augment(textured_sample(true), c).ops.noise_replace);
}

TEST_CASE("geometry carries depth and re-derives normals") {
  AugmentSample s = textured_sample(false);
  s.normals = ImageGrid(64, 64, 3);
  s.masks = ImageGrid(64, 64, 2);
  s.masks->at(1, 32, 32) = 1.0f;
  AugmentConfig c = AugmentConfig::none();
  c.p_panzoom = 1.0;
  c.rng_seed = 4;
  const AugmentResult r = augment(s, c);
  REQUIRE(r.ops.pan_zoom);
  for (float v : r.sample.masks->data()) CHECK((v == 0.0f || v == 1.0f));
  const ImageGrid& n = *r.sample.normals;
  for (int y = 0; y < 64; y += 7) {
    for (int x = 0; x < 64; x += 7) {
      const double len = std::hypot(n.at(0, y, x), n.at(1, y, x), n.at(2, y, x));
      CHECK(len == doctest::Approx(1.0).epsilon(1e-4));
    }
  }
}

TEST_CASE("config validation and JSON") {
  AugmentConfig c;
  CHECK_NOTHROW(c.validate());
  const AugmentConfig back = AugmentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  c.p_burn = 1.5;
  CHECK_THROWS_AS(c.validate(), ValueError);
  c = AugmentConfig{};
  c.zoom_max = 0.9;
  CHECK_THROWS_AS(c.validate(), ValueError);
  CHECK_THROWS_AS(AugmentConfig::from_json({{"max_burned", -1}}), ValueError);
  CHECK(AugmentConfig::from_json({{"p_gauss", 0.3}}).p_gauss == 0.3);
  CHECK_THROWS_AS(augment(AugmentSample{ImageGrid(4, 4, 1), {}, {}, {}, {}}, AugmentConfig{}), ShapeError);
}

TEST_CASE("derived seeds differ per index") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(5, 9) == derive_seed(5, 9));
  Rng a(3), b(3);
  for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
  Rng r(8);
  for (int i = 0; i < 1000; ++i) {
    const int k = r.uniform_int(1, 10);
    CHECK(k >= 1);
    CHECK(k <= 10);
  }
}
