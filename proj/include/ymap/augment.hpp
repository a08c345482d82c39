#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"
#include "ymap/coco.hpp"
#include "ymap/geometry.hpp"
#include "ymap/grid.hpp"

namespace ymap {

struct AugmentConfig {
  double p_panzoom = 0.45;
  double zoom_max = 1.10;
  double p_brightness = 0.50;
  double per_channel_split = 0.5;
  double max_channel_delta = 0.20;
  double p_gauss = 0.15;
  double gauss_sigma = 0.02;
  double p_burn = 0.50;
  int max_burned = 10;
  double p_noise_replace_no_person = 0.01;
  double min_joint_visible_fraction = 0.30;
  int panzoom_attempts = 10;
  std::uint64_t rng_seed = 0;

  // All probabilities in [0, 1], zoom_max >= 1; throws ValueError.
  void validate() const;
  static AugmentConfig none();
  static AugmentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Image plus everything that must move with it. Optional maps are carried
// through the same geometric transform.
struct AugmentSample {
  ImageGrid rgb;  // 3 channels in [0, 1]
  std::vector<SkeletonAnnotation> people;
  std::optional<ImageGrid> depth;    // 1 channel
  std::optional<ImageGrid> normals;  // 3 channels, re-derived from depth after zoom
  std::optional<ImageGrid> masks;    // any channel count, nearest resampling

  bool has_person() const;
};

struct BurnedPixel {
  int x = 0;
  int y = 0;
  float value = 0.0f;
};

// Which operations fired and with what parameters.
struct AppliedOps {
  bool pan_zoom = false;
  bool pan_zoom_skipped = false;  // drawn, but no draw kept enough joints visible
  int pan_zoom_attempts = 0;
  double zoom = 1.0;
  ScaleOffset transform;

  bool brightness = false;
  bool per_channel = false;
  std::array<double, 3> gain{1.0, 1.0, 1.0};
  std::array<double, 3> bias{0.0, 0.0, 0.0};

  bool gaussian = false;
  double sigma = 0.0;

  bool burn = false;
  std::vector<BurnedPixel> burned;

  bool noise_replace = false;

  bool empty() const {
    return !pan_zoom && !pan_zoom_skipped && !brightness && !gaussian && !burn && !noise_replace;
  }
  nlohmann::json to_json() const;
};

struct AugmentResult {
  AugmentSample sample;
  AppliedOps ops;
};

// Deterministic in (sample, config including rng_seed). Each operation is
// activated independently with its probability, drawn up front in the order
// pan&zoom, brightness, gaussian, burn, noise replacement.
AugmentResult augment(const AugmentSample& sample, const AugmentConfig& config);

// Fraction of annotated joints of each person that land inside the
// frame x frame image after `transform` (1.0 for people without joints).
std::vector<double> check_joint_visibility(std::span<const SkeletonAnnotation> people,
                                           const ScaleOffset& transform, int frame = kFrameSize);

// Per-sample seed: splitmix64(master ^ splitmix64(index)).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Portable uniform/normal draws over a standard 64-bit Mersenne Twister;
// results do not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi);  // inclusive
  bool bernoulli(double p) { return uniform() < p; }
  double normal();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace ymap
