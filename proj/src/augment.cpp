#include "ymap/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ymap/depth_normals.hpp"
#include "ymap/error.hpp"

namespace ymap {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool inside_frame(Point2 p, int frame) {
  return p.x >= 0.0 && p.y >= 0.0 && p.x <= frame - 1 && p.y <= frame - 1;
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValueError(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int Rng::uniform_int(int lo, int hi) {
  const double span = static_cast<double>(hi) - lo + 1.0;
  return lo + std::min(static_cast<int>(uniform() * span), hi - lo);
}

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

void AugmentConfig::validate() const {
  check_probability(p_panzoom, "p_panzoom");
  check_probability(p_brightness, "p_brightness");
  check_probability(per_channel_split, "per_channel_split");
  check_probability(p_gauss, "p_gauss");
  check_probability(p_burn, "p_burn");
  check_probability(p_noise_replace_no_person, "p_noise_replace_no_person");
  check_probability(min_joint_visible_fraction, "min_joint_visible_fraction");
  if (!(zoom_max >= 1.0)) throw ValueError("zoom_max must be at least 1");
  if (!(max_channel_delta >= 0.0)) throw ValueError("max_channel_delta must be non-negative");
  if (!(gauss_sigma >= 0.0)) throw ValueError("gauss_sigma must be non-negative");
  if (max_burned < 0) throw ValueError("max_burned must be non-negative");
  if (panzoom_attempts < 1) throw ValueError("panzoom_attempts must be at least 1");
}

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.p_panzoom = c.p_brightness = c.p_gauss = c.p_burn = c.p_noise_replace_no_person = 0.0;
  return c;
}

AugmentConfig AugmentConfig::from_json(const nlohmann::json& j) {
  AugmentConfig c;
  c.p_panzoom = j.value("p_panzoom", c.p_panzoom);
  c.zoom_max = j.value("zoom_max", c.zoom_max);
  c.p_brightness = j.value("p_brightness", c.p_brightness);
  c.per_channel_split = j.value("per_channel_split", c.per_channel_split);
  c.max_channel_delta = j.value("max_channel_delta", c.max_channel_delta);
  c.p_gauss = j.value("p_gauss", c.p_gauss);
  c.gauss_sigma = j.value("gauss_sigma", c.gauss_sigma);
  c.p_burn = j.value("p_burn", c.p_burn);
  c.max_burned = j.value("max_burned", c.max_burned);
  c.p_noise_replace_no_person = j.value("p_noise_replace_no_person", c.p_noise_replace_no_person);
  c.min_joint_visible_fraction =
      j.value("min_joint_visible_fraction", c.min_joint_visible_fraction);
  c.panzoom_attempts = j.value("panzoom_attempts", c.panzoom_attempts);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.validate();
  return c;
}

nlohmann::json AugmentConfig::to_json() const {
  return {{"p_panzoom", p_panzoom},
          {"zoom_max", zoom_max},
          {"p_brightness", p_brightness},
          {"per_channel_split", per_channel_split},
          {"max_channel_delta", max_channel_delta},
          {"p_gauss", p_gauss},
          {"gauss_sigma", gauss_sigma},
          {"p_burn", p_burn},
          {"max_burned", max_burned},
          {"p_noise_replace_no_person", p_noise_replace_no_person},
          {"min_joint_visible_fraction", min_joint_visible_fraction},
          {"panzoom_attempts", panzoom_attempts},
          {"rng_seed", rng_seed}};
}

nlohmann::json AppliedOps::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  if (pan_zoom || pan_zoom_skipped) {
    j["pan_zoom"] = {{"applied", pan_zoom},
                     {"attempts", pan_zoom_attempts},
                     {"zoom", zoom},
                     {"scale", transform.scale},
                     {"offset", {transform.offset_x, transform.offset_y}}};
  }
  if (brightness) {
    j["brightness"] = {{"per_channel", per_channel}, {"gain", gain}, {"bias", bias}};
  }
  if (gaussian) j["gaussian"] = {{"sigma", sigma}};
  if (burn) {
    nlohmann::json px = nlohmann::json::array();
    for (const BurnedPixel& b : burned) px.push_back({b.x, b.y, b.value});
    j["burn"] = {{"pixels", px}};
  }
  if (noise_replace) j["noise_replace"] = true;
  return j;
}

bool AugmentSample::has_person() const {
  return std::any_of(people.begin(), people.end(),
                     [](const SkeletonAnnotation& p) { return p.annotated_count() > 0; });
}

std::vector<double> check_joint_visibility(std::span<const SkeletonAnnotation> people,
                                           const ScaleOffset& transform, int frame) {
  std::vector<double> out;
  out.reserve(people.size());
  for (const SkeletonAnnotation& person : people) {
    int annotated = 0;
    int visible = 0;
    for (const Joint& j : person.joints) {
      if (!j.annotated()) continue;
      ++annotated;
      if (inside_frame(transform.apply({j.x, j.y}), frame)) ++visible;
    }
    out.push_back(annotated == 0 ? 1.0 : static_cast<double>(visible) / annotated);
  }
  return out;
}

namespace {

void renormalize(ImageGrid& normals) {
  auto nx = normals.plane(0);
  auto ny = normals.plane(1);
  auto nz = normals.plane(2);
  for (std::size_t i = 0; i < nx.size(); ++i) {
    const double n = std::sqrt(static_cast<double>(nx[i]) * nx[i] +
                               static_cast<double>(ny[i]) * ny[i] +
                               static_cast<double>(nz[i]) * nz[i]);
    if (n > 0.0) {
      nx[i] = static_cast<float>(nx[i] / n);
      ny[i] = static_cast<float>(ny[i] / n);
      nz[i] = static_cast<float>(nz[i] / n);
    } else {
      nz[i] = 1.0f;
    }
  }
}

void apply_geometry(AugmentSample& s, const ScaleOffset& t) {
  const int h = s.rgb.height();
  const int w = s.rgb.width();
  s.rgb = warp(s.rgb, t, h, w, Interpolation::bilinear);
  if (s.depth) s.depth = warp(*s.depth, t, h, w, Interpolation::bilinear);
  if (s.masks) s.masks = warp(*s.masks, t, h, w, Interpolation::nearest);
  if (s.normals) {
    if (s.depth && h >= 3 && w >= 3) {
      s.normals = normals_from_depth(*s.depth);
    } else {
      s.normals = warp(*s.normals, t, h, w, Interpolation::bilinear);
      renormalize(*s.normals);
    }
  }
  const int frame = std::min(h, w);
  for (SkeletonAnnotation& person : s.people) {
    for (Joint& j : person.joints) {
      if (!j.annotated()) continue;
      const Point2 p = t.apply({j.x, j.y});
      j.x = p.x;
      j.y = p.y;
      if (!inside_frame(p, frame)) j.visibility = Visibility::absent;
    }
  }
}

}  // namespace

AugmentResult augment(const AugmentSample& sample, const AugmentConfig& config) {
  config.validate();
  if (sample.rgb.channels() != 3) throw ShapeError("augmentation expects a 3-channel image");
  Rng rng(config.rng_seed);
  const bool do_panzoom = rng.bernoulli(config.p_panzoom);
  const bool do_brightness = rng.bernoulli(config.p_brightness);
  const bool do_gauss = rng.bernoulli(config.p_gauss);
  const bool do_burn = rng.bernoulli(config.p_burn);
  const bool do_noise = rng.bernoulli(config.p_noise_replace_no_person);

  AugmentResult result{sample, {}};
  AugmentSample& out = result.sample;
  AppliedOps& ops = result.ops;
  const int h = sample.rgb.height();
  const int w = sample.rgb.width();
  const int frame = std::min(h, w);

  if (do_panzoom) {
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;
    for (int attempt = 1; attempt <= config.panzoom_attempts; ++attempt) {
      const double zoom = rng.uniform(1.0, config.zoom_max);
      // Source window of size w / zoom stays inside the image.
      const double max_pan_x = (w / 2.0) * (1.0 - 1.0 / zoom);
      const double max_pan_y = (h / 2.0) * (1.0 - 1.0 / zoom);
      const double center_x = cx + rng.uniform(-max_pan_x, max_pan_x);
      const double center_y = cy + rng.uniform(-max_pan_y, max_pan_y);
      const ScaleOffset t{zoom, cx - zoom * center_x, cy - zoom * center_y};
      ops.pan_zoom_attempts = attempt;
      const auto fractions = check_joint_visibility(sample.people, t, frame);
      const bool ok = std::all_of(fractions.begin(), fractions.end(), [&](double f) {
        return f >= config.min_joint_visible_fraction;
      });
      if (ok) {
        ops.pan_zoom = true;
        ops.zoom = zoom;
        ops.transform = t;
        break;
      }
    }
    if (ops.pan_zoom) {
      apply_geometry(out, ops.transform);
    } else {
      ops.pan_zoom_skipped = true;
    }
  }

  if (do_brightness) {
    ops.brightness = true;
    ops.per_channel = rng.bernoulli(config.per_channel_split);
    const double d = config.max_channel_delta;
    for (int c = 0; c < 3; ++c) {
      if (c == 0 || ops.per_channel) {
        ops.gain[c] = rng.uniform(1.0 - d, 1.0 + d);
        ops.bias[c] = rng.uniform(-d, d);
      } else {
        ops.gain[c] = ops.gain[0];
        ops.bias[c] = ops.bias[0];
      }
      for (float& v : out.rgb.plane(c)) {
        v = static_cast<float>(std::clamp(ops.gain[c] * v + ops.bias[c], 0.0, 1.0));
      }
    }
  }

  if (do_gauss) {
    ops.gaussian = true;
    ops.sigma = config.gauss_sigma;
    for (float& v : out.rgb.data()) {
      v = static_cast<float>(std::clamp(v + config.gauss_sigma * rng.normal(), 0.0, 1.0));
    }
  }

  if (do_burn && config.max_burned > 0) {
    ops.burn = true;
    const int count = rng.uniform_int(1, config.max_burned);
    for (int i = 0; i < count; ++i) {
      BurnedPixel b;
      b.x = rng.uniform_int(0, w - 1);
      b.y = rng.uniform_int(0, h - 1);
      b.value = rng.bernoulli(0.5) ? 1.0f : 0.0f;
      for (int c = 0; c < 3; ++c) out.rgb.at(c, b.y, b.x) = b.value;
      ops.burned.push_back(b);
    }
  }

  if (do_noise && !sample.has_person()) {
    ops.noise_replace = true;
    for (float& v : out.rgb.data()) v = static_cast<float>(rng.uniform());
  }
  return result;
}

}  // namespace ymap
