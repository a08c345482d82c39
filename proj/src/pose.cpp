#include "ymap/pose.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "ymap/error.hpp"
#include "ymap/geometry.hpp"

namespace ymap {

int Skeleton::joint_count() const {
  return static_cast<int>(std::count_if(joints.begin(), joints.end(),
                                        [](const auto& j) { return j.has_value(); }));
}

namespace {

double quadratic_offset(double left, double center, double right) {
  const double denom = left - 2.0 * center + right;
  if (denom >= 0.0) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

bool keypoint_before(const Keypoint& a, const Keypoint& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.x != b.x) return a.x < b.x;
  return a.y < b.y;
}

}  // namespace

std::vector<Keypoint> extract_peaks(const ImageGrid& heatmaps, int channel, float threshold,
                                    int joint) {
  std::vector<Keypoint> peaks;
  const int h = heatmaps.height();
  const int w = heatmaps.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = heatmaps.at(channel, y, x);
      if (v < threshold || v <= 0.0f) continue;
      bool is_peak = true;
      for (int oy = -1; oy <= 1 && is_peak; ++oy) {
        for (int ox = -1; ox <= 1; ++ox) {
          if (ox == 0 && oy == 0) continue;
          const int yy = y + oy;
          const int xx = x + ox;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          const float n = heatmaps.at(channel, yy, xx);
          const bool earlier = oy < 0 || (oy == 0 && ox < 0);
          if (n > v || (earlier && n == v)) {
            is_peak = false;
            break;
          }
        }
      }
      if (!is_peak) continue;
      double px = x;
      double py = y;
      if (x > 0 && x < w - 1) {
        px += quadratic_offset(heatmaps.at(channel, y, x - 1), v, heatmaps.at(channel, y, x + 1));
      }
      if (y > 0 && y < h - 1) {
        py += quadratic_offset(heatmaps.at(channel, y - 1, x), v, heatmaps.at(channel, y + 1, x));
      }
      peaks.push_back({joint, px, py, v});
    }
  }
  std::sort(peaks.begin(), peaks.end(), keypoint_before);
  return peaks;
}

double score_limb(const ImageGrid& pafs, int channel, const Keypoint& a, const Keypoint& b,
                  int samples) {
  if (samples < 2) throw ValueError("score_limb needs at least 2 samples");
  if (a.x == b.x && a.y == b.y) return sample_bilinear(pafs, channel, a.x, a.y);
  double total = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) / (samples - 1);
    total += sample_bilinear(pafs, channel, a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
  }
  return total / samples;
}

namespace {

struct Candidate {
  double score;
  int limb;
  int a;  // index into peaks[limb.from]
  int b;  // index into peaks[limb.to]
};

class Components {
 public:
  explicit Components(std::size_t n) : parent_(n), mask_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }
  void set_mask(std::size_t i, std::uint32_t m) { mask_[i] = m; }
  std::uint32_t mask(std::size_t i) { return mask_[find(i)]; }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    mask_[a] |= mask_[b];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::uint32_t> mask_;
};

}  // namespace

std::vector<Skeleton> assemble_skeletons(const PeakLists& peaks, const ImageGrid& pafs,
                                         const LimbTable& limbs,
                                         const DecodeThresholds& thresholds) {
  if (pafs.channels() < kNumLimbs) throw ShapeError("PAF grid must hold 12 limb channels");

  // Flatten peaks into node ids.
  std::array<std::size_t, kNumJoints> base{};
  std::size_t total = 0;
  for (int j = 0; j < kNumJoints; ++j) {
    base[j] = total;
    total += peaks[j].size();
  }
  if (total == 0) return {};
  Components comps(total);
  for (int j = 0; j < kNumJoints; ++j) {
    for (std::size_t i = 0; i < peaks[j].size(); ++i) comps.set_mask(base[j] + i, 1u << j);
  }

  std::vector<Candidate> candidates;
  for (int l = 0; l < kNumLimbs; ++l) {
    const auto& from = peaks[limbs[l].from];
    const auto& to = peaks[limbs[l].to];
    for (std::size_t a = 0; a < from.size(); ++a) {
      for (std::size_t b = 0; b < to.size(); ++b) {
        const double s = score_limb(pafs, l, from[a], to[b], thresholds.samples);
        if (s >= thresholds.limb) {
          candidates.push_back({s, l, static_cast<int>(a), static_cast<int>(b)});
        }
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& p, const Candidate& q) {
    if (p.score != q.score) return p.score > q.score;
    if (p.limb != q.limb) return p.limb < q.limb;
    const Keypoint& pa = peaks[limbs[p.limb].from][p.a];
    const Keypoint& qa = peaks[limbs[q.limb].from][q.a];
    const Keypoint& pb = peaks[limbs[p.limb].to][p.b];
    const Keypoint& qb = peaks[limbs[q.limb].to][q.b];
    return std::tie(pa.x, pa.y, pb.x, pb.y) < std::tie(qa.x, qa.y, qb.x, qb.y);
  });

  std::vector<std::vector<char>> used_from(kNumLimbs);
  std::vector<std::vector<char>> used_to(kNumLimbs);
  for (int l = 0; l < kNumLimbs; ++l) {
    used_from[l].assign(peaks[limbs[l].from].size(), 0);
    used_to[l].assign(peaks[limbs[l].to].size(), 0);
  }
  std::vector<char> linked(total, 0);
  std::vector<double> limb_score_sum(total, 0.0);
  std::vector<int> limb_count(total, 0);
  for (const Candidate& c : candidates) {
    if (used_from[c.limb][c.a] || used_to[c.limb][c.b]) continue;
    const std::size_t na = base[limbs[c.limb].from] + c.a;
    const std::size_t nb = base[limbs[c.limb].to] + c.b;
    const std::size_t ra = comps.find(na);
    const std::size_t rb = comps.find(nb);
    if (ra != rb && (comps.mask(na) & comps.mask(nb)) != 0) continue;
    used_from[c.limb][c.a] = 1;
    used_to[c.limb][c.b] = 1;
    comps.unite(na, nb);
    linked[na] = linked[nb] = 1;
    limb_score_sum[na] += c.score;
    limb_count[na] += 1;
  }

  // Group linked nodes by component root, in root order.
  std::vector<std::size_t> roots;
  std::vector<int> slot(total, -1);
  std::vector<Skeleton> skeletons;
  std::vector<double> score_sum;
  std::vector<int> score_terms;
  for (int j = 0; j < kNumJoints; ++j) {
    for (std::size_t i = 0; i < peaks[j].size(); ++i) {
      const std::size_t node = base[j] + i;
      if (!linked[node]) continue;
      const std::size_t root = comps.find(node);
      if (slot[root] < 0) {
        slot[root] = static_cast<int>(skeletons.size());
        skeletons.emplace_back();
        score_sum.push_back(0.0);
        score_terms.push_back(0);
      }
      const int s = slot[root];
      skeletons[s].joints[j] = peaks[j][i];
      score_sum[s] += peaks[j][i].score + limb_score_sum[node];
      score_terms[s] += 1 + limb_count[node];
    }
  }

  // Attach joint types that no limb covers.
  std::array<bool, kNumJoints> covered{};
  for (const Limb& l : limbs) covered[l.from] = covered[l.to] = true;
  for (int j = 0; j < kNumJoints; ++j) {
    if (covered[j]) continue;
    for (const Keypoint& kp : peaks[j]) {
      int best = -1;
      double best_dist = 0.0;
      for (std::size_t s = 0; s < skeletons.size(); ++s) {
        if (skeletons[s].joints[j]) continue;
        double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
        double nearest = 1e300;
        for (const auto& other : skeletons[s].joints) {
          if (!other) continue;
          min_x = std::min(min_x, other->x);
          max_x = std::max(max_x, other->x);
          min_y = std::min(min_y, other->y);
          max_y = std::max(max_y, other->y);
          nearest = std::min(nearest, std::hypot(other->x - kp.x, other->y - kp.y));
        }
        const double extent = std::max(max_x - min_x, max_y - min_y);
        const double radius =
            std::max(thresholds.orphan_min_radius, thresholds.orphan_radius_scale * extent);
        if (nearest <= radius && (best < 0 || nearest < best_dist)) {
          best = static_cast<int>(s);
          best_dist = nearest;
        }
      }
      if (best >= 0) {
        skeletons[best].joints[j] = kp;
        score_sum[best] += kp.score;
        score_terms[best] += 1;
      }
    }
  }

  for (std::size_t s = 0; s < skeletons.size(); ++s) {
    skeletons[s].score = score_sum[s] / std::max(1, score_terms[s]);
  }
  auto leftmost = [](const Skeleton& sk) {
    double x = 1e300;
    for (const auto& j : sk.joints) {
      if (j) x = std::min(x, j->x);
    }
    return x;
  };
  std::stable_sort(skeletons.begin(), skeletons.end(), [&](const Skeleton& a, const Skeleton& b) {
    if (a.score != b.score) return a.score > b.score;
    return leftmost(a) < leftmost(b);
  });
  return skeletons;
}

std::vector<Skeleton> decode_pose(const ImageGrid& stack_images,
                                  const DecodeThresholds& thresholds, const LimbTable& limbs) {
  if (stack_images.channels() < channels::kPafsBegin + kNumLimbs) {
    throw ShapeError("pose decoding needs joint and PAF channels 0..28");
  }
  PeakLists peaks;
  for (int j = 0; j < kNumJoints; ++j) {
    peaks[j] = extract_peaks(stack_images, channels::kJointsBegin + j, thresholds.peak, j);
  }
  const ImageGrid pafs = stack_images.channels_slice(channels::kPafsBegin, kNumLimbs);
  return assemble_skeletons(peaks, pafs, limbs, thresholds);
}

nlohmann::json skeletons_to_json(const std::vector<Skeleton>& skeletons) {
  nlohmann::json list = nlohmann::json::array();
  for (const Skeleton& s : skeletons) {
    nlohmann::json joints = nlohmann::json::array();
    for (int j = 0; j < kNumJoints; ++j) {
      if (!s.joints[j]) continue;
      const Keypoint& k = *s.joints[j];
      joints.push_back({{"index", j},
                        {"name", std::string(kJointNames[j])},
                        {"x", k.x},
                        {"y", k.y},
                        {"score", k.score}});
    }
    list.push_back({{"score", s.score}, {"joints", std::move(joints)}});
  }
  return {{"skeletons", std::move(list)}};
}

}  // namespace ymap
