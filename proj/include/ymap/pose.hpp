#pragma once

#include <array>
#include <optional>
#include <vector>

#include "json.hpp"
#include "ymap/grid.hpp"
#include "ymap/targets.hpp"

namespace ymap {

struct Keypoint {
  int joint = 0;
  double x = 0.0;
  double y = 0.0;
  float score = 0.0f;
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct Skeleton {
  std::array<std::optional<Keypoint>, kNumJoints> joints{};
  double score = 0.0;

  int joint_count() const;
  friend bool operator==(const Skeleton&, const Skeleton&) = default;
};

struct DecodeThresholds {
  float peak = 0.3f;
  float limb = 0.25f;
  int samples = 10;
  // Joint types without a limb (the face) attach to the nearest skeleton
  // when within max(orphan_min_radius, orphan_radius_scale * extent), where
  // extent is the larger side of the skeleton's bounding box.
  double orphan_radius_scale = 0.5;
  double orphan_min_radius = 12.0;
};

// 3x3 local maxima >= threshold of one channel, sorted by descending score
// (then x, then y). Plateaus keep their first pixel in raster order.
// Positions are refined by a per-axis quadratic fit on the 3x3 patch.
std::vector<Keypoint> extract_peaks(const ImageGrid& heatmaps, int channel, float threshold,
                                    int joint = 0);

// Mean of `samples` bilinear PAF samples evenly spaced on a -> b, endpoints
// included. A zero-length segment returns the value at the point.
double score_limb(const ImageGrid& pafs, int channel, const Keypoint& a, const Keypoint& b,
                  int samples);

using PeakLists = std::array<std::vector<Keypoint>, kNumJoints>;

// Greedy part association: all candidate limbs above the limb threshold are
// visited in descending score, each endpoint used once per limb type, and
// joined only when the two partial skeletons share no joint type. Connected
// groups with at least one limb become skeletons, ordered by descending
// score then leftmost joint.
std::vector<Skeleton> assemble_skeletons(const PeakLists& peaks, const ImageGrid& pafs,
                                         const LimbTable& limbs = default_limb_table(),
                                         const DecodeThresholds& thresholds = {});

// Peaks from channels 0..16 and PAFs from 17..28 of a 44-channel stack.
std::vector<Skeleton> decode_pose(const ImageGrid& stack_images,
                                  const DecodeThresholds& thresholds = {},
                                  const LimbTable& limbs = default_limb_table());

// {"skeletons": [{"score": s, "joints": [{"index", "name", "x", "y", "score"}...]}]}
// Missing joints are omitted from the joint list.
nlohmann::json skeletons_to_json(const std::vector<Skeleton>& skeletons);

}  // namespace ymap
