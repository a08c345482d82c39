#pragma once

// Synthetic people and stacks shared by the pose tests and the acceptance run.

#include <array>
#include <cmath>
#include <vector>

#include "ymap/coco.hpp"
#include "ymap/targets.hpp"

namespace fixture {

using namespace ymap;

// Upright person in a slot centered on cx; `height` spans nose to ankles.
// Joint offsets are in units of height, COCO order.
inline SkeletonAnnotation upright_person(double cx, double top, double height, bool integer = true) {
  static constexpr std::array<std::array<double, 2>, kNumJoints> kLayout = {{
      {0.00, 0.00},                   // nose
      {-0.03, -0.02}, {0.03, -0.02},  // eyes
      {-0.06, 0.00},  {0.06, 0.00},   // ears
      {-0.14, 0.15},  {0.14, 0.15},   // shoulders
      {-0.20, 0.33},  {0.20, 0.33},   // elbows
      {-0.23, 0.50},  {0.23, 0.50},   // wrists
      {-0.09, 0.52},  {0.09, 0.52},   // hips
      {-0.10, 0.76},  {0.10, 0.76},   // knees
      {-0.11, 1.00},  {0.11, 1.00},   // ankles
  }};
  SkeletonAnnotation p;
  for (int j = 0; j < kNumJoints; ++j) {
    double x = cx + kLayout[j][0] * height;
    double y = top + kLayout[j][1] * height;
    if (integer) {
      x = std::round(x);
      y = std::round(y);
    }
    p.joints[j] = {x, y, Visibility::visible};
  }
  return p;
}

// 44-channel image block holding joint heatmaps and PAFs at `epoch`.
inline ImageGrid pose_stack(const std::vector<SkeletonAnnotation>& people, int epoch = 0) {
  ImageGrid stack(kFrameSize, kFrameSize, kStackChannels);
  stack.set_channels(channels::kJointsBegin, synth_joint_heatmaps_at_epoch(people, epoch).heatmaps);
  stack.set_channels(channels::kPafsBegin, synth_pafs_at_epoch(people, epoch));
  return stack;
}

}  // namespace fixture
