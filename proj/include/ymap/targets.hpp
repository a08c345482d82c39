#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "ymap/coco.hpp"
#include "ymap/grid.hpp"

namespace ymap {

inline constexpr int kStackChannels = 44;
inline constexpr int kTokenSlots = 8;
inline constexpr int kTokenDims = 300;
inline constexpr int kNumLimbs = 12;

// Channel layout of the pictorial target stack.
namespace channels {
inline constexpr int kJointsBegin = 0;   // 17 joint heatmaps
inline constexpr int kPafsBegin = 17;    // 12 limb bands
inline constexpr int kDepth = 29;
inline constexpr int kNormalsBegin = 30; // nx, ny, nz
inline constexpr int kText = 33;
inline constexpr int kGroupsBegin = 34;  // Persons..Nature
}  // namespace channels

// size(e) = max(end_size, start_size - step * floor(e / epochs_per_step))
struct DecaySchedule {
  int start_size = 0;
  int end_size = 0;
  int epochs_per_step = 20;
  int step = 1;

  static DecaySchedule joints() { return {23, 6, 20, 1}; }
  static DecaySchedule pafs() { return {6, 2, 20, 1}; }
};

int decay_at_epoch(const DecaySchedule& schedule, int epoch);

struct Limb {
  int from = 0;
  int to = 0;
};

// Limb connection table in PAF channel order: arms, legs, torso sides,
// shoulder and hip crossbars. Face joints have no limb.
using LimbTable = std::array<Limb, kNumLimbs>;
const LimbTable& default_limb_table();

struct HeatmapReport {
  ImageGrid heatmaps;
  int skipped_out_of_frame = 0;
};

// One unnormalized Gaussian per annotated joint with sigma = size / 4,
// limited to the size x size window |dx|, |dy| < size / 2 around the joint.
// Peak is 1 at integer joint positions; people combine by per-pixel max.
HeatmapReport synth_joint_heatmaps(std::span<const SkeletonAnnotation> people, int size,
                                   int frame = kFrameSize);
HeatmapReport synth_joint_heatmaps_at_epoch(std::span<const SkeletonAnnotation> people,
                                            int epoch, int frame = kFrameSize);

// Scalar occupancy band of a limb: pixel p is 1 when its projection t onto
// a->b lies in [0, |b - a|] and its signed perpendicular offset lies in
// [-width / 2, width / 2).
void draw_limb_band(ImageGrid& grid, int channel, Point2 a, Point2 b, int width);

ImageGrid synth_pafs(std::span<const SkeletonAnnotation> people, int width,
                     const LimbTable& limbs = default_limb_table(), int frame = kFrameSize);
ImageGrid synth_pafs_at_epoch(std::span<const SkeletonAnnotation> people, int epoch,
                              const LimbTable& limbs = default_limb_table(),
                              int frame = kFrameSize);

// 11 channels: Text, then Persons..Nature. Channel g is the union of every
// instance mask whose category maps to that group. `extra_text` (e.g. a
// teacher text-region mask already in the frame) is unioned into Text.
ImageGrid synth_group_masks(const AnnotationRecord& record, const ClassGroupTable& table,
                            const ScaleOffset& transform, const ImageGrid* extra_text = nullptr,
                            int frame = kFrameSize);

// Maps a group index (Persons = 0 .. Text = 10) to its channel in the
// 11-channel group mask block.
int group_mask_channel(int group);

struct TargetStack {
  ImageGrid images;             // 44 x 256 x 256
  std::vector<float> tokens;    // 8 x 300, row-major

  std::span<const float> token_row(int slot) const {
    return std::span<const float>(tokens).subspan(static_cast<std::size_t>(slot) * kTokenDims,
                                                  kTokenDims);
  }
  friend bool operator==(const TargetStack&, const TargetStack&) = default;
};

struct TargetParts {
  ImageGrid joints;   // 17 channels
  ImageGrid pafs;     // 12
  ImageGrid depth;    // 1
  ImageGrid normals;  // 3
  ImageGrid masks;    // 11: text + 10 groups
  std::vector<float> tokens;  // 8 * 300
};

TargetStack assemble_targets(const TargetParts& parts);

void save_target_stack(const TargetStack& stack, const std::filesystem::path& path);
TargetStack load_target_stack(const std::filesystem::path& path);

}  // namespace ymap
