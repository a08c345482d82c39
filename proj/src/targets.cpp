#include "ymap/targets.hpp"

#include <algorithm>
#include <cmath>

#include "ymap/error.hpp"
#include "ymap/image_io.hpp"

namespace ymap {

int decay_at_epoch(const DecaySchedule& schedule, int epoch) {
  if (epoch < 0) throw ValueError("epoch must be non-negative");
  if (schedule.epochs_per_step <= 0) throw ValueError("epochs_per_step must be positive");
  const long long reduced = static_cast<long long>(schedule.start_size) -
                            static_cast<long long>(schedule.step) * (epoch / schedule.epochs_per_step);
  return static_cast<int>(std::max<long long>(schedule.end_size, reduced));
}

const LimbTable& default_limb_table() {
  static const LimbTable table = {{
      {5, 7},    // left shoulder - left elbow
      {7, 9},    // left elbow - left wrist
      {6, 8},    // right shoulder - right elbow
      {8, 10},   // right elbow - right wrist
      {11, 13},  // left hip - left knee
      {13, 15},  // left knee - left ankle
      {12, 14},  // right hip - right knee
      {14, 16},  // right knee - right ankle
      {5, 11},   // left shoulder - left hip
      {6, 12},   // right shoulder - right hip
      {5, 6},    // shoulders
      {11, 12},  // hips
  }};
  return table;
}

namespace {

bool in_frame(const Joint& j, int frame) {
  return j.x >= 0.0 && j.y >= 0.0 && j.x <= frame - 1 && j.y <= frame - 1;
}

void splat_gaussian(ImageGrid& grid, int channel, double cx, double cy, int size) {
  const double half = size / 2.0;
  const double sigma = size / 4.0;
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - half)));
  const int x1 = std::min(grid.width() - 1, static_cast<int>(std::ceil(cx + half)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - half)));
  const int y1 = std::min(grid.height() - 1, static_cast<int>(std::ceil(cy + half)));
  for (int y = y0; y <= y1; ++y) {
    const double dy = y - cy;
    if (std::abs(dy) >= half) continue;
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx;
      if (std::abs(dx) >= half) continue;
      const float v = static_cast<float>(std::exp(-(dx * dx + dy * dy) * inv_two_sigma2));
      float& cell = grid.at(channel, y, x);
      cell = std::max(cell, v);
    }
  }
}

}  // namespace

HeatmapReport synth_joint_heatmaps(std::span<const SkeletonAnnotation> people, int size,
                                   int frame) {
  if (size <= 0) throw ValueError("heatmap window size must be positive");
  HeatmapReport report{ImageGrid(frame, frame, kNumJoints), 0};
  for (const SkeletonAnnotation& person : people) {
    for (int j = 0; j < kNumJoints; ++j) {
      const Joint& joint = person.joints[j];
      if (!joint.annotated()) continue;
      if (!in_frame(joint, frame)) {
        ++report.skipped_out_of_frame;
        continue;
      }
      splat_gaussian(report.heatmaps, j, joint.x, joint.y, size);
    }
  }
  return report;
}

HeatmapReport synth_joint_heatmaps_at_epoch(std::span<const SkeletonAnnotation> people,
                                            int epoch, int frame) {
  return synth_joint_heatmaps(people, decay_at_epoch(DecaySchedule::joints(), epoch), frame);
}

void draw_limb_band(ImageGrid& grid, int channel, Point2 a, Point2 b, int width) {
  constexpr double kEps = 1e-9;
  const double half = width / 2.0;
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double length = std::hypot(dx, dy);
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - half)));
  const int x1 = std::min(grid.width() - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + half)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - half)));
  const int y1 = std::min(grid.height() - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + half)));
  if (length < kEps) {
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double ox = x - a.x;
        const double oy = y - a.y;
        if (ox >= -half - kEps && ox < half - kEps && oy >= -half - kEps && oy < half - kEps) {
          grid.at(channel, y, x) = 1.0f;
        }
      }
    }
    return;
  }
  const double ux = dx / length;
  const double uy = dy / length;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double px = x - a.x;
      const double py = y - a.y;
      const double along = ux * px + uy * py;
      const double across = ux * py - uy * px;
      if (along < -kEps || along > length + kEps) continue;
      if (across < -half - kEps || across >= half - kEps) continue;
      grid.at(channel, y, x) = 1.0f;
    }
  }
}

ImageGrid synth_pafs(std::span<const SkeletonAnnotation> people, int width, const LimbTable& limbs,
                     int frame) {
  if (width <= 0) throw ValueError("PAF band width must be positive");
  ImageGrid out(frame, frame, kNumLimbs);
  for (const SkeletonAnnotation& person : people) {
    for (int l = 0; l < kNumLimbs; ++l) {
      const Joint& a = person.joints[limbs[l].from];
      const Joint& b = person.joints[limbs[l].to];
      if (!a.annotated() || !b.annotated()) continue;
      draw_limb_band(out, l, {a.x, a.y}, {b.x, b.y}, width);
    }
  }
  return out;
}

ImageGrid synth_pafs_at_epoch(std::span<const SkeletonAnnotation> people, int epoch,
                              const LimbTable& limbs, int frame) {
  return synth_pafs(people, decay_at_epoch(DecaySchedule::pafs(), epoch), limbs, frame);
}

int group_mask_channel(int group) {
  if (group < 0 || group >= kNumGroups) throw ValueError("group index out of range");
  return group == static_cast<int>(ClassGroup::Text) ? 0 : group + 1;
}

ImageGrid synth_group_masks(const AnnotationRecord& record, const ClassGroupTable& table,
                            const ScaleOffset& transform, const ImageGrid* extra_text, int frame) {
  ImageGrid out(frame, frame, kNumGroups);
  for (const InstanceAnnotation& inst : record.instances) {
    const int channel = group_mask_channel(assign_class_group(inst.category_id, table));
    const ImageGrid mask = rasterize_instance_in_frame(inst, record, transform, frame);
    auto dst = out.plane(channel);
    auto src = mask.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::max(dst[i], src[i]);
  }
  if (extra_text) {
    if (extra_text->height() != frame || extra_text->width() != frame ||
        extra_text->channels() != 1) {
      throw ShapeError("text mask must be a single channel in the target frame");
    }
    auto dst = out.plane(0);
    auto src = extra_text->data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::max(dst[i], src[i]);
  }
  return out;
}

TargetStack assemble_targets(const TargetParts& parts) {
  const ImageGrid* blocks[] = {&parts.joints, &parts.pafs, &parts.depth, &parts.normals,
                               &parts.masks};
  const int expected[] = {kNumJoints, kNumLimbs, 1, 3, kNumGroups};
  const int offsets[] = {channels::kJointsBegin, channels::kPafsBegin, channels::kDepth,
                         channels::kNormalsBegin, channels::kText};
  const int height = parts.joints.height();
  const int width = parts.joints.width();
  for (int i = 0; i < 5; ++i) {
    if (blocks[i]->channels() != expected[i] || blocks[i]->height() != height ||
        blocks[i]->width() != width) {
      throw ShapeError("target block " + std::to_string(i) + " has shape " +
                       std::to_string(blocks[i]->channels()) + "x" +
                       std::to_string(blocks[i]->height()) + "x" +
                       std::to_string(blocks[i]->width()) + ", expected " +
                       std::to_string(expected[i]) + " channels at " + std::to_string(height) +
                       "x" + std::to_string(width));
    }
  }
  if (parts.tokens.size() != static_cast<std::size_t>(kTokenSlots) * kTokenDims) {
    throw ShapeError("token block must hold 8 x 300 values");
  }
  TargetStack stack{ImageGrid(height, width, kStackChannels), parts.tokens};
  for (int i = 0; i < 5; ++i) stack.images.set_channels(offsets[i], *blocks[i]);
  return stack;
}

void save_target_stack(const TargetStack& stack, const std::filesystem::path& path) {
  if (stack.images.channels() != kStackChannels ||
      stack.tokens.size() != static_cast<std::size_t>(kTokenSlots) * kTokenDims) {
    throw ShapeError("target stack must have 44 image channels and 8 x 300 tokens");
  }
  TensorFile file;
  file.shape = {kStackChannels, stack.images.height(), stack.images.width()};
  file.range = {-1.0f, 1.0f};
  file.extra["tokens"] = {{"shape", {kTokenSlots, kTokenDims}},
                          {"offset_floats", stack.images.size()}};
  file.data.reserve(stack.images.size() + stack.tokens.size());
  file.data.insert(file.data.end(), stack.images.data().begin(), stack.images.data().end());
  file.data.insert(file.data.end(), stack.tokens.begin(), stack.tokens.end());
  write_tensor_file(file, path);
}

TargetStack load_target_stack(const std::filesystem::path& path) {
  TensorFile file = read_tensor_file(path);
  if (file.shape.size() != 3 || file.shape[0] != kStackChannels) {
    throw FormatError(path.string() + ": target stack must have shape [44, H, W]");
  }
  const std::size_t image_floats =
      static_cast<std::size_t>(file.shape[0]) * file.shape[1] * file.shape[2];
  const std::size_t token_floats = static_cast<std::size_t>(kTokenSlots) * kTokenDims;
  if (file.data.size() != image_floats + token_floats) {
    throw FormatError(path.string() + ": payload does not hold 44 channels plus 8 x 300 tokens");
  }
  std::vector<float> images(file.data.begin(),
                            file.data.begin() + static_cast<std::ptrdiff_t>(image_floats));
  std::vector<float> tokens(file.data.begin() + static_cast<std::ptrdiff_t>(image_floats),
                            file.data.end());
  return {ImageGrid(file.shape[1], file.shape[2], kStackChannels, std::move(images)),
          std::move(tokens)};
}

}  // namespace ymap
