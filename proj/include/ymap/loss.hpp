#pragma once

#include <array>
#include <span>
#include <string_view>

#include "ymap/grid.hpp"
#include "ymap/targets.hpp"

namespace ymap {

enum class LossTerm : int { tokens = 0, joints, pafs, depth, normals, text, segmentation };
inline constexpr int kNumLossTerms = 7;
inline constexpr std::array<std::string_view, kNumLossTerms> kLossTermNames = {
    "tokens", "joints", "pafs", "depth", "normals", "text", "segmentation"};

struct ChannelRange {
  int first = 0;
  int count = 0;
};

struct LossConfig {
  double weight = 1.0;
  // g_G, g_J, g_PAF, g_D, g_N, g_T, g_S
  std::array<double, kNumLossTerms> gains = {10.0, 2.4, 0.8, 1.0, 1.0, 1.0, 3.0};
  // Image channel block of each term; the token term uses the 8 x 300 block.
  std::array<ChannelRange, kNumLossTerms> ranges = {{
      {0, 0},
      {channels::kJointsBegin, kNumJoints},
      {channels::kPafsBegin, kNumLimbs},
      {channels::kDepth, 1},
      {channels::kNormalsBegin, 3},
      {channels::kText, 1},
      {channels::kGroupsBegin, 10},
  }};
};

// Throws ValueError unless gains are positive and ranges are disjoint and
// cover channels 0..43.
void validate_loss_config(const LossConfig& config);

struct LossBreakdown {
  double total = 0.0;
  std::array<double, kNumLossTerms> mse{};
};

// total = weight * sum_i gain_i * MSE_i, each MSE over every element of
// the term's block.
LossBreakdown multiterm_loss(const TargetStack& pred, const TargetStack& truth,
                             const LossConfig& config = {});

// Fraction of elements with |truth - pred| <= threshold.
double hdm(std::span<const float> pred, std::span<const float> truth, double threshold);
double hdm(const ImageGrid& pred, const ImageGrid& truth, double threshold);

// Per-slot cosine similarity; 0 when either row has norm < 1e-9.
std::array<double, kTokenSlots> token_cosine(std::span<const float> pred,
                                             std::span<const float> truth);

}  // namespace ymap
