#include "ymap/loss.hpp"

#include <cmath>
#include <string>

#include "ymap/error.hpp"

namespace ymap {

void validate_loss_config(const LossConfig& config) {
  if (!(config.weight >= 0.0) || !std::isfinite(config.weight)) {
    throw ValueError("loss weight must be finite and non-negative");
  }
  for (int i = 0; i < kNumLossTerms; ++i) {
    if (!(config.gains[i] > 0.0)) {
      throw ValueError("gain for " + std::string(kLossTermNames[i]) + " must be positive");
    }
  }
  std::array<int, kStackChannels> owner{};
  owner.fill(-1);
  for (int i = 1; i < kNumLossTerms; ++i) {
    const ChannelRange r = config.ranges[i];
    if (r.count <= 0 || r.first < 0 || r.first + r.count > kStackChannels) {
      throw ValueError("channel range of " + std::string(kLossTermNames[i]) + " is invalid");
    }
    for (int c = r.first; c < r.first + r.count; ++c) {
      if (owner[c] >= 0) {
        throw ValueError("channel " + std::to_string(c) + " assigned to both " +
                         std::string(kLossTermNames[owner[c]]) + " and " +
                         std::string(kLossTermNames[i]));
      }
      owner[c] = i;
    }
  }
  for (int c = 0; c < kStackChannels; ++c) {
    if (owner[c] < 0) throw ValueError("channel " + std::to_string(c) + " has no loss term");
  }
}

namespace {

double sum_squared(std::span<const float> a, std::span<const float> b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    if (!std::isfinite(d)) throw ValueError("non-finite value in loss input");
    total += d * d;
  }
  return total;
}

}  // namespace

LossBreakdown multiterm_loss(const TargetStack& pred, const TargetStack& truth,
                             const LossConfig& config) {
  validate_loss_config(config);
  if (!pred.images.same_shape(truth.images) || pred.images.channels() != kStackChannels) {
    throw ShapeError("loss inputs must both be 44-channel stacks of equal size");
  }
  if (pred.tokens.size() != truth.tokens.size() ||
      pred.tokens.size() != static_cast<std::size_t>(kTokenSlots) * kTokenDims) {
    throw ShapeError("loss inputs must both carry 8 x 300 tokens");
  }
  LossBreakdown out;
  out.mse[0] = sum_squared(pred.tokens, truth.tokens) / static_cast<double>(pred.tokens.size());
  const std::size_t plane = pred.images.plane_size();
  for (int i = 1; i < kNumLossTerms; ++i) {
    const ChannelRange r = config.ranges[i];
    const std::size_t n = plane * r.count;
    const auto p = pred.images.data().subspan(r.first * plane, n);
    const auto t = truth.images.data().subspan(r.first * plane, n);
    out.mse[i] = sum_squared(p, t) / static_cast<double>(n);
  }
  double sum = 0.0;
  for (int i = 0; i < kNumLossTerms; ++i) sum += config.gains[i] * out.mse[i];
  out.total = config.weight * sum;
  return out;
}

double hdm(std::span<const float> pred, std::span<const float> truth, double threshold) {
  if (pred.size() != truth.size()) throw ShapeError("HDM inputs differ in size");
  if (pred.empty()) throw ShapeError("HDM of an empty map is undefined");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (std::abs(static_cast<double>(truth[i]) - pred[i]) <= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double hdm(const ImageGrid& pred, const ImageGrid& truth, double threshold) {
  if (!pred.same_shape(truth)) throw ShapeError("HDM inputs differ in shape");
  return hdm(pred.data(), truth.data(), threshold);
}

std::array<double, kTokenSlots> token_cosine(std::span<const float> pred,
                                             std::span<const float> truth) {
  const std::size_t expected = static_cast<std::size_t>(kTokenSlots) * kTokenDims;
  if (pred.size() != expected || truth.size() != expected) {
    throw ShapeError("token matrices must be 8 x 300");
  }
  std::array<double, kTokenSlots> out{};
  for (int s = 0; s < kTokenSlots; ++s) {
    double dot = 0.0, np = 0.0, nt = 0.0;
    for (int d = 0; d < kTokenDims; ++d) {
      const double p = pred[s * kTokenDims + d];
      const double t = truth[s * kTokenDims + d];
      dot += p * t;
      np += p * p;
      nt += t * t;
    }
    np = std::sqrt(np);
    nt = std::sqrt(nt);
    out[s] = (np < 1e-9 || nt < 1e-9) ? 0.0 : dot / (np * nt);
  }
  return out;
}

}  // namespace ymap
