#pragma once

#include <array>
#include <cstddef>

namespace nilm {

/// Per-channel z-score parameters for the (P, Q) model inputs.
struct Normalization {
  static constexpr std::size_t kChannels = 2;
  /// Standard deviations below this are replaced by 1.
  static constexpr double kStdFloor = 1e-6;

  std::array<double, kChannels> mean{0.0, 0.0};
  std::array<double, kChannels> std{1.0, 1.0};

  double normalize(std::size_t channel, double value) const {
    return (value - mean[channel]) / std[channel];
  }
  double denormalize(std::size_t channel, double value) const {
    return value * std[channel] + mean[channel];
  }

  bool operator==(const Normalization&) const = default;
};

}  // namespace nilm
