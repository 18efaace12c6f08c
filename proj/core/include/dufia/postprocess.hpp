#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dufia/filters.hpp"
#include "dufia/tensor.hpp"

namespace dufia {

/// Baseline JPEG encode/decode through libjpeg (4:4:4, islow DCT) at the
/// given quality in [1, 100]. Input is quantized to 8 bits first.
Image jpeg_roundtrip(const Image& image, int quality);

/// Elementwise N(0, sigma^2) noise, then clip to [0, 1]. sigma 0 is the identity.
Image add_noise(const Image& image, double sigma, std::uint64_t seed);

enum class ProcessKind { Identity, Jpeg, Blur, Noise };

struct PostProcess {
  ProcessKind kind = ProcessKind::Identity;
  double strength = 0.0;  // quality, blur sigma or noise sigma

  std::string name() const;      // identity / jpeg / blur / noise
  std::string strength_label() const;
  /// `seed` only affects noise; callers pass a per-image derived key.
  Image apply(const Image& image, std::uint64_t seed) const;
};

inline const std::vector<double> kDefaultBlurSigmas{0.02, 0.32, 0.64};

/// identity, JPEG {90, 60, 30}, blur `blur_sigmas`, noise {1, 8, 64}/255.
std::vector<PostProcess> default_processes(const std::vector<double>& blur_sigmas = kDefaultBlurSigmas);

}  // namespace dufia
