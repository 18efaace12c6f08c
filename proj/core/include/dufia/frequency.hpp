#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dufia/dct.hpp"
#include "dufia/detector.hpp"
#include "dufia/tensor.hpp"

namespace dufia {

struct FreqPerturbConfig {
  double p = 0.5;              // mask half-range: M ~ U(1-p, 1+p)
  double sigma = 8.0 / 255.0;  // spatial noise std: xi ~ N(0, sigma^2)
  std::uint64_t seed = 0;

  void validate() const;
};

/// Mask deviation M - 1, drawn elementwise from U(-p, p).
Tensor3 draw_mask_deviation(const Shape3& shape, const FreqPerturbConfig& cfg);
Tensor3 draw_spatial_noise(const Shape3& shape, const FreqPerturbConfig& cfg);

/// IDCT(M * DCT(x + xi)), evaluated as (x + xi) + IDCT((M - 1) * DCT(x + xi)).
/// The two forms are equal by linearity; the second is exact when the mask
/// is the identity. Clipped to [0, 1] unless `clip` is false.
Tensor3 frequency_perturb(const Image& image, const FreqPerturbConfig& cfg, bool clip = true);

/// Gradient of the loss with respect to the DCT coefficients of the input.
/// The inverse transform is linear and orthonormal, so this is the forward
/// DCT of the input gradient.
Spectrum spectrum_saliency(const Detector& detector, const Image& image, int label);

/// Mean |saliency| over the batch and the channels, then log(1 + .), then
/// min-max scaled to [0, 1]. A constant map becomes 0.5 everywhere.
/// Row-major H x W, DC at index 0.
std::vector<double> saliency_display_map(std::span<const Spectrum> saliency);

/// Writes saliency_display_map as 8-bit grayscale, round(255 v).
void export_saliency_png(std::span<const Spectrum> saliency, const std::filesystem::path& path);
void export_saliency_png(const Spectrum& saliency, const std::filesystem::path& path);

}  // namespace dufia
