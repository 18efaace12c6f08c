#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dufia/dataset.hpp"
#include "dufia/detector.hpp"
#include "dufia/network.hpp"
#include "dufia/tensor.hpp"

namespace dufia::testing {

Image random_image(const Shape3& shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0);
Tensor3 random_tensor(const Shape3& shape, std::uint64_t seed, double scale = 1.0);

/// Double-precision copy of a detector's network.
Network<double> to_double(const Detector& d);
std::vector<double> to_double(const Tensor3& t);

/// Naive O(N^4) orthonormal type-II 2D DCT of one plane, straight from the
/// cosine sum.
std::vector<double> naive_dct2(const std::vector<double>& plane, std::size_t h, std::size_t w);

/// Direct sliding-window SSIM: explicit 11x11 Gaussian sums at every valid
/// window position, per channel, averaged.
double naive_ssim(const Image& a, const Image& b);

struct FdCheck {
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  std::size_t coordinate = 0;
};

/// Central differences (float64, step h) for a random coordinate sample.
/// Coordinates whose +/-h probes land on different sides of a ReLU or |.|
/// kink are redrawn. rel_error = |a - n| / max(|a|, |n|, floor).
enum class FdTarget { LossWrtInput, LossWrtFeatures, WeightedWrtInput };
std::vector<FdCheck> finite_difference_check(const Detector& d, const Image& image, int label,
                                             FdTarget target, std::size_t n_coords,
                                             std::uint64_t seed, const Tensor3* weights = nullptr,
                                             double step = 1e-4, double floor = 1e-8);

/// Central difference of the float64 loss along `direction` in input space.
/// Sets *kink when the probes fall on different sides of a ReLU or |.|.
double directional_fd(const Detector& d, const Image& image, int label,
                      const std::vector<double>& direction, double step, bool* kink);

/// Briefly trained detector on a small dataset, cached per (arch, seed).
const Detector& small_trained(ArchId arch, std::uint64_t seed = 0);
DatasetSpec small_spec();

struct PngHeader {
  std::size_t width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
};
/// IHDR fields, read from the raw bytes.
PngHeader read_png_header(const std::filesystem::path& path);
/// 8-bit grayscale samples through libpng's simplified API.
std::vector<std::uint8_t> read_png_gray8(const std::filesystem::path& path);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace dufia::testing
