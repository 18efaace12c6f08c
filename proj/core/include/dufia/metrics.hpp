#pragma once

#include <span>
#include <vector>

#include "dufia/dataset.hpp"
#include "dufia/detector.hpp"
#include "dufia/tensor.hpp"

namespace dufia {

/// Fraction of examples where (fake_probability > threshold) == (label == 1).
/// A probability equal to the threshold counts as "real".
double accuracy(const Detector& detector, std::span<const LabeledExample> examples,
                double threshold = 0.5);
/// Same, for a set of images sharing one label.
double accuracy(const Detector& detector, std::span<const Image> images, int label,
                double threshold = 0.5, int jobs = 1);
/// Decision rule used by accuracy().
bool correct(float fake_probability, int label, double threshold = 0.5);

double mse(const Image& a, const Image& b);
/// 10 log10(1 / MSE), peak 1. Identical images give +infinity.
double psnr(const Image& a, const Image& b);
/// Lowest PSNR an L-inf budget eps can produce: every pixel off by eps.
double psnr_floor(double epsilon);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Gaussian window 11x11 (sigma 1.5), K1 0.01, K2 0.03, range 1.
/// Mean over all fully contained window positions, per channel, then averaged
/// over channels. Both sides must be at least 11 pixels.
double ssim(const Image& a, const Image& b);
/// Normalized 2D window weights, row-major 11x11.
std::vector<double> ssim_window();

}  // namespace dufia
