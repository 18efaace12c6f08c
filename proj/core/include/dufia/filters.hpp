#pragma once

#include <vector>

#include "dufia/tensor.hpp"

namespace dufia {

/// Normalized 1D Gaussian taps, radius ceil(3 sigma). Empty for sigma <= 0.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with reflect (edge-excluded) padding, per
/// channel. Evaluated in residual form c + sum_k w_k (x_k - c) around the
/// centre tap, which leaves constant regions bit-exact. sigma <= 0 is the
/// identity.
Tensor3 gaussian_blur(const Tensor3& image, double sigma);

}  // namespace dufia
