#pragma once

#include <cstddef>
#include <span>

#include "dufia/tensor.hpp"

namespace dufia {

/// Orthonormal type-II DCT basis, row k = frequency k: D[k][n] =
/// s_k cos(pi (2n+1) k / 2N), s_0 = sqrt(1/N), s_k = sqrt(2/N).
/// Cached per size; returned pointer is valid for the program lifetime.
template <typename T>
const T* dct_basis(std::size_t n);

/// Per-plane separable 2D DCT over `planes` consecutive h*w planes.
/// Forward computes D_h X D_w^T; inverse computes D_h^T Y D_w. Under
/// orthonormal scaling the inverse is also the adjoint of the forward.
template <typename T>
void dct2_planes(std::span<const T> in, std::span<T> out, std::size_t planes,
                 std::size_t h, std::size_t w, bool inverse);

/// Spectrum: per-channel coefficients, DC at [c][0][0].
using Spectrum = Tensor3;

Spectrum dct2(const Tensor3& image);
/// Not clipped.
Tensor3 idct2(const Spectrum& spectrum);

}  // namespace dufia
