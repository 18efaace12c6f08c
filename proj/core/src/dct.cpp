#include "dufia/dct.hpp"

#include <Eigen/Core>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

namespace dufia {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
std::vector<T> make_basis(std::size_t n) {
  std::vector<T> d(n * n);
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / nn) : std::sqrt(2.0 / nn);
    for (std::size_t i = 0; i < n; ++i) {
      d[k * n + i] = static_cast<T>(
          s * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) *
                       static_cast<double>(k) / (2.0 * nn)));
    }
  }
  return d;
}

}  // namespace

template <typename T>
const T* dct_basis(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<std::vector<T>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<std::vector<T>>(make_basis<T>(n));
  return slot->data();
}

template <typename T>
void dct2_planes(std::span<const T> in, std::span<T> out, std::size_t planes,
                 std::size_t h, std::size_t w, bool inverse) {
  using Map = Eigen::Map<const RowMat<T>>;
  const Map dh(dct_basis<T>(h), static_cast<Eigen::Index>(h),
               static_cast<Eigen::Index>(h));
  const Map dw(dct_basis<T>(w), static_cast<Eigen::Index>(w),
               static_cast<Eigen::Index>(w));
  const std::size_t plane = h * w;
  RowMat<T> tmp(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w));
  for (std::size_t p = 0; p < planes; ++p) {
    const Map x(in.data() + p * plane, static_cast<Eigen::Index>(h),
                static_cast<Eigen::Index>(w));
    Eigen::Map<RowMat<T>> y(out.data() + p * plane,
                            static_cast<Eigen::Index>(h),
                            static_cast<Eigen::Index>(w));
    if (!inverse) {
      tmp.noalias() = dh * x;
      y.noalias() = tmp * dw.transpose();
    } else {
      tmp.noalias() = dh.transpose() * x;
      y.noalias() = tmp * dw;
    }
  }
}

template const float* dct_basis<float>(std::size_t);
template const double* dct_basis<double>(std::size_t);
template void dct2_planes<float>(std::span<const float>, std::span<float>,
                                 std::size_t, std::size_t, std::size_t, bool);
template void dct2_planes<double>(std::span<const double>, std::span<double>,
                                  std::size_t, std::size_t, std::size_t, bool);

Spectrum dct2(const Tensor3& image) {
  Spectrum out(image.shape());
  const auto& s = image.shape();
  dct2_planes<float>(image.values(), out.values(), s.channels, s.height,
                     s.width, false);
  return out;
}

Tensor3 idct2(const Spectrum& spectrum) {
  Tensor3 out(spectrum.shape());
  const auto& s = spectrum.shape();
  dct2_planes<float>(spectrum.values(), out.values(), s.channels, s.height,
                     s.width, true);
  return out;
}

}  // namespace dufia
