#include "dufia/filters.hpp"

#include <cmath>
#include <cstddef>

#include "dufia/errors.hpp"

namespace dufia {
namespace {

// Reflect without repeating the edge sample: -1 -> 1, n -> n-2.
std::ptrdiff_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) return {};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

Tensor3 gaussian_blur(const Tensor3& image, double sigma) {
  if (sigma < 0.0) throw InvalidArgument("blur sigma must be non-negative");
  const auto k = gaussian_kernel(sigma);
  if (k.empty()) return image;
  const auto& s = image.shape();
  const auto radius = static_cast<std::ptrdiff_t>(k.size() / 2);
  const auto h = static_cast<std::ptrdiff_t>(s.height);
  const auto w = static_cast<std::ptrdiff_t>(s.width);
  Tensor3 tmp(s), out(s);
  for (std::size_t c = 0; c < s.channels; ++c) {
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        const double centre = image.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        double acc = 0.0;
        for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
          const auto xx = static_cast<std::size_t>(reflect(x + t, w));
          acc += k[static_cast<std::size_t>(t + radius)] *
                 (image.at(c, static_cast<std::size_t>(y), xx) - centre);
        }
        tmp.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
            static_cast<float>(centre + acc);
      }
    }
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        const double centre = tmp.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        double acc = 0.0;
        for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
          const auto yy = static_cast<std::size_t>(reflect(y + t, h));
          acc += k[static_cast<std::size_t>(t + radius)] *
                 (tmp.at(c, yy, static_cast<std::size_t>(x)) - centre);
        }
        out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
            static_cast<float>(centre + acc);
      }
    }
  }
  return out;
}

}  // namespace dufia
