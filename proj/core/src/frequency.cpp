#include "dufia/frequency.hpp"

#include <algorithm>
#include <cmath>

#include "dufia/errors.hpp"
#include "dufia/io.hpp"
#include "dufia/rng.hpp"

namespace dufia {

void FreqPerturbConfig::validate() const {
  if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("frequency mask range p must be in [0, 1)");
  if (!(sigma >= 0.0)) throw InvalidArgument("frequency noise sigma must be >= 0");
}

Tensor3 draw_mask_deviation(const Shape3& shape, const FreqPerturbConfig& cfg) {
  cfg.validate();
  Tensor3 d(shape);
  CounterRng rng(derive_seed(cfg.seed, "freq-mask"));
  for (auto& v : d.values()) v = static_cast<float>(cfg.p * (2.0 * rng.uniform() - 1.0));
  return d;
}

Tensor3 draw_spatial_noise(const Shape3& shape, const FreqPerturbConfig& cfg) {
  cfg.validate();
  Tensor3 xi(shape);
  CounterRng rng(derive_seed(cfg.seed, "freq-noise"));
  for (auto& v : xi.values()) v = static_cast<float>(cfg.sigma * rng.normal());
  return xi;
}

Tensor3 frequency_perturb(const Image& image, const FreqPerturbConfig& cfg, bool clip) {
  const Tensor3 xi = draw_spatial_noise(image.shape(), cfg);
  const Tensor3 dev = draw_mask_deviation(image.shape(), cfg);
  Tensor3 noisy(image.shape());
  for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] = image[i] + xi[i];
  Spectrum spec = dct2(noisy);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= dev[i];
  const Tensor3 delta = idct2(spec);
  Tensor3 out(image.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float v = noisy[i] + delta[i];
    out[i] = clip ? std::clamp(v, 0.0f, 1.0f) : v;
  }
  return out;
}

Spectrum spectrum_saliency(const Detector& detector, const Image& image, int label) {
  return dct2(detector.grad_loss_wrt_input(image, label));
}

std::vector<double> saliency_display_map(std::span<const Spectrum> saliency) {
  if (saliency.empty()) throw InvalidArgument("saliency_display_map: empty batch");
  const Shape3 s = saliency.front().shape();
  std::vector<double> acc(s.height * s.width, 0.0);
  for (const auto& m : saliency) {
    if (m.shape() != s) throw ShapeError("saliency batch has mixed shapes");
    for (std::size_t c = 0; c < s.channels; ++c) {
      for (std::size_t i = 0; i < acc.size(); ++i) {
        acc[i] += std::fabs(static_cast<double>(m[c * acc.size() + i]));
      }
    }
  }
  const double denom = static_cast<double>(saliency.size() * s.channels);
  for (auto& v : acc) v = std::log1p(v / denom);
  const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
  const double min = *lo, range = *hi - *lo;
  for (auto& v : acc) v = range > 0.0 ? (v - min) / range : 0.5;
  return acc;
}

void export_saliency_png(std::span<const Spectrum> saliency, const std::filesystem::path& path) {
  const auto map = saliency_display_map(saliency);
  const Shape3 s = saliency.front().shape();
  std::vector<std::uint8_t> px(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    px[i] = static_cast<std::uint8_t>(std::lround(255.0 * map[i]));
  }
  write_png8_gray(px, s.width, s.height, path);
}

void export_saliency_png(const Spectrum& saliency, const std::filesystem::path& path) {
  export_saliency_png(std::span<const Spectrum>(&saliency, 1), path);
}

}  // namespace dufia
