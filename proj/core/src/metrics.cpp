#include "dufia/metrics.hpp"

#include <cmath>
#include <limits>

#include "dufia/errors.hpp"
#include "dufia/parallel.hpp"

namespace dufia {
namespace {

void same_shape(const Image& a, const Image& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes differ (" + a.shape().str() + " vs " +
                     b.shape().str() + ")");
  }
}

std::vector<double> window_1d() {
  const int r = kSsimWindow / 2;
  std::vector<double> w(kSsimWindow);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    w[i + r] = std::exp(-0.5 * i * i / (kSsimSigma * kSsimSigma));
    sum += w[i + r];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Valid-mode separable filtering of one channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& k) {
  const std::size_t n = k.size();
  const std::size_t ow = w - n + 1, oh = h - n + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += k[j] * plane[y * w + x + j];
      rows[y * ow + x] = s;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += k[j] * rows[(y + j) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

bool correct(float fake_probability, int label, double threshold) {
  return (fake_probability > threshold) == (label == kLabelFake);
}

double accuracy(const Detector& detector, std::span<const LabeledExample> examples,
                double threshold) {
  if (examples.empty()) throw InvalidArgument("accuracy of an empty set");
  std::size_t hits = 0;
  for (const auto& e : examples) {
    hits += correct(detector.forward(e.image).fake_probability, e.label, threshold);
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

double accuracy(const Detector& detector, std::span<const Image> images, int label,
                double threshold, int jobs) {
  if (images.empty()) throw InvalidArgument("accuracy of an empty set");
  std::vector<char> hit(images.size(), 0);
  parallel_for(images.size(), jobs, [&](std::size_t i) {
    hit[i] = correct(detector.forward(images[i]).fake_probability, label, threshold);
  });
  std::size_t hits = 0;
  for (char h : hit) hits += h;
  return static_cast<double>(hits) / static_cast<double>(images.size());
}

double mse(const Image& a, const Image& b) {
  same_shape(a, b, "mse");
  if (a.size() == 0) throw InvalidArgument("mse of empty images");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

double psnr_floor(double epsilon) { return -20.0 * std::log10(epsilon); }

std::vector<double> ssim_window() {
  const auto w = window_1d();
  std::vector<double> out(w.size() * w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w.size(); ++j) out[i * w.size() + j] = w[i] * w[j];
  }
  return out;
}

double ssim(const Image& a, const Image& b) {
  same_shape(a, b, "ssim");
  const auto& s = a.shape();
  if (s.height < kSsimWindow || s.width < kSsimWindow) {
    throw ShapeError("ssim needs images of at least 11x11, got " + s.str());
  }
  const auto k = window_1d();
  const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
  const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
  const std::size_t plane = s.height * s.width;
  double total = 0.0;
  for (std::size_t c = 0; c < s.channels; ++c) {
    std::vector<double> pa(plane), pb(plane), paa(plane), pbb(plane), pab(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      pa[i] = a[c * plane + i];
      pb[i] = b[c * plane + i];
      paa[i] = pa[i] * pa[i];
      pbb[i] = pb[i] * pb[i];
      pab[i] = pa[i] * pb[i];
    }
    const auto ma = filter_valid(pa, s.height, s.width, k);
    const auto mb = filter_valid(pb, s.height, s.width, k);
    const auto maa = filter_valid(paa, s.height, s.width, k);
    const auto mbb = filter_valid(pbb, s.height, s.width, k);
    const auto mab = filter_valid(pab, s.height, s.width, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
      const double va = maa[i] - ma[i] * ma[i];
      const double vb = mbb[i] - mb[i] * mb[i];
      const double cov = mab[i] - ma[i] * mb[i];
      sum += ((2.0 * (ma[i] * mb[i]) + c1) * (2.0 * cov + c2)) /
             ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
    }
    total += sum / static_cast<double>(ma.size());
  }
  return total / static_cast<double>(s.channels);
}

}  // namespace dufia
