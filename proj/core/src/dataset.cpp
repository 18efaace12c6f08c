#include "dufia/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "dufia/errors.hpp"
#include "dufia/filters.hpp"
#include "dufia/rng.hpp"

namespace dufia {
namespace {

constexpr std::size_t kSize = 32;
constexpr double kRealBlurSigma = 2.0;
// Low-key exposure: a share of every image sits at the black point, where
// clipping rectifies the generator checkerboard.
constexpr double kMeanLevel = 0.15;
constexpr double kContrast = 0.2;
constexpr double kMaxTilt = 0.3;

}  // namespace

void DatasetSpec::validate() const {
  if (n_train <= 0 || n_test <= 0) {
    throw InvalidArgument("dataset counts must be positive (n_train=" + std::to_string(n_train) +
                          ", n_test=" + std::to_string(n_test) + ")");
  }
  if (!(artifact_lo >= 0.0f) || !(artifact_hi >= artifact_lo)) {
    throw InvalidArgument("artifact amplitude range must satisfy 0 <= lo <= hi");
  }
}

Image smooth_base(std::uint64_t key, std::size_t width, double blur_sigma) {
  CounterRng rng(key);
  const Shape3 shape{3, width, width};
  Tensor3 noise(shape);
  for (auto& v : noise.values()) v = static_cast<float>(rng.normal());
  Tensor3 field = gaussian_blur(noise, blur_sigma);

  // Separable blur of unit white noise has std = sum of squared 1D taps.
  double gain = 0.0;
  for (double t : gaussian_kernel(blur_sigma)) gain += t * t;
  const double scale = kContrast / gain;

  const double tilt_x = rng.uniform(-kMaxTilt, kMaxTilt);
  const double tilt_y = rng.uniform(-kMaxTilt, kMaxTilt);
  const double denom = static_cast<double>(width - 1);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < width; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double tilt = tilt_x * (static_cast<double>(x) / denom - 0.5) +
                            tilt_y * (static_cast<double>(y) / denom - 0.5);
        const double v = kMeanLevel + scale * field.at(c, y, x) + tilt;
        field.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return field;
}

LabeledExample generate_example(const DatasetSpec& spec, std::uint64_t k) {
  const auto n_train = static_cast<std::uint64_t>(spec.n_train);
  const std::uint64_t local = k < n_train ? k : k - n_train;
  const int label = static_cast<int>(local % 2);
  const std::uint64_t key = derive_seed(spec.seed, "example", k);

  if (label == 0) return {smooth_base(key, kSize, kRealBlurSigma), label};

  // Generator-style: half-resolution base, nearest-neighbour x2 upsampling,
  // then a period-2 checkerboard.
  const Image low = smooth_base(key, kSize / 2, kRealBlurSigma / 2.0);
  CounterRng amp_rng(derive_seed(key, "artifact"));
  const double amp = amp_rng.uniform(spec.artifact_lo, spec.artifact_hi);
  Image img(Shape3{3, kSize, kSize});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < kSize; ++y) {
      for (std::size_t x = 0; x < kSize; ++x) {
        const double checker = ((x + y) % 2 == 0) ? amp : -amp;
        const double v = static_cast<double>(low.at(c, y / 2, x / 2)) + checker;
        img.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return {std::move(img), label};
}

Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  Dataset ds;
  const auto n_train = static_cast<std::uint64_t>(spec.n_train);
  const auto n_test = static_cast<std::uint64_t>(spec.n_test);
  ds.train.reserve(n_train);
  ds.test.reserve(n_test);
  for (std::uint64_t k = 0; k < n_train; ++k) ds.train.push_back(generate_example(spec, k));
  for (std::uint64_t k = 0; k < n_test; ++k) ds.test.push_back(generate_example(spec, n_train + k));
  return ds;
}

std::vector<LabeledExample> select_label(std::span<const LabeledExample> xs, int label) {
  std::vector<LabeledExample> out;
  for (const auto& x : xs) {
    if (x.label == label) out.push_back(x);
  }
  return out;
}

}  // namespace dufia
