#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dufia/network.hpp"
#include "dufia/tensor.hpp"

namespace dufia {

/// Label convention: index 1 of the logits is "fake" (AI-generated).
inline constexpr int kLabelReal = 0;
inline constexpr int kLabelFake = 1;

struct Prediction {
  std::array<float, 2> logits{};
  float fake_probability = 0.0f;
};

/// Post-ReLU activations at the architecture's mid-layer tap.
struct FeatureMap {
  Tensor3 values;
  std::size_t layer_id = 0;
};

/// Immutable two-class detector. All methods are const and thread-safe.
class Detector {
 public:
  Detector(ArchId arch, std::vector<float> parameters);

  ArchId arch() const { return net_.arch().id; }
  const Architecture& architecture() const { return net_.arch(); }
  std::span<const float> parameters() const { return net_.params(); }
  Shape3 input_shape() const { return net_.arch().input; }
  Shape3 feature_shape() const { return net_.arch().feature_shape(); }
  std::size_t mid_layer_id() const { return net_.arch().tap; }
  /// Short content hash of (arch, parameters); identifies provenance.
  const std::string& fingerprint() const { return fingerprint_; }
  const Network<float>& network() const { return net_; }

  Prediction forward(const Image& image) const;
  double loss(const Image& image, int label) const;
  FeatureMap features(const Image& image) const;

  Tensor3 grad_loss_wrt_input(const Image& image, int label,
                              double* loss_out = nullptr) const;
  /// d loss / d h at the tap, shaped like the feature map.
  Tensor3 grad_loss_wrt_features(const Image& image, int label) const;
  /// d (sum_i w_i h_i(image)) / d image with w held constant.
  Tensor3 grad_weighted_features_wrt_input(const Image& image,
                                           const Tensor3& weights,
                                           double* value_out = nullptr) const;
  double weighted_features(const Image& image, const Tensor3& weights) const;

  /// Feature-injection hook: evaluates the layers after the tap.
  double loss_from_features(const Tensor3& features, int label) const;

 private:
  void check_input(const Tensor3& image) const;

  Network<float> net_;
  std::string fingerprint_;
};

/// Uniform fan-in initialization U(-sqrt(6/fan_in), sqrt(6/fan_in)) for
/// weights; biases zero.
Detector build_detector(ArchId arch, std::uint64_t init_seed);

/// "DFK1" checkpoint: magic, arch byte ('A'/'B'/'C'), u64 LE parameter
/// count, row-major float32 LE parameters.
void save_checkpoint(const Detector& detector, const std::filesystem::path& path);
Detector load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_checkpoint(const Detector& detector);
Detector decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace dufia
