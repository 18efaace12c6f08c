#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dufia/tensor.hpp"

namespace dufia {

enum class ArchId : std::uint8_t { A = 'A', B = 'B', C = 'C' };

ArchId parse_arch(std::string_view name);
char arch_char(ArchId id);

enum class LayerKind { Conv, Relu, AvgPool2, GlobalAvgPool, Linear, Dct, LogAbs };

struct LayerSpec {
  LayerKind kind;
  Shape3 in;
  Shape3 out;
  std::size_t kernel = 0;
  std::size_t pad = 0;
  std::size_t weight_offset = 0;
  std::size_t weight_count = 0;
  std::size_t bias_offset = 0;
  std::size_t bias_count = 0;
};

/// Fixed layer graph of a reference detector. The activation buffer has
/// layers.size() + 1 slots: slot i is the input of layer i, the last slot
/// holds the two logits. The mid-layer tap is slot `tap`.
struct Architecture {
  ArchId id;
  Shape3 input;
  std::vector<LayerSpec> layers;
  std::size_t tap = 0;
  std::size_t param_count = 0;

  Shape3 feature_shape() const { return layers[tap].in; }
  static const Architecture& get(ArchId id);
};

template <typename T>
using Activations = std::vector<std::vector<T>>;

/// Reverse-mode engine over a parameter vector of scalar type T. The float
/// instantiation serves training and attacks, the double instantiation the
/// finite-difference oracles; both run the same code.
template <typename T>
class Network {
 public:
  Network(const Architecture& arch, std::vector<T> params);

  const Architecture& arch() const { return *arch_; }
  std::span<const T> params() const { return params_; }
  std::vector<T>& mutable_params() { return params_; }

  /// Runs layers [first, last); acts[first] must be populated.
  void forward(Activations<T>& acts, std::size_t first, std::size_t last) const;
  Activations<T> forward(std::span<const T> input) const;

  /// On entry `grad` holds d/d acts[last]; on exit d/d acts[first].
  /// Parameter gradients are accumulated into `param_grad` when non-empty.
  void backward(const Activations<T>& acts, std::size_t first, std::size_t last,
                std::vector<T>& grad, std::span<T> param_grad = {}) const;

  /// Cross-entropy of two logits; writes d loss / d logits when asked.
  static T cross_entropy(std::span<const T> logits, int label,
                         std::span<T> dlogits = {});

  T loss(std::span<const T> input, int label) const;
  T loss_from_features(std::span<const T> features, int label) const;
  T weighted_features(std::span<const T> input, std::span<const T> weights) const;

  std::vector<T> grad_loss_wrt_input(std::span<const T> input, int label,
                                     T* loss_out = nullptr) const;
  std::vector<T> grad_loss_wrt_features(std::span<const T> input, int label) const;
  std::vector<T> grad_weighted_features_wrt_input(std::span<const T> input,
                                                  std::span<const T> weights,
                                                  T* value_out = nullptr) const;

  /// Per-sample loss; accumulates parameter gradients into `param_grad`.
  T accumulate_param_grad(std::span<const T> input, int label,
                          std::span<T> param_grad) const;

 private:
  const Architecture* arch_;
  std::vector<T> params_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace dufia
