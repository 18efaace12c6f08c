#include "dufia/detector.hpp"

#include <cmath>

#include "dufia/digest.hpp"
#include "dufia/errors.hpp"
#include "dufia/io.hpp"
#include "dufia/rng.hpp"

namespace dufia {
namespace {

std::string compute_fingerprint(ArchId arch, std::span<const float> params) {
  std::string tag(1, arch_char(arch));
  tag += sha256_hex(std::as_bytes(params)).substr(0, 16);
  return tag;
}

}  // namespace

Detector::Detector(ArchId arch, std::vector<float> parameters)
    : net_(Architecture::get(arch), std::move(parameters)),
      fingerprint_(compute_fingerprint(arch, net_.params())) {}

void Detector::check_input(const Tensor3& image) const {
  if (image.shape() != input_shape()) {
    throw ShapeError("image shape " + image.shape().str() + " does not match detector input " +
                     input_shape().str());
  }
}

Prediction Detector::forward(const Image& image) const {
  check_input(image);
  const auto acts = net_.forward(image.values());
  const auto& z = acts.back();
  Prediction p;
  p.logits = {z[0], z[1]};
  // softmax index 1 written as a logistic of the logit gap
  p.fake_probability = 1.0f / (1.0f + std::exp(z[0] - z[1]));
  return p;
}

double Detector::loss(const Image& image, int label) const {
  check_input(image);
  return net_.loss(image.values(), label);
}

FeatureMap Detector::features(const Image& image) const {
  check_input(image);
  Activations<float> acts(architecture().layers.size() + 1);
  acts[0].assign(image.values().begin(), image.values().end());
  net_.forward(acts, 0, mid_layer_id());
  return {Tensor3(feature_shape(), std::move(acts[mid_layer_id()])), mid_layer_id()};
}

Tensor3 Detector::grad_loss_wrt_input(const Image& image, int label,
                                      double* loss_out) const {
  check_input(image);
  float j = 0;
  auto g = net_.grad_loss_wrt_input(image.values(), label, &j);
  if (loss_out) *loss_out = j;
  return Tensor3(input_shape(), std::move(g));
}

Tensor3 Detector::grad_loss_wrt_features(const Image& image, int label) const {
  check_input(image);
  return Tensor3(feature_shape(), net_.grad_loss_wrt_features(image.values(), label));
}

Tensor3 Detector::grad_weighted_features_wrt_input(const Image& image,
                                                   const Tensor3& weights,
                                                   double* value_out) const {
  check_input(image);
  if (weights.shape() != feature_shape()) {
    throw ShapeError("importance weights " + weights.shape().str() +
                     " do not match feature shape " + feature_shape().str());
  }
  float v = 0;
  auto g = net_.grad_weighted_features_wrt_input(image.values(), weights.values(), &v);
  if (value_out) *value_out = v;
  return Tensor3(input_shape(), std::move(g));
}

double Detector::weighted_features(const Image& image, const Tensor3& weights) const {
  check_input(image);
  if (weights.shape() != feature_shape()) {
    throw ShapeError("importance weights " + weights.shape().str() +
                     " do not match feature shape " + feature_shape().str());
  }
  return net_.weighted_features(image.values(), weights.values());
}

double Detector::loss_from_features(const Tensor3& features, int label) const {
  if (features.shape() != feature_shape()) {
    throw ShapeError("injected features " + features.shape().str() + " do not match " +
                     feature_shape().str());
  }
  return net_.loss_from_features(features.values(), label);
}

Detector build_detector(ArchId arch, std::uint64_t init_seed) {
  const auto& a = Architecture::get(arch);
  std::vector<float> params(a.param_count, 0.0f);
  for (std::size_t li = 0; li < a.layers.size(); ++li) {
    const auto& l = a.layers[li];
    if (l.weight_count == 0) continue;
    const std::size_t fan_in = l.weight_count / l.out.channels;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    CounterRng rng(derive_seed(init_seed, "init", li));
    for (std::size_t i = 0; i < l.weight_count; ++i) {
      params[l.weight_offset + i] = static_cast<float>(rng.uniform(-bound, bound));
    }
  }
  return Detector(arch, std::move(params));
}

std::vector<std::uint8_t> encode_checkpoint(const Detector& detector) {
  ByteWriter w;
  w.bytes("DFK1");
  w.u8(static_cast<std::uint8_t>(arch_char(detector.arch())));
  w.u64(detector.parameters().size());
  for (float v : detector.parameters()) w.f32(v);
  return w.take();
}

Detector decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != "DFK1") throw IoError("not a DFK1 checkpoint");
  const char arch = static_cast<char>(r.u8());
  if (arch != 'A' && arch != 'B' && arch != 'C') throw IoError("checkpoint has an unknown arch byte");
  const ArchId id = parse_arch(std::string_view(&arch, 1));
  const std::uint64_t n = r.u64();
  if (n != Architecture::get(id).param_count) {
    throw IoError("checkpoint parameter count " + std::to_string(n) +
                  " does not match architecture " + std::string(1, arch));
  }
  if (r.remaining() != n * 4) throw IoError("checkpoint payload size mismatch");
  std::vector<float> params(n);
  for (auto& v : params) v = r.f32();
  return Detector(id, std::move(params));
}

void save_checkpoint(const Detector& detector, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(detector));
}

Detector load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace dufia
