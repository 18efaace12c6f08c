#include "dufia/importance.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "dufia/errors.hpp"
#include "dufia/io.hpp"
#include "dufia/rng.hpp"

namespace dufia {
namespace {

class MeanAccumulator {
 public:
  explicit MeanAccumulator(const Shape3& shape) : shape_(shape), sum_(shape.size(), 0.0) {}
  void add(const Tensor3& t) {
    for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += t[i];
    ++count_;
  }
  Tensor3 mean() const {
    Tensor3 out(shape_);
    const double n = static_cast<double>(count_);
    for (std::size_t i = 0; i < sum_.size(); ++i) out[i] = static_cast<float>(sum_[i] / n);
    return out;
  }

 private:
  Shape3 shape_;
  std::vector<double> sum_;
  int count_ = 0;
};

ImportanceProvenance provenance_of(const Detector& d, const Image& img, std::string config) {
  return {d.fingerprint(), tensor_digest(img), std::move(config)};
}

std::string describe(const ImportanceConfig& cfg, ImportanceMode mode) {
  std::ostringstream os;
  os << "mode=" << to_string(mode);
  switch (mode) {
    case ImportanceMode::Spatial: os << ";n=" << cfg.n_steps; break;
    case ImportanceMode::Frequency:
      os << ";k=" << cfg.k_draws << ";p=" << cfg.freq.p << ";sigma=" << cfg.freq.sigma
         << ";seed=" << cfg.seed;
      break;
    case ImportanceMode::Fia:
      os << ";keep=" << cfg.fia_keep_prob << ";ensemble=" << cfg.fia_ensemble
         << ";seed=" << cfg.seed;
      break;
    default: break;
  }
  return os.str();
}

}  // namespace

std::string_view to_string(ImportanceMode mode) {
  switch (mode) {
    case ImportanceMode::None: return "none";
    case ImportanceMode::Spatial: return "spatial";
    case ImportanceMode::Frequency: return "frequency";
    case ImportanceMode::Joint: return "joint";
    case ImportanceMode::Fia: return "fia";
  }
  return "?";
}

ImportanceMode parse_importance_mode(std::string_view name) {
  if (name == "none" || name == "NONE") return ImportanceMode::None;
  if (name == "spatial" || name == "SPATIAL") return ImportanceMode::Spatial;
  if (name == "frequency" || name == "FREQUENCY") return ImportanceMode::Frequency;
  if (name == "joint" || name == "JOINT") return ImportanceMode::Joint;
  if (name == "fia" || name == "FIA") return ImportanceMode::Fia;
  throw InvalidArgument("unknown importance mode '" + std::string(name) + "'");
}

void ImportanceConfig::validate() const {
  if (n_steps < 1) throw InvalidArgument("importance n_steps must be >= 1");
  if (k_draws < 1) throw InvalidArgument("importance k_draws must be >= 1");
  if (fia_ensemble < 1) throw InvalidArgument("fia_ensemble must be >= 1");
  if (!(fia_keep_prob > 0.0 && fia_keep_prob <= 1.0)) {
    throw InvalidArgument("fia_keep_prob must be in (0, 1]");
  }
  freq.validate();
}

ImportanceMap raw_importance(const Detector& detector, const Image& original, int label) {
  return {detector.grad_loss_wrt_features(original, label), ImportanceMode::None,
          provenance_of(detector, original, "mode=none")};
}

ImportanceMap spatial_importance(const Detector& detector, const Image& original, int label,
                                 const ImportanceConfig& cfg) {
  cfg.validate();
  MeanAccumulator acc(detector.feature_shape());
  Image scaled(original.shape());
  for (int i = 1; i <= cfg.n_steps; ++i) {
    const float s = static_cast<float>(i) / static_cast<float>(cfg.n_steps);
    for (std::size_t j = 0; j < scaled.size(); ++j) scaled[j] = s * original[j];
    acc.add(detector.grad_loss_wrt_features(scaled, label));
  }
  return {acc.mean(), ImportanceMode::Spatial,
          provenance_of(detector, original, describe(cfg, ImportanceMode::Spatial))};
}

FreqPerturbConfig frequency_member_config(const ImportanceConfig& cfg, int k) {
  FreqPerturbConfig f = cfg.freq;
  f.seed = derive_seed(cfg.seed, "frequency-member", static_cast<std::uint64_t>(k));
  return f;
}

ImportanceMap frequency_importance(const Detector& detector, const Image& original, int label,
                                   const ImportanceConfig& cfg) {
  cfg.validate();
  MeanAccumulator acc(detector.feature_shape());
  for (int k = 0; k < cfg.k_draws; ++k) {
    const Image perturbed = frequency_perturb(original, frequency_member_config(cfg, k));
    acc.add(detector.grad_loss_wrt_features(perturbed, label));
  }
  return {acc.mean(), ImportanceMode::Frequency,
          provenance_of(detector, original, describe(cfg, ImportanceMode::Frequency))};
}

ImportanceMap fuse(const ImportanceMap& spatial, const ImportanceMap& frequency) {
  if (spatial.weights.shape() != frequency.weights.shape()) {
    throw ShapeError("fuse: importance shapes differ (" + spatial.weights.shape().str() +
                     " vs " + frequency.weights.shape().str() + ")");
  }
  if (spatial.provenance.detector != frequency.provenance.detector ||
      spatial.provenance.image != frequency.provenance.image) {
    throw InvalidArgument("fuse: importance maps come from different detectors or images");
  }
  Tensor3 w(spatial.weights.shape());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = 0.5f * (spatial.weights[i] + frequency.weights[i]);
  }
  return {std::move(w), ImportanceMode::Joint,
          {spatial.provenance.detector, spatial.provenance.image,
           "joint(" + spatial.provenance.config + "," + frequency.provenance.config + ")"}};
}

ImportanceMap normalized(const ImportanceMap& map) {
  double sq = 0.0;
  for (float v : map.weights.values()) sq += static_cast<double>(v) * v;
  if (sq == 0.0) return map;
  ImportanceMap out = map;
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& v : out.weights.values()) v = static_cast<float>(v * inv);
  out.provenance.config += ";l2";
  return out;
}

std::uint64_t fia_member_seed(const ImportanceConfig& cfg, int k) {
  return derive_seed(cfg.seed, "fia-member", static_cast<std::uint64_t>(k));
}

Image fia_masked_input(const Image& image, double keep_prob, std::uint64_t seed) {
  Image out = image;
  CounterRng rng(seed);
  for (auto& v : out.values()) {
    if (!(rng.uniform() < keep_prob)) v = 0.0f;
  }
  return out;
}

ImportanceMap fia_importance(const Detector& detector, const Image& original, int label,
                             const ImportanceConfig& cfg) {
  cfg.validate();
  MeanAccumulator acc(detector.feature_shape());
  for (int k = 0; k < cfg.fia_ensemble; ++k) {
    const Image masked = fia_masked_input(original, cfg.fia_keep_prob, fia_member_seed(cfg, k));
    acc.add(detector.grad_loss_wrt_features(masked, label));
  }
  return {acc.mean(), ImportanceMode::Fia,
          provenance_of(detector, original, describe(cfg, ImportanceMode::Fia))};
}

ImportanceMap ablation_importance(const Detector& detector, const Image& original, int label,
                                  ImportanceMode mode, const ImportanceConfig& cfg) {
  switch (mode) {
    case ImportanceMode::None: return raw_importance(detector, original, label);
    case ImportanceMode::Spatial: return spatial_importance(detector, original, label, cfg);
    case ImportanceMode::Frequency: return frequency_importance(detector, original, label, cfg);
    case ImportanceMode::Joint: {
      auto s = spatial_importance(detector, original, label, cfg);
      auto f = frequency_importance(detector, original, label, cfg);
      if (cfg.normalize_branches) return fuse(normalized(s), normalized(f));
      return fuse(s, f);
    }
    case ImportanceMode::Fia: break;
  }
  throw InvalidArgument("ablation mode must be none, spatial, frequency or joint");
}

void save_importance(const ImportanceMap& map, const std::filesystem::path& path) {
  const auto& s = map.weights.shape();
  save_tensor_blob({{s.channels, s.height, s.width},
                    {map.weights.values().begin(), map.weights.values().end()}},
                   path);
}

Tensor3 load_importance_weights(const std::filesystem::path& path) {
  auto blob = load_tensor_blob(path);
  if (blob.dims.size() != 3) throw IoError("importance container must be rank 3");
  return Tensor3({blob.dims[0], blob.dims[1], blob.dims[2]}, std::move(blob.values));
}

}  // namespace dufia
