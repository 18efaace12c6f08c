#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dufia/detector.hpp"
#include "dufia/frequency.hpp"
#include "dufia/tensor.hpp"

namespace dufia {

enum class ImportanceMode { None, Spatial, Frequency, Joint, Fia };

std::string_view to_string(ImportanceMode mode);
ImportanceMode parse_importance_mode(std::string_view name);

struct ImportanceConfig {
  int n_steps = 30;          // interpolation steps of the spatial branch
  int k_draws = 20;          // frequency-perturbed copies averaged
  FreqPerturbConfig freq{};  // p and sigma; the seed field is replaced per draw
  double fia_keep_prob = 0.9;
  int fia_ensemble = 30;
  bool normalize_branches = false;  // unit-L2 both branches before fusing
  std::uint64_t seed = 0;

  void validate() const;
};

struct ImportanceProvenance {
  std::string detector;  // Detector::fingerprint()
  std::string image;     // tensor_digest of the original image
  std::string config;

  bool operator==(const ImportanceProvenance&) const = default;
};

/// Per-unit weights over the mid-layer feature map of one detector.
struct ImportanceMap {
  Tensor3 weights;
  ImportanceMode mode = ImportanceMode::None;
  ImportanceProvenance provenance;
};

// Every operation below takes the clean image and nothing derived from an
// adversarial iterate: importance is a function of the original only.

/// Raw feature gradient at the original image.
ImportanceMap raw_importance(const Detector& detector, const Image& original, int label);

/// Mean feature gradient over the scaled inputs (i/N) x, i = 1..N.
ImportanceMap spatial_importance(const Detector& detector, const Image& original, int label,
                                 const ImportanceConfig& cfg);

/// Config used for frequency draw k (0-based).
FreqPerturbConfig frequency_member_config(const ImportanceConfig& cfg, int k);
ImportanceMap frequency_importance(const Detector& detector, const Image& original, int label,
                                   const ImportanceConfig& cfg);

/// Elementwise mean (a + b) / 2. Requires equal shapes and the same detector.
ImportanceMap fuse(const ImportanceMap& spatial, const ImportanceMap& frequency);
/// Rescales to unit L2 norm; all-zero maps are returned unchanged.
ImportanceMap normalized(const ImportanceMap& map);

std::uint64_t fia_member_seed(const ImportanceConfig& cfg, int k);
/// Elementwise Bernoulli(keep) mask; dropped elements set to 0.
Image fia_masked_input(const Image& image, double keep_prob, std::uint64_t seed);
ImportanceMap fia_importance(const Detector& detector, const Image& original, int label,
                             const ImportanceConfig& cfg);

/// NONE / SPATIAL / FREQUENCY / JOINT rows of the ablation study.
ImportanceMap ablation_importance(const Detector& detector, const Image& original, int label,
                                  ImportanceMode mode, const ImportanceConfig& cfg);

/// DFI1 container with dims (C, H, W).
void save_importance(const ImportanceMap& map, const std::filesystem::path& path);
Tensor3 load_importance_weights(const std::filesystem::path& path);

}  // namespace dufia
