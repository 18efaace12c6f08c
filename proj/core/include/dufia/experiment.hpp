#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dufia/attacks.hpp"
#include "dufia/dataset.hpp"
#include "dufia/kv.hpp"
#include "dufia/network.hpp"
#include "dufia/train.hpp"

namespace dufia {

struct ZooEntry {
  ArchId arch = ArchId::A;
  std::uint64_t seed = 0;  // init and shuffling seed
  std::string id() const { return std::string(1, arch_char(arch)); }
};

/// Experiment description. Read from a key = value file; every key is
/// optional and unknown keys are rejected. See README for the schema.
struct ExperimentConfig {
  DatasetSpec dataset{};
  std::vector<ZooEntry> zoo{{ArchId::A, 0}, {ArchId::B, 0}, {ArchId::C, 0}};
  std::string source_id = "A";
  std::vector<std::string> attacks{"fgsm", "pgd", "mifgsm", "fia", "dufia"};
  AttackConfig attack{};                             // shared defaults
  std::map<std::string, AttackConfig> attack_overrides;  // keyed by attack name
  TrainConfig train{};                               // seed field unused; see ZooEntry
  std::size_t n_attack = 200;     // fake test images attacked; 0 = all
  bool attack_real = false;       // also attack real test images
  std::string robust_target = "B";
  std::vector<double> blur_sigmas{0.02, 0.32, 0.64};
  std::vector<std::uint64_t> ablation_seeds{0, 1, 2};
  std::size_t n_ablation = 100;   // fake test images per ablation seed
  std::size_t n_saliency = 200;   // test images averaged per saliency map
  std::uint64_t global_seed = 0;
  std::filesystem::path output_dir = "out";

  static ExperimentConfig from_kv(const KeyValues& kv);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Canonical record of every setting except output_dir.
  KeyValues to_kv() const;
  std::string hash() const;
  void validate() const;

  const AttackConfig& attack_config(const std::string& name) const;
  const ZooEntry& zoo_entry(const std::string& id) const;
};

/// Files, checksums and timings of a run directory, kept in manifest.txt.
class Manifest {
 public:
  static constexpr const char* kFileName = "manifest.txt";

  static Manifest load_or_new(const std::filesystem::path& dir);
  void set(const std::string& key, const std::string& value) { kv_.set(key, value); }
  /// Records the sha256 of dir/relative.
  void record_file(const std::filesystem::path& dir, const std::string& relative);
  void record_timing(const std::string& stage, double seconds);
  void save(const std::filesystem::path& dir) const;
  const KeyValues& entries() const { return kv_; }
  /// Relative path -> checksum for every recorded file.
  std::map<std::string, std::string> files() const;

 private:
  KeyValues kv_;
};

std::string version_string();

}  // namespace dufia
