#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dufia/evaluate.hpp"
#include "dufia/experiment.hpp"

namespace dufia {

struct RunOptions {
  int jobs = 1;
  std::function<void(const std::string&)> log;  // progress lines; may be empty
};

// Output layout, relative to output_dir:
//   checkpoints/<id>.dfk            trained detectors
//   train.csv, train.md             training summary
//   adv/<attack>/adversarial.dfi    (N, C, H, W) float tensors
//   adv/<attack>/img_NNNN.png       16-bit PNG per image
//   adv/<attack>/img_NNNN.txt       sidecar: index, config, seed, loss trace
//   transfer.{csv,md} robust.{csv,md} quality.{csv,md} ablation.{csv,md}
//   saliency_<id>.png, saliency.csv
//   manifest.txt                    checksums of all of the above, timings

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, const std::string& id);
std::filesystem::path adversarial_dir(const std::filesystem::path& dir, const std::string& attack);

/// Global dataset indices of the first n fake (or real) test images; n = 0
/// means all of them.
std::vector<std::uint64_t> test_indices(const DatasetSpec& spec, int label, std::size_t n);
std::vector<Image> load_images(const DatasetSpec& spec, const std::vector<std::uint64_t>& indices);
std::vector<LabeledExample> test_split(const DatasetSpec& spec);

/// Throws InvariantError naming the first image that leaves the eps-ball or [0, 1].
void audit_budget(const std::vector<Image>& originals, const std::vector<Image>& adversarial,
                  double epsilon, const std::string& what);

ZooMember load_member(const ExperimentConfig& cfg, const std::string& id);
std::vector<ZooMember> load_zoo(const ExperimentConfig& cfg);
AdversarialSet load_adversarial_set(const ExperimentConfig& cfg, const std::string& attack);

struct AblationReport {
  std::string source_id;
  std::vector<std::string> modes{"none", "spatial", "frequency", "joint"};
  std::vector<std::string> targets;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<std::vector<double>>> accuracy;  // [mode][target][seed]
  std::size_t n_images = 0;  // per seed

  double mean(const std::string& mode, const std::string& target) const;
  /// Mean over targets and seeds.
  double mean(const std::string& mode) const;
};

AblationReport ablation_study(const ExperimentConfig& cfg, const ZooMember& source,
                              const std::vector<ZooMember>& targets, const RunOptions& opts);
std::string to_csv(const AblationReport& r);
std::string to_markdown(const AblationReport& r);

struct SaliencyReport {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> maps;  // normalized display maps, H*W each
  std::size_t height = 0, width = 0, n_images = 0;
  /// Mean absolute difference of two normalized maps.
  double distance(const std::string& a, const std::string& b) const;
};

SaliencyReport saliency_study(const ExperimentConfig& cfg, const std::vector<ZooMember>& zoo,
                              int jobs);
std::string to_csv(const SaliencyReport& r);

void cmd_train(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_attack(const ExperimentConfig& cfg, const std::string& attack, const RunOptions& opts);
void cmd_matrix(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_robust(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_quality(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_ablation(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_saliency(const ExperimentConfig& cfg, const RunOptions& opts);
/// train, every configured attack, then all reports.
void cmd_pipeline(const ExperimentConfig& cfg, const RunOptions& opts);

}  // namespace dufia
