#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dufia/attacks.hpp"
#include "dufia/dataset.hpp"
#include "dufia/detector.hpp"
#include "dufia/postprocess.hpp"

namespace dufia {

struct ZooMember {
  std::string id;  // "A", "B", ...
  Detector detector;
};

/// Attacked copies of a fixed list of originals, index-aligned.
struct AdversarialSet {
  std::string attack;
  std::vector<Image> images;
};

/// Config for image i of a set: the attack seed and the importance seed are
/// derived from (seed, i). The importance seed does not depend on the attack,
/// so every feature attack on image i sees the same random draws.
AttackConfig per_image_config(const AttackConfig& cfg, std::uint64_t seed, std::size_t i);

/// Runs `kind` on every image against the source.
std::vector<AttackResult> craft(AttackKind kind, const Detector& source,
                                const std::vector<Image>& originals, const AttackConfig& cfg,
                                std::uint64_t seed, int jobs = 1, int label = kLabelFake);
AdversarialSet to_set(std::string attack, const std::vector<AttackResult>& results);

inline constexpr const char* kUnattacked = "none";

struct TransferReport {
  std::string source_id;
  std::vector<std::string> targets;
  std::vector<std::string> attacks;  // attacks[0] == "none"
  std::vector<std::vector<double>> accuracy;  // [attack][target], fake-only sets
  std::vector<double> clean_balanced;         // [target], balanced real+fake set
  std::size_t n_images = 0;
  std::size_t n_balanced = 0;
  std::uint64_t seed = 0;

  double at(const std::string& attack, const std::string& target) const;
};

/// Evaluates every target on pre-crafted sets. The unattacked row uses
/// `originals`; `balanced` (may be empty) feeds clean_balanced.
TransferReport transfer_report(const std::string& source_id, const std::vector<ZooMember>& targets,
                               const std::vector<Image>& originals,
                               const std::vector<AdversarialSet>& sets,
                               const std::vector<LabeledExample>& balanced, std::uint64_t seed,
                               int jobs = 1);

/// Crafts each attack once per image on the source, then evaluates all targets.
TransferReport transfer_matrix(const ZooMember& source, const std::vector<ZooMember>& targets,
                               const std::vector<AttackKind>& attacks,
                               const std::vector<Image>& test_fakes, const AttackConfig& cfg,
                               std::uint64_t seed, const std::vector<LabeledExample>& balanced = {},
                               int jobs = 1);

struct RobustnessReport {
  std::string target_id;
  std::vector<PostProcess> processes;
  std::vector<std::string> attacks;           // attacks[0] == "none"
  std::vector<std::vector<double>> accuracy;  // [process][attack]
  std::size_t n_images = 0;
  std::uint64_t seed = 0;

  double at(ProcessKind kind, double strength, const std::string& attack) const;
};

/// Noise for image i is keyed on (seed, strength, i) only, so all sets see
/// identical noise on corresponding images.
RobustnessReport robustness_grid(const ZooMember& target, const std::vector<Image>& originals,
                                 const std::vector<AdversarialSet>& sets,
                                 const std::vector<PostProcess>& processes, std::uint64_t seed,
                                 int jobs = 1);

struct QualityRow {
  std::string attack;
  double mean_psnr = 0.0;
  double min_psnr = 0.0;
  double mean_ssim = 0.0;
  double max_linf = 0.0;
};

struct QualityReport {
  std::vector<QualityRow> rows;
  std::size_t n_images = 0;
  const QualityRow& row(const std::string& attack) const;
};

QualityReport quality_report(const std::vector<Image>& originals,
                             const std::vector<AdversarialSet>& sets);

std::string to_csv(const TransferReport& r);
std::string to_markdown(const TransferReport& r);
std::string to_csv(const RobustnessReport& r);
std::string to_markdown(const RobustnessReport& r);
std::string to_csv(const QualityReport& r);
std::string to_markdown(const QualityReport& r);

/// printf("%.*f") without locale surprises.
std::string fixed(double v, int precision);

}  // namespace dufia
