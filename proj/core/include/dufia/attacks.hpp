#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "dufia/detector.hpp"
#include "dufia/importance.hpp"
#include "dufia/kv.hpp"
#include "dufia/tensor.hpp"

namespace dufia {

struct AttackConfig {
  double epsilon = 8.0 / 255.0;
  double alpha = 0.8 / 255.0;  // 0 is accepted (tests only)
  int iterations = 10;
  double momentum = 1.0;
  bool normalize_grad = true;  // divide each gradient by its L1 norm
  bool random_start = false;
  /// +1 ascends sum(lambda * h) as written; -1 descends it.
  int feature_loss_sign = 1;
  ImportanceConfig importance{};
  std::uint64_t seed = 0;

  void validate() const;
  KeyValues to_kv() const;
  /// Reads the keys written by to_kv(); missing keys keep their defaults.
  static AttackConfig from_kv(const KeyValues& kv, std::string_view prefix = "");
};

struct AttackResult {
  std::string attack;
  Image adversarial;
  /// Objective at x_0 .. x_T: cross-entropy for the gradient-sign attacks,
  /// feature_loss_sign * sum(lambda * h) for feature attacks.
  std::vector<double> loss_trace;
  /// Source prediction on the adversarial differs from the one on the original.
  bool success = false;
  AttackConfig config;
  std::uint64_t seed = 0;
};

/// Hooks for instrumentation. Iterates include x_0.
class AttackObserver {
 public:
  virtual ~AttackObserver() = default;
  virtual void on_importance(const ImportanceMap& /*map*/) {}
  virtual void on_iterate(int /*t*/, const Image& /*x*/) {}
};

/// Input gradient of an objective; writes the objective at x to *value.
using GradientFn = std::function<Tensor3(const Image& x, double* value)>;

struct AscentSpec {
  double alpha = 0.0;
  int iterations = 1;
  bool use_momentum = false;  // g <- mu g + grad (grad / |grad|_1 when normalize)
  double momentum = 0.0;
  bool normalize = false;
  bool random_start = false;  // x_0 = clip(x + U(-eps, eps)) from derive_seed(seed, "random-start")
};

struct AscentTrace {
  Image final;
  std::vector<double> values;  // objective at x_0 .. x_{T-1}
};

/// Shared optimizer of every attack: x_{t+1} = P(x_t + alpha sign(d_t)), where
/// P clips to [0, 1] and then to the eps-ball, and d_t is the raw or
/// momentum-accumulated gradient.
AscentTrace sign_ascent(const Image& original, double epsilon, std::uint64_t seed,
                        const AscentSpec& spec, const GradientFn& grad,
                        AttackObserver* obs = nullptr);

/// Per-pixel bounds of B_inf(original, eps) intersected with [0, 1]. Rounded
/// inward so that (double)hi - (double)x <= eps holds exactly.
struct Box {
  std::vector<float> lo, hi;
};
Box budget_box(const Image& original, double epsilon);
/// Clip to [0, 1], then project onto the box.
void project(Image& x, const Box& box);
/// sign with sign(0) = 0.
inline float sign0(double v) { return v > 0.0 ? 1.0f : (v < 0.0 ? -1.0f : 0.0f); }

AttackResult fgsm(const Detector& detector, const Image& image, int label,
                  const AttackConfig& cfg, AttackObserver* obs = nullptr);
/// I-FGSM; starts from clip(x + U(-eps, eps)) when cfg.random_start.
AttackResult ifgsm(const Detector& detector, const Image& image, int label,
                   const AttackConfig& cfg, AttackObserver* obs = nullptr);
/// ifgsm with random_start forced on.
AttackResult pgd(const Detector& detector, const Image& image, int label,
                 const AttackConfig& cfg, AttackObserver* obs = nullptr);
AttackResult mifgsm(const Detector& detector, const Image& image, int label,
                    const AttackConfig& cfg, AttackObserver* obs = nullptr);

/// Momentum loop on sum(lambda * h_t) with a fixed, precomputed map. The map
/// must come from this detector and this image.
AttackResult feature_attack(const Detector& detector, const Image& image, int label,
                            const ImportanceMap& importance, const AttackConfig& cfg,
                            std::string name, AttackObserver* obs = nullptr);
AttackResult fia_attack(const Detector& detector, const Image& image, int label,
                        const AttackConfig& cfg, AttackObserver* obs = nullptr);
AttackResult dufia(const Detector& detector, const Image& image, int label,
                   const AttackConfig& cfg, AttackObserver* obs = nullptr);
AttackResult run_ablation(const Detector& detector, const Image& image, int label,
                          ImportanceMode mode, const AttackConfig& cfg,
                          AttackObserver* obs = nullptr);

enum class AttackKind { Fgsm, Ifgsm, Pgd, Mifgsm, Fia, Dufia };
AttackKind parse_attack(std::string_view name);
std::string_view to_string(AttackKind kind);
AttackResult run_attack(AttackKind kind, const Detector& detector, const Image& image,
                        int label, const AttackConfig& cfg, AttackObserver* obs = nullptr);

/// Plain-text sidecar for a persisted result (config, seed, loss trace).
std::string sidecar_text(const AttackResult& result);

}  // namespace dufia
