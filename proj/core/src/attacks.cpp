#include "dufia/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "dufia/errors.hpp"
#include "dufia/rng.hpp"

namespace dufia {
namespace {

using GradFn = GradientFn;
using ValueFn = std::function<double(const Image& x)>;
using Loop = AscentSpec;

bool predicts_fake(const Detector& d, const Image& x) {
  return d.forward(x).fake_probability > 0.5f;
}

AttackResult run_loop(std::string name, const Detector& detector, const Image& original,
                      const AttackConfig& cfg, const Loop& loop, const GradFn& grad,
                      const ValueFn& value, AttackObserver* obs) {
  AscentTrace trace = sign_ascent(original, cfg.epsilon, cfg.seed, loop, grad, obs);
  AttackResult r;
  r.attack = std::move(name);
  r.config = cfg;
  r.seed = cfg.seed;
  r.loss_trace = std::move(trace.values);
  r.loss_trace.push_back(value(trace.final));
  r.success = predicts_fake(detector, trace.final) != predicts_fake(detector, original);
  r.adversarial = std::move(trace.final);
  return r;
}

GradFn ce_grad(const Detector& d, int label) {
  return [&d, label](const Image& x, double* v) { return d.grad_loss_wrt_input(x, label, v); };
}
ValueFn ce_value(const Detector& d, int label) {
  return [&d, label](const Image& x) { return d.loss(x, label); };
}

void check_image(const Detector& d, const Image& image) {
  if (image.shape() != d.input_shape()) {
    throw ShapeError("attack input " + image.shape().str() + " does not match detector input " +
                     d.input_shape().str());
  }
}

}  // namespace

void AttackConfig::validate() const {
  if (!(epsilon > 0.0)) throw InvalidArgument("attack epsilon must be > 0");
  if (!(alpha >= 0.0)) throw InvalidArgument("attack alpha must be >= 0");
  if (iterations < 1) throw InvalidArgument("attack iterations must be >= 1");
  if (!(momentum >= 0.0)) throw InvalidArgument("attack momentum must be >= 0");
  if (feature_loss_sign != 1 && feature_loss_sign != -1) {
    throw InvalidArgument("feature_loss_sign must be +1 or -1");
  }
  importance.validate();
}

KeyValues AttackConfig::to_kv() const {
  KeyValues kv;
  kv.set("epsilon", epsilon);
  kv.set("alpha", alpha);
  kv.set("iterations", iterations);
  kv.set("momentum", momentum);
  kv.set("normalize_grad", normalize_grad);
  kv.set("random_start", random_start);
  kv.set("feature_loss_sign", feature_loss_sign);
  kv.set("seed", seed);
  kv.set("importance.n_steps", importance.n_steps);
  kv.set("importance.k_draws", importance.k_draws);
  kv.set("importance.p", importance.freq.p);
  kv.set("importance.sigma", importance.freq.sigma);
  kv.set("importance.fia_keep_prob", importance.fia_keep_prob);
  kv.set("importance.fia_ensemble", importance.fia_ensemble);
  kv.set("importance.normalize_branches", importance.normalize_branches);
  kv.set("importance.seed", importance.seed);
  return kv;
}

AttackConfig AttackConfig::from_kv(const KeyValues& kv, std::string_view prefix) {
  const std::string p(prefix);
  AttackConfig c;
  c.epsilon = kv.get_double(p + "epsilon", c.epsilon);
  c.alpha = kv.get_double(p + "alpha", c.alpha);
  c.iterations = static_cast<int>(kv.get_int(p + "iterations", c.iterations));
  c.momentum = kv.get_double(p + "momentum", c.momentum);
  c.normalize_grad = kv.get_bool(p + "normalize_grad", c.normalize_grad);
  c.random_start = kv.get_bool(p + "random_start", c.random_start);
  c.feature_loss_sign = static_cast<int>(kv.get_int(p + "feature_loss_sign", c.feature_loss_sign));
  c.seed = kv.get_u64(p + "seed", c.seed);
  auto& im = c.importance;
  im.n_steps = static_cast<int>(kv.get_int(p + "importance.n_steps", im.n_steps));
  im.k_draws = static_cast<int>(kv.get_int(p + "importance.k_draws", im.k_draws));
  im.freq.p = kv.get_double(p + "importance.p", im.freq.p);
  im.freq.sigma = kv.get_double(p + "importance.sigma", im.freq.sigma);
  im.fia_keep_prob = kv.get_double(p + "importance.fia_keep_prob", im.fia_keep_prob);
  im.fia_ensemble = static_cast<int>(kv.get_int(p + "importance.fia_ensemble", im.fia_ensemble));
  im.normalize_branches = kv.get_bool(p + "importance.normalize_branches", im.normalize_branches);
  im.seed = kv.get_u64(p + "importance.seed", im.seed);
  return c;
}

Box budget_box(const Image& original, double epsilon) {
  Box b;
  b.lo.resize(original.size());
  b.hi.resize(original.size());
  constexpr float inf = std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double x = original[i];
    float hi = static_cast<float>(x + epsilon);
    while (static_cast<double>(hi) - x > epsilon) hi = std::nextafter(hi, -inf);
    float lo = static_cast<float>(x - epsilon);
    while (x - static_cast<double>(lo) > epsilon) lo = std::nextafter(lo, inf);
    b.lo[i] = std::max(lo, 0.0f);
    b.hi[i] = std::min(hi, 1.0f);
  }
  return b;
}

void project(Image& x, const Box& box) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float v = std::clamp(x[i], 0.0f, 1.0f);
    x[i] = std::clamp(v, box.lo[i], box.hi[i]);
  }
}

AscentTrace sign_ascent(const Image& original, double epsilon, std::uint64_t seed,
                        const AscentSpec& spec, const GradientFn& grad, AttackObserver* obs) {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be > 0");
  if (spec.iterations < 1) throw InvalidArgument("iterations must be >= 1");
  const Box box = budget_box(original, epsilon);
  Image x = original;
  if (spec.random_start) {
    CounterRng rng(derive_seed(seed, "random-start"));
    for (auto& v : x.values()) v += static_cast<float>(rng.uniform(-epsilon, epsilon));
    project(x, box);
  }
  const float step = static_cast<float>(spec.alpha);

  AscentTrace out;
  out.values.reserve(spec.iterations);
  if (obs) obs->on_iterate(0, x);
  std::vector<double> g(x.size(), 0.0);
  for (int t = 0; t < spec.iterations; ++t) {
    double objective = 0.0;
    const Tensor3 d = grad(x, &objective);
    if (d.size() != x.size()) throw ShapeError("gradient does not match the input");
    out.values.push_back(objective);
    if (spec.use_momentum) {
      double scale = 1.0;
      if (spec.normalize) {
        double l1 = 0.0;
        for (float v : d.values()) l1 += std::fabs(static_cast<double>(v));
        scale = l1 > 0.0 ? 1.0 / l1 : 0.0;
      }
      for (std::size_t i = 0; i < x.size(); ++i) {
        g[i] = spec.momentum * g[i] + static_cast<double>(d[i]) * scale;
        x[i] += step * sign0(g[i]);
      }
    } else {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += step * sign0(d[i]);
    }
    project(x, box);
    if (obs) obs->on_iterate(t + 1, x);
  }
  out.final = std::move(x);
  return out;
}

AttackResult fgsm(const Detector& detector, const Image& image, int label,
                  const AttackConfig& cfg, AttackObserver* obs) {
  cfg.validate();
  check_image(detector, image);
  Loop loop;
  loop.alpha = cfg.epsilon;
  loop.iterations = 1;
  return run_loop("fgsm", detector, image, cfg, loop, ce_grad(detector, label),
                  ce_value(detector, label), obs);
}

AttackResult ifgsm(const Detector& detector, const Image& image, int label,
                   const AttackConfig& cfg, AttackObserver* obs) {
  cfg.validate();
  check_image(detector, image);
  Loop loop;
  loop.alpha = cfg.alpha;
  loop.iterations = cfg.iterations;
  loop.random_start = cfg.random_start;
  return run_loop(cfg.random_start ? "pgd" : "ifgsm", detector, image, cfg, loop,
                  ce_grad(detector, label), ce_value(detector, label), obs);
}

AttackResult pgd(const Detector& detector, const Image& image, int label,
                 const AttackConfig& cfg, AttackObserver* obs) {
  AttackConfig c = cfg;
  c.random_start = true;
  return ifgsm(detector, image, label, c, obs);
}

AttackResult mifgsm(const Detector& detector, const Image& image, int label,
                    const AttackConfig& cfg, AttackObserver* obs) {
  cfg.validate();
  check_image(detector, image);
  Loop loop;
  loop.alpha = cfg.alpha;
  loop.iterations = cfg.iterations;
  loop.use_momentum = true;
  loop.momentum = cfg.momentum;
  loop.normalize = cfg.normalize_grad;
  loop.random_start = cfg.random_start;
  return run_loop("mifgsm", detector, image, cfg, loop, ce_grad(detector, label),
                  ce_value(detector, label), obs);
}

AttackResult feature_attack(const Detector& detector, const Image& image, int /*label*/,
                            const ImportanceMap& importance, const AttackConfig& cfg,
                            std::string name, AttackObserver* obs) {
  cfg.validate();
  check_image(detector, image);
  if (importance.weights.shape() != detector.feature_shape()) {
    throw ShapeError("importance map " + importance.weights.shape().str() +
                     " does not match feature map " + detector.feature_shape().str());
  }
  if (importance.provenance.detector != detector.fingerprint() ||
      importance.provenance.image != tensor_digest(image)) {
    throw InvalidArgument("importance map was computed for a different detector or image");
  }
  Tensor3 w = importance.weights;
  if (cfg.feature_loss_sign < 0) {
    for (auto& v : w.values()) v = -v;
  }
  Loop loop;
  loop.alpha = cfg.alpha;
  loop.iterations = cfg.iterations;
  loop.use_momentum = true;
  loop.momentum = cfg.momentum;
  loop.normalize = cfg.normalize_grad;
  loop.random_start = cfg.random_start;
  GradFn grad = [&](const Image& x, double* v) {
    return detector.grad_weighted_features_wrt_input(x, w, v);
  };
  ValueFn value = [&](const Image& x) { return detector.weighted_features(x, w); };
  return run_loop(std::move(name), detector, image, cfg, loop, grad, value, obs);
}

AttackResult fia_attack(const Detector& detector, const Image& image, int label,
                        const AttackConfig& cfg, AttackObserver* obs) {
  cfg.validate();
  check_image(detector, image);
  const ImportanceMap map = fia_importance(detector, image, label, cfg.importance);
  if (obs) obs->on_importance(map);
  return feature_attack(detector, image, label, map, cfg, "fia", obs);
}

AttackResult run_ablation(const Detector& detector, const Image& image, int label,
                          ImportanceMode mode, const AttackConfig& cfg, AttackObserver* obs) {
  if (mode == ImportanceMode::Fia) {
    throw InvalidArgument("ablation mode must be none, spatial, frequency or joint");
  }
  cfg.validate();
  check_image(detector, image);
  const ImportanceMap map = ablation_importance(detector, image, label, mode, cfg.importance);
  if (obs) obs->on_importance(map);
  return feature_attack(detector, image, label, map, cfg,
                        "ablation-" + std::string(to_string(mode)), obs);
}

AttackResult dufia(const Detector& detector, const Image& image, int label,
                   const AttackConfig& cfg, AttackObserver* obs) {
  AttackResult r = run_ablation(detector, image, label, ImportanceMode::Joint, cfg, obs);
  r.attack = "dufia";
  return r;
}

AttackKind parse_attack(std::string_view name) {
  if (name == "fgsm") return AttackKind::Fgsm;
  if (name == "ifgsm") return AttackKind::Ifgsm;
  if (name == "pgd") return AttackKind::Pgd;
  if (name == "mifgsm") return AttackKind::Mifgsm;
  if (name == "fia") return AttackKind::Fia;
  if (name == "dufia") return AttackKind::Dufia;
  throw InvalidArgument("unknown attack '" + std::string(name) +
                        "' (expected fgsm, ifgsm, pgd, mifgsm, fia or dufia)");
}

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::Fgsm: return "fgsm";
    case AttackKind::Ifgsm: return "ifgsm";
    case AttackKind::Pgd: return "pgd";
    case AttackKind::Mifgsm: return "mifgsm";
    case AttackKind::Fia: return "fia";
    case AttackKind::Dufia: return "dufia";
  }
  return "?";
}

AttackResult run_attack(AttackKind kind, const Detector& detector, const Image& image,
                        int label, const AttackConfig& cfg, AttackObserver* obs) {
  switch (kind) {
    case AttackKind::Fgsm: return fgsm(detector, image, label, cfg, obs);
    case AttackKind::Ifgsm: return ifgsm(detector, image, label, cfg, obs);
    case AttackKind::Pgd: return pgd(detector, image, label, cfg, obs);
    case AttackKind::Mifgsm: return mifgsm(detector, image, label, cfg, obs);
    case AttackKind::Fia: return fia_attack(detector, image, label, cfg, obs);
    case AttackKind::Dufia: return dufia(detector, image, label, cfg, obs);
  }
  throw InvalidArgument("unknown attack kind");
}

std::string sidecar_text(const AttackResult& result) {
  KeyValues kv;
  kv.set("attack", result.attack);
  kv.set("seed", result.seed);
  kv.set("success", result.success);
  std::string trace;
  for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
    if (i) trace += ",";
    trace += format_double(result.loss_trace[i]);
  }
  kv.set("loss_trace", trace);
  kv.set("adversarial_digest", tensor_digest(result.adversarial));
  kv.merge(result.config.to_kv(), "config.");
  return kv.to_text();
}

}  // namespace dufia
