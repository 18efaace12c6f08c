// Acceptance run: two full default pipelines plus direct checks. Prints one
// PASS/FAIL line per criterion and exits non-zero if any fails.
//
//   dufia_acceptance --work DIR [--criteria 1,2,...]

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "dufia/attacks.hpp"
#include "dufia/dct.hpp"
#include "dufia/evaluate.hpp"
#include "dufia/experiment.hpp"
#include "dufia/metrics.hpp"
#include "dufia/pipeline.hpp"
#include "dufia/rng.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace dufia;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kEps = 8.0 / 255.0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail.clear();
    pass = false;
    if (++failures <= 5) {
      detail += (detail.empty() ? "" : "; ") + why;
    } else if (failures == 6) {
      detail += "; ...";
    }
  }
  int failures = 0;
  void note(const std::string& s) {
    if (pass) detail += (detail.empty() ? "" : "; ") + s;
  }
};

std::string num(double v, int p = 4) { return fixed(v, p); }
std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

// Rows of a CSV as header-keyed maps.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::string line;
  std::getline(in, line);
  const auto header = split_list(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_list(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(row);
  }
  return rows;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool exact_budget(const Image& x, const Image& x0, double eps) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= 0.0f && x[i] <= 1.0f)) return false;
    if (std::fabs(double(x[i]) - double(x0[i])) > eps) return false;
  }
  return true;
}

struct Counter : AttackObserver {
  const Image* original = nullptr;
  std::size_t iterates = 0, violations = 0;
  void on_iterate(int, const Image& x) override {
    ++iterates;
    violations += !exact_budget(x, *original, kEps);
  }
};

// ---- criteria --------------------------------------------------------------

Outcome gradient_oracle(const std::vector<ZooMember>& zoo) {
  Outcome o;
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const auto& m : zoo) {
    const Detector& d = m.detector;
    const Image x = testing::random_image(d.input_shape(), 11);
    const Tensor3 w = testing::random_tensor(d.feature_shape(), 12, 0.01);
    for (auto target : {testing::FdTarget::LossWrtInput, testing::FdTarget::LossWrtFeatures,
                        testing::FdTarget::WeightedWrtInput}) {
      const auto checks = testing::finite_difference_check(d, x, kLabelFake, target, 20, 13, &w);
      if (checks.size() != 20) o.fail(m.id + ": only " + std::to_string(checks.size()) + " coordinates");
      for (const auto& c : checks) {
        worst = std::max(worst, c.rel_error);
        if (!(c.rel_error < 1e-4)) {
          o.fail(m.id + " coordinate " + std::to_string(c.coordinate) + " rel " + num(c.rel_error, 8));
        }
      }
    }
  }
  const double dt = seconds_since(t0);
  if (dt >= 30.0) o.fail("runtime " + num(dt, 1) + " s");
  o.note("max rel error " + sci(worst) + ", " + num(dt, 1) + " s");
  return o;
}

double energy(const Tensor3& t) {
  double s = 0.0;
  for (float v : t.values()) s += double(v) * v;
  return s;
}

Outcome dct_correctness() {
  Outcome o;
  double worst_rt = 0.0, worst_parseval = 0.0, worst_naive = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Image x = testing::random_image({3, 32, 32}, 100 + s);
    const Spectrum y = dct2(x);
    worst_rt = std::max(worst_rt, max_abs_diff(idct2(y), x));
    const double ex = energy(x);
    worst_parseval = std::max(worst_parseval, std::fabs(energy(y) - ex) / ex);
  }
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Image x = testing::random_image({3, 8, 8}, 500 + s, -1.0, 1.0);
    const Spectrum y = dct2(x);
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<double> plane(64);
      for (std::size_t i = 0; i < 64; ++i) plane[i] = x[c * 64 + i];
      const auto ref = testing::naive_dct2(plane, 8, 8);
      for (std::size_t i = 0; i < 64; ++i) worst_naive = std::max(worst_naive, std::fabs(y[c * 64 + i] - ref[i]));
    }
  }
  if (!(worst_rt < 1e-5)) o.fail("roundtrip " + sci(worst_rt));
  if (!(worst_naive < 1e-6)) o.fail("naive oracle " + sci(worst_naive));
  if (!(worst_parseval < 1e-5)) o.fail("parseval " + sci(worst_parseval));
  o.note("roundtrip " + sci(worst_rt) + ", naive " + sci(worst_naive) +
         ", parseval rel " + sci(worst_parseval));
  return o;
}

Outcome chain_identity(const std::vector<ZooMember>& zoo) {
  Outcome o;
  double worst = 0.0;
  for (const auto& m : zoo) {
    const Detector& d = m.detector;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Image x = testing::random_image(d.input_shape(), 900 + s);
      const Tensor3 lambda = d.grad_loss_wrt_features(x, kLabelFake);
      const double diff = max_abs_diff(d.grad_weighted_features_wrt_input(x, lambda),
                                       d.grad_loss_wrt_input(x, kLabelFake));
      worst = std::max(worst, diff);
    }
  }
  if (!(worst < 1e-5)) o.fail("max diff " + sci(worst));
  o.note("max diff " + sci(worst));
  return o;
}

Outcome budget_invariants(const ExperimentConfig& cfg, const Detector& source) {
  Outcome o;
  const auto originals = load_images(cfg.dataset, test_indices(cfg.dataset, kLabelFake, 200));
  const double floor = psnr_floor(kEps);
  double min_psnr = INFINITY;
  std::size_t iterates = 0, violations = 0, results = 0;
  auto check = [&](const std::string& name, std::size_t expected_iterates, auto&& run) {
    for (std::size_t i = 0; i < originals.size(); ++i) {
      Counter c;
      c.original = &originals[i];
      const AttackResult r = run(originals[i], per_image_config(cfg.attack, 77, i), &c);
      ++results;
      if (c.iterates != expected_iterates) {
        o.fail(name + " reported " + std::to_string(c.iterates) + " iterates");
      }
      iterates += c.iterates;
      violations += c.violations;
      if (!exact_budget(r.adversarial, originals[i], kEps)) ++violations;
      const double p = psnr(originals[i], r.adversarial);
      min_psnr = std::min(min_psnr, p);
      // The floor is met with equality when every pixel moves by eps; allow
      // only rounding of the log.
      if (!(p >= floor - 1e-6)) o.fail(name + " image " + std::to_string(i) + " psnr " + num(p, 6));
    }
  };
  for (AttackKind k : {AttackKind::Fgsm, AttackKind::Ifgsm, AttackKind::Pgd, AttackKind::Mifgsm,
                       AttackKind::Fia, AttackKind::Dufia}) {
    const std::size_t steps = k == AttackKind::Fgsm ? 1 : static_cast<std::size_t>(cfg.attack.iterations);
    check(std::string(to_string(k)), steps + 1, [&](const Image& x, const AttackConfig& c, AttackObserver* obs) {
      return run_attack(k, source, x, kLabelFake, c, obs);
    });
  }
  for (ImportanceMode m : {ImportanceMode::None, ImportanceMode::Spatial, ImportanceMode::Frequency,
                           ImportanceMode::Joint}) {
    check("ablation-" + std::string(to_string(m)), static_cast<std::size_t>(cfg.attack.iterations) + 1,
          [&](const Image& x, const AttackConfig& c, AttackObserver* obs) {
            return run_ablation(source, x, kLabelFake, m, c, obs);
          });
  }
  if (violations) o.fail(std::to_string(violations) + " iterates outside the budget");
  o.note(std::to_string(results) + " results, " + std::to_string(iterates) +
         " iterates checked, min PSNR " + num(min_psnr, 4) + " dB (floor " + num(floor, 4) + ")");
  return o;
}

Outcome collapse_lattice(const ExperimentConfig& cfg, const Detector& d) {
  Outcome o;
  const auto xs = load_images(cfg.dataset, test_indices(cfg.dataset, kLabelFake, 10));
  AttackConfig base = cfg.attack;
  AttackConfig one = base;
  one.iterations = 1;
  one.alpha = one.epsilon;
  AttackConfig plain = base;
  plain.momentum = 0.0;
  plain.normalize_grad = false;
  AttackConfig deg = base;
  deg.importance.freq.p = 0.0;
  deg.importance.freq.sigma = 0.0;
  deg.importance.k_draws = 1;
  deg.importance.n_steps = 1;
  deg.importance.fia_keep_prob = 1.0;
  deg.importance.fia_ensemble = 1;
  int mismatches = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto seeded = [&](AttackConfig c) {
      c.seed = derive_seed(5, "lattice", i);
      c.importance.seed = derive_seed(6, "lattice", i);
      return c;
    };
    if (fgsm(d, xs[i], 1, seeded(base)).adversarial != ifgsm(d, xs[i], 1, seeded(one)).adversarial) {
      ++mismatches;
      o.fail("fgsm != ifgsm(T=1) on image " + std::to_string(i));
    }
    if (ifgsm(d, xs[i], 1, seeded(base)).adversarial != mifgsm(d, xs[i], 1, seeded(plain)).adversarial) {
      ++mismatches;
      o.fail("ifgsm != mifgsm(mu=0) on image " + std::to_string(i));
    }
    const Image a = dufia::dufia(d, xs[i], 1, seeded(deg)).adversarial;
    if (a != fia_attack(d, xs[i], 1, seeded(deg)).adversarial ||
        a != run_ablation(d, xs[i], 1, ImportanceMode::None, seeded(deg)).adversarial) {
      ++mismatches;
      o.fail("dufia/fia/none differ on image " + std::to_string(i));
    }
  }
  if (!mismatches) o.note("3 identities bitwise on 10 images");
  return o;
}

double cell(const std::vector<std::map<std::string, std::string>>& rows,
            const std::map<std::string, std::string>& key, const std::string& column) {
  for (const auto& r : rows) {
    bool match = true;
    for (const auto& [k, v] : key) match = match && r.count(k) && r.at(k) == v;
    if (match) return parse_double(r.at(column));
  }
  std::string what;
  for (const auto& [k, v] : key) what += k + "=" + v + " ";
  throw std::runtime_error("no row " + what);
}

double timing(const KeyValues& manifest, const std::string& stage) {
  return parse_double(manifest.get("timing." + stage + ".seconds"));
}

Outcome white_box(const fs::path& run) {
  Outcome o;
  const auto rows = read_csv(run / "transfer.csv");
  const KeyValues manifest = KeyValues::load(run / Manifest::kFileName);
  const double clean = cell(rows, {{"target", "A"}, {"attack", "none"}, {"set", "fake"}}, "accuracy");
  if (!(clean >= 0.95)) o.fail("unattacked accuracy " + num(clean));
  std::string summary = "unattacked " + num(clean);
  for (const std::string a : {"mifgsm", "dufia"}) {
    const double acc = cell(rows, {{"target", "A"}, {"attack", a}, {"set", "fake"}}, "accuracy");
    summary += ", " + a + " " + num(acc);
    if (!(acc <= 0.10)) o.fail(a + " leaves white-box accuracy at " + num(acc) + " (> 0.10)");
    const double t = timing(manifest, "attack." + a);
    if (!(t < 180.0)) o.fail(a + " took " + num(t, 1) + " s");
    summary += " (" + num(t, 1) + " s)";
  }
  o.note(summary);
  if (!o.pass) o.detail += " [" + summary + "]";
  return o;
}

Outcome ablation_ordering(const fs::path& run) {
  Outcome o;
  const auto rows = read_csv(run / "ablation.csv");
  std::map<std::string, double> mean;
  for (const std::string m : {"none", "spatial", "frequency", "joint"}) {
    double s = 0.0;
    for (const std::string t : {"B", "C"}) s += cell(rows, {{"mode", m}, {"target", t}}, "mean_accuracy");
    mean[m] = s / 2.0;
    if (cell(rows, {{"mode", m}, {"target", "B"}}, "n_seeds") != 3.0) o.fail("not 3 seeds");
  }
  if (!(mean["joint"] <= mean["none"])) o.fail("joint " + num(mean["joint"]) + " > none " + num(mean["none"]));
  const double bound = std::min(mean["spatial"], mean["frequency"]) + 0.05;
  if (!(mean["joint"] <= bound)) o.fail("joint " + num(mean["joint"]) + " > " + num(bound));
  o.note("none " + num(mean["none"]) + ", spatial " + num(mean["spatial"]) + ", frequency " +
         num(mean["frequency"]) + ", joint " + num(mean["joint"]));
  return o;
}

Outcome quality_ordering(const fs::path& run) {
  Outcome o;
  const auto rows = read_csv(run / "quality.csv");
  const double pd = cell(rows, {{"attack", "dufia"}}, "mean_psnr_db");
  const double pm = cell(rows, {{"attack", "mifgsm"}}, "mean_psnr_db");
  const double sd = cell(rows, {{"attack", "dufia"}}, "mean_ssim");
  const double sm = cell(rows, {{"attack", "mifgsm"}}, "mean_ssim");
  if (!(pd >= pm - 0.5)) o.fail("psnr dufia " + num(pd) + " < mifgsm " + num(pm) + " - 0.5");
  if (!(sd >= sm - 0.01)) o.fail("ssim dufia " + num(sd) + " < mifgsm " + num(sm) + " - 0.01");
  o.note("psnr dufia " + num(pd, 3) + " / mifgsm " + num(pm, 3) + ", ssim dufia " + num(sd) +
         " / mifgsm " + num(sm));
  return o;
}

Outcome robustness_sanity(const fs::path& run, const ExperimentConfig& cfg) {
  Outcome o;
  const auto rows = read_csv(run / "robust.csv");
  const auto procs = default_processes(cfg.blur_sigmas);
  std::vector<std::string> attacks{"none"};
  for (const auto& a : cfg.attacks) attacks.push_back(a);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : rows) seen.insert({r.at("process") + ":" + r.at("strength"), r.at("attack")});
  for (const std::string p : {"identity:-", "jpeg:90", "jpeg:60", "jpeg:30", "blur:0.02", "blur:0.32",
                              "blur:0.64", "noise:1/255", "noise:8/255", "noise:64/255"}) {
    for (const auto& a : attacks) {
      if (!seen.count({p, a})) o.fail("missing cell " + p + " " + a);
    }
  }
  auto at = [&](const std::string& proc, const std::string& strength, const std::string& attack) {
    return cell(rows, {{"process", proc}, {"strength", strength}, {"attack", attack}}, "accuracy");
  };
  const double clean = at("identity", "-", "none");
  const double jpeg = at("jpeg", "90", "none");
  if (!(std::fabs(jpeg - clean) <= 0.05)) o.fail("jpeg90 " + num(jpeg) + " vs clean " + num(clean));
  for (const auto& a : cfg.attacks) {
    for (const auto& [p, s] : {std::pair<std::string, std::string>{"jpeg", "90"}, {"blur", "0.02"}}) {
      if (!(at(p, s, a) <= at(p, s, "none"))) {
        o.fail(a + " at " + p + " " + s + ": " + num(at(p, s, a)) + " > " + num(at(p, s, "none")));
      }
    }
  }
  o.note(std::to_string(rows.size()) + " cells, clean " + num(clean) + ", jpeg90 " + num(jpeg));
  (void)procs;
  return o;
}

Outcome reproducibility(const fs::path& run1, const fs::path& run2, double suite_seconds) {
  Outcome o;
  const auto a = Manifest::load_or_new(run1).files();
  const auto b = Manifest::load_or_new(run2).files();
  if (a.empty()) o.fail("empty manifest");
  std::size_t compared = 0;
  for (const auto& [rel, sum] : a) {
    const auto ext = fs::path(rel).extension().string();
    if (ext != ".csv" && ext != ".md" && ext != ".dfi" && ext != ".dfk" && ext != ".png" && ext != ".txt") continue;
    if (!b.count(rel)) {
      o.fail(rel + " missing in the second run");
      continue;
    }
    ++compared;
    if (read_bytes(run1 / rel) != read_bytes(run2 / rel)) o.fail(rel + " differs");
  }
  if (a.size() != b.size()) o.fail("manifests list different files");
  if (!(suite_seconds < 900.0)) o.fail("wall-clock " + num(suite_seconds, 1) + " s");
  o.note(std::to_string(compared) + " files byte-identical, acceptance wall-clock " + num(suite_seconds, 1) + " s");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string work;
  bool reuse = false;
  app.add_option("--work", work, "Scratch directory for the two runs")->required();
  app.add_flag("--reuse", reuse, "Keep existing run directories (no timing for criterion 10)");
  CLI11_PARSE(app, argc, argv);

  const auto t0 = Clock::now();
  const fs::path root(work);
  const fs::path run1 = root / "run1", run2 = root / "run2";
  RunOptions opts;
  opts.log = [](const std::string& line) { std::cerr << line << '\n'; };

  std::vector<std::pair<std::string, Outcome>> out;
  auto record = [&](const std::string& name, auto&& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o.fail(std::string("error: ") + e.what());
    }
    out.emplace_back(name, o);
    std::cerr << "[acceptance] " << name << (o.pass ? " PASS" : " FAIL") << '\n';
  };

  ExperimentConfig cfg;
  try {
    for (const auto& dir : {run1, run2}) {
      if (reuse && fs::exists(dir / Manifest::kFileName)) continue;
      fs::remove_all(dir);
      fs::create_directories(dir);
      cfg.output_dir = dir;
      cmd_pipeline(cfg, opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "pipeline failed: " << e.what() << '\n';
    return 2;
  }
  cfg.output_dir = run1;
  const std::vector<ZooMember> zoo = load_zoo(cfg);
  const Detector& source = zoo.front().detector;

  record("gradient oracle", [&] { return gradient_oracle(zoo); });
  record("dct correctness", [&] { return dct_correctness(); });
  record("chain identity", [&] { return chain_identity(zoo); });
  record("budget invariants", [&] { return budget_invariants(cfg, source); });
  record("collapse lattice", [&] { return collapse_lattice(cfg, source); });
  record("white-box effectiveness", [&] { return white_box(run1); });
  record("ablation ordering", [&] { return ablation_ordering(run1); });
  record("quality ordering", [&] { return quality_ordering(run1); });
  record("robustness sanity", [&] { return robustness_sanity(run1, cfg); });
  const double elapsed = seconds_since(t0);
  record("reproducibility", [&] {
    Outcome o = reproducibility(run1, run2, reuse ? 0.0 : elapsed);
    if (reuse) o.fail("--reuse skips the timed runs");
    return o;
  });

  int failed = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& [name, o] = out[i];
    std::printf("criterion %zu: %s  %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(out.size()) - failed, out.size());
  return failed ? 1 : 0;
}
