#include "dufia/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include "dufia/errors.hpp"
#include "dufia/frequency.hpp"
#include "dufia/io.hpp"
#include "dufia/metrics.hpp"
#include "dufia/parallel.hpp"
#include "dufia/rng.hpp"

namespace fs = std::filesystem;

namespace dufia {
namespace {

class Stage {
 public:
  Stage(const ExperimentConfig& cfg, std::string name, const RunOptions& opts)
      : cfg_(cfg), name_(std::move(name)), opts_(opts), start_(std::chrono::steady_clock::now()) {
    if (!fs::is_directory(cfg.output_dir)) {
      throw PrerequisiteError("output directory '" + cfg.output_dir.string() +
                              "' does not exist; create it first");
    }
    manifest_ = Manifest::load_or_new(cfg.output_dir);
    manifest_.set("config_hash", cfg.hash());
    log("start");
  }

  const fs::path& dir() const { return cfg_.output_dir; }
  void log(const std::string& msg) const {
    if (opts_.log) opts_.log("[" + name_ + "] " + msg);
  }
  void write(const std::string& relative, std::span<const std::uint8_t> bytes) {
    const fs::path p = dir() / relative;
    fs::create_directories(p.parent_path());
    write_file_atomic(p, bytes);
    manifest_.record_file(dir(), relative);
  }
  void write_text(const std::string& relative, const std::string& text) {
    write(relative, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  }
  /// For files written by other helpers (PNG export).
  void adopt(const std::string& relative) { manifest_.record_file(dir(), relative); }
  void finish() {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
    manifest_.record_timing(name_, dt.count());
    manifest_.save(dir());
    log("done in " + fixed(dt.count(), 1) + " s");
  }

 private:
  const ExperimentConfig& cfg_;
  std::string name_;
  const RunOptions& opts_;
  std::chrono::steady_clock::time_point start_;
  Manifest manifest_;
};

std::string image_name(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%04zu.%s", i, ext);
  return buf;
}

std::uint64_t craft_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.global_seed, "craft"); }

std::vector<Image> attacked_originals(const ExperimentConfig& cfg) {
  return load_images(cfg.dataset, test_indices(cfg.dataset, kLabelFake, cfg.n_attack));
}

std::vector<AdversarialSet> load_sets(const ExperimentConfig& cfg) {
  std::vector<AdversarialSet> sets;
  for (const auto& a : cfg.attacks) sets.push_back(load_adversarial_set(cfg, a));
  return sets;
}

std::string join_indices(const std::vector<std::uint64_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

void persist_results(Stage& stage, const std::string& folder, const std::vector<AttackResult>& results,
                     const std::vector<std::uint64_t>& indices) {
  std::vector<Image> images;
  images.reserve(results.size());
  for (const auto& r : results) images.push_back(r.adversarial);
  stage.write(folder + "/adversarial.dfi", encode_tensor_blob(stack_tensors(images)));
  KeyValues index;
  index.set("n", static_cast<std::uint64_t>(indices.size()));
  index.set("indices", join_indices(indices));
  stage.write_text(folder + "/indices.txt", index.to_text());
  for (std::size_t i = 0; i < results.size(); ++i) {
    const std::string png = folder + "/" + image_name(i, "png");
    write_png16_rgb(results[i].adversarial, stage.dir() / png);
    stage.adopt(png);
    stage.write_text(folder + "/" + image_name(i, "txt"),
                     "index = " + std::to_string(indices[i]) + "\n" + sidecar_text(results[i]));
  }
}

}  // namespace

fs::path checkpoint_path(const fs::path& dir, const std::string& id) {
  return dir / "checkpoints" / (id + ".dfk");
}

fs::path adversarial_dir(const fs::path& dir, const std::string& attack) {
  return dir / "adv" / attack;
}

std::vector<std::uint64_t> test_indices(const DatasetSpec& spec, int label, std::size_t n) {
  std::vector<std::uint64_t> out;
  const auto n_train = static_cast<std::uint64_t>(spec.n_train);
  for (std::uint64_t j = 0; j < static_cast<std::uint64_t>(spec.n_test); ++j) {
    if (static_cast<int>(j % 2) != label) continue;
    out.push_back(n_train + j);
    if (n != 0 && out.size() == n) break;
  }
  return out;
}

std::vector<Image> load_images(const DatasetSpec& spec, const std::vector<std::uint64_t>& indices) {
  std::vector<Image> out;
  out.reserve(indices.size());
  for (auto k : indices) out.push_back(generate_example(spec, k).image);
  return out;
}

std::vector<LabeledExample> test_split(const DatasetSpec& spec) {
  std::vector<LabeledExample> out;
  for (std::int64_t j = 0; j < spec.n_test; ++j) {
    out.push_back(generate_example(spec, static_cast<std::uint64_t>(spec.n_train + j)));
  }
  return out;
}

void audit_budget(const std::vector<Image>& originals, const std::vector<Image>& adversarial,
                  double epsilon, const std::string& what) {
  if (originals.size() != adversarial.size()) {
    throw InvariantError(what + ": " + std::to_string(adversarial.size()) + " images for " +
                         std::to_string(originals.size()) + " originals");
  }
  for (std::size_t i = 0; i < originals.size(); ++i) {
    if (adversarial[i].shape() != originals[i].shape()) {
      throw InvariantError(what + ": image " + std::to_string(i) + " has the wrong shape");
    }
    if (!in_unit_range(adversarial[i])) {
      throw InvariantError(what + ": image " + std::to_string(i) + " leaves [0, 1]");
    }
    const double d = max_abs_diff(adversarial[i], originals[i]);
    if (d > epsilon) {
      throw InvariantError(what + ": image " + std::to_string(i) + " exceeds the budget (" +
                           format_double(d) + " > " + format_double(epsilon) + ")");
    }
  }
}

ZooMember load_member(const ExperimentConfig& cfg, const std::string& id) {
  cfg.zoo_entry(id);
  const fs::path p = checkpoint_path(cfg.output_dir, id);
  if (!fs::exists(p)) {
    throw PrerequisiteError("missing checkpoint " + p.string() + "; run `dufia train` first");
  }
  return {id, load_checkpoint(p)};
}

std::vector<ZooMember> load_zoo(const ExperimentConfig& cfg) {
  std::vector<ZooMember> zoo;
  for (const auto& e : cfg.zoo) zoo.push_back(load_member(cfg, e.id()));
  return zoo;
}

AdversarialSet load_adversarial_set(const ExperimentConfig& cfg, const std::string& attack) {
  const fs::path p = adversarial_dir(cfg.output_dir, attack) / "adversarial.dfi";
  if (!fs::exists(p)) {
    throw PrerequisiteError("missing adversarial set " + p.string() + "; run `dufia attack --attack " +
                            attack + "` first");
  }
  AdversarialSet s{attack, unstack_tensors(load_tensor_blob(p))};
  audit_budget(attacked_originals(cfg), s.images, cfg.attack_config(attack).epsilon,
               "adversarial set '" + attack + "'");
  return s;
}

double AblationReport::mean(const std::string& mode, const std::string& target) const {
  const auto m = static_cast<std::size_t>(std::find(modes.begin(), modes.end(), mode) - modes.begin());
  const auto t = static_cast<std::size_t>(std::find(targets.begin(), targets.end(), target) - targets.begin());
  if (m >= modes.size() || t >= targets.size()) throw InvalidArgument("no ablation cell " + mode + "/" + target);
  double s = 0.0;
  for (double v : accuracy[m][t]) s += v;
  return s / static_cast<double>(accuracy[m][t].size());
}

double AblationReport::mean(const std::string& mode) const {
  double s = 0.0;
  for (const auto& t : targets) s += mean(mode, t);
  return s / static_cast<double>(targets.size());
}

AblationReport ablation_study(const ExperimentConfig& cfg, const ZooMember& source,
                              const std::vector<ZooMember>& targets, const RunOptions& opts) {
  AblationReport r;
  r.source_id = source.id;
  r.seeds = cfg.ablation_seeds;
  for (const auto& t : targets) r.targets.push_back(t.id);
  r.accuracy.assign(r.modes.size(), std::vector<std::vector<double>>(targets.size()));
  const auto pool = test_indices(cfg.dataset, kLabelFake, 0);
  const std::size_t n = std::min(cfg.n_ablation, pool.size());
  r.n_images = n;
  const AttackConfig& acfg = cfg.attack_config("dufia");
  for (std::uint64_t s : cfg.ablation_seeds) {
    // Each seed draws its own image subset and its own importance randomness.
    const auto order = shuffled_indices(pool.size(), derive_seed(cfg.global_seed, "ablation-subset"),
                                        static_cast<int>(s));
    std::vector<std::uint64_t> chosen;
    for (std::size_t i = 0; i < n; ++i) chosen.push_back(pool[order[i]]);
    const auto originals = load_images(cfg.dataset, chosen);
    const std::uint64_t seed = derive_seed(cfg.global_seed, "ablation", s);
    for (std::size_t m = 0; m < r.modes.size(); ++m) {
      const ImportanceMode mode = parse_importance_mode(r.modes[m]);
      std::vector<Image> adv(n);
      parallel_for(n, opts.jobs, [&](std::size_t i) {
        adv[i] = run_ablation(source.detector, originals[i], kLabelFake, mode,
                              per_image_config(acfg, seed, i))
                     .adversarial;
      });
      audit_budget(originals, adv, acfg.epsilon, "ablation " + r.modes[m]);
      for (std::size_t t = 0; t < targets.size(); ++t) {
        r.accuracy[m][t].push_back(accuracy(targets[t].detector, adv, kLabelFake, 0.5, opts.jobs));
      }
      if (opts.log) opts.log("[ablation] seed " + std::to_string(s) + " mode " + r.modes[m] + " done");
    }
  }
  return r;
}

std::string to_csv(const AblationReport& r) {
  std::ostringstream os;
  os << "source,mode,target,n_seeds,n_images_per_seed,mean_accuracy";
  for (auto s : r.seeds) os << ",seed_" << s;
  os << '\n';
  for (std::size_t m = 0; m < r.modes.size(); ++m) {
    for (std::size_t t = 0; t < r.targets.size(); ++t) {
      os << r.source_id << ',' << r.modes[m] << ',' << r.targets[t] << ',' << r.seeds.size() << ','
         << r.n_images << ',' << fixed(r.mean(r.modes[m], r.targets[t]), 6);
      for (double v : r.accuracy[m][t]) os << ',' << fixed(v, 6);
      os << '\n';
    }
  }
  return os.str();
}

std::string to_markdown(const AblationReport& r) {
  std::ostringstream os;
  os << "# Importance ablation (source " << r.source_id << ")\n\n"
     << "Black-box accuracy on attacked fake test images, mean over " << r.seeds.size()
     << " seeds of " << r.n_images << " images each. All rows share the DuFIA optimizer; only "
        "the importance map changes.\n\n| Importance |";
  for (const auto& t : r.targets) os << ' ' << t << " |";
  os << "\n|---|";
  for (std::size_t t = 0; t < r.targets.size(); ++t) os << "---|";
  os << '\n';
  for (const auto& m : r.modes) {
    os << "| " << m << " |";
    for (const auto& t : r.targets) os << ' ' << fixed(r.mean(m, t), 4) << " |";
    os << '\n';
  }
  return os.str();
}

double SaliencyReport::distance(const std::string& a, const std::string& b) const {
  const auto ia = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), a) - ids.begin());
  const auto ib = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), b) - ids.begin());
  if (ia >= ids.size() || ib >= ids.size()) throw InvalidArgument("no saliency map " + a + "/" + b);
  double s = 0.0;
  for (std::size_t i = 0; i < maps[ia].size(); ++i) s += std::fabs(maps[ia][i] - maps[ib][i]);
  return s / static_cast<double>(maps[ia].size());
}

SaliencyReport saliency_study(const ExperimentConfig& cfg, const std::vector<ZooMember>& zoo,
                              int jobs) {
  SaliencyReport r;
  std::vector<LabeledExample> examples;
  const auto n = std::min<std::size_t>(cfg.n_saliency, static_cast<std::size_t>(cfg.dataset.n_test));
  for (std::size_t j = 0; j < n; ++j) {
    examples.push_back(generate_example(cfg.dataset, static_cast<std::uint64_t>(cfg.dataset.n_train) + j));
  }
  r.n_images = n;
  for (const auto& m : zoo) {
    std::vector<Spectrum> spectra(n);
    parallel_for(n, jobs, [&](std::size_t i) {
      spectra[i] = spectrum_saliency(m.detector, examples[i].image, examples[i].label);
    });
    r.ids.push_back(m.id);
    r.maps.push_back(saliency_display_map(spectra));
    r.height = m.detector.input_shape().height;
    r.width = m.detector.input_shape().width;
  }
  return r;
}

std::string to_csv(const SaliencyReport& r) {
  std::ostringstream os;
  os << "a,b,n_images,l1_distance\n";
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    for (std::size_t j = i + 1; j < r.ids.size(); ++j) {
      os << r.ids[i] << ',' << r.ids[j] << ',' << r.n_images << ','
         << fixed(r.distance(r.ids[i], r.ids[j]), 6) << '\n';
    }
  }
  return os.str();
}

void cmd_train(const ExperimentConfig& cfg, const RunOptions& opts) {
  Stage stage(cfg, "train", opts);
  const Dataset data = generate_dataset(cfg.dataset);
  stage.log("dataset: " + std::to_string(data.train.size()) + " train, " +
            std::to_string(data.test.size()) + " test");
  std::vector<std::optional<Detector>> trained(cfg.zoo.size());
  std::vector<double> last_loss(cfg.zoo.size(), 0.0);
  parallel_for(cfg.zoo.size(), opts.jobs, [&](std::size_t i) {
    const ZooEntry& e = cfg.zoo[i];
    TrainConfig tc = cfg.train;
    tc.seed = e.seed;
    try {
      trained[i] = train(build_detector(e.arch, e.seed), data.train, tc, [&](const EpochStats& s) {
        last_loss[i] = s.mean_loss;
        stage.log(e.id() + " epoch " + std::to_string(s.epoch) + " loss " + fixed(s.mean_loss, 4));
      });
    } catch (const TrainingError& err) {
      throw TrainingError("training " + e.id() + " (seed " + std::to_string(e.seed) +
                              ") failed: " + err.what(),
                          err.epoch());
    }
  });
  std::ostringstream csv, md;
  csv << "id,arch,seed,epochs,params,final_train_loss,test_accuracy,fingerprint\n";
  md << "# Detector zoo\n\nTest accuracy on " << data.test.size()
     << " balanced held-out images.\n\n| Detector | Seed | Params | Final loss | Test accuracy |\n"
        "|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < cfg.zoo.size(); ++i) {
    const ZooEntry& e = cfg.zoo[i];
    const Detector& d = *trained[i];
    stage.write(("checkpoints/" + e.id() + ".dfk"), encode_checkpoint(d));
    const double acc = accuracy(d, data.test);
    csv << e.id() << ',' << e.id() << ',' << e.seed << ',' << cfg.train.epochs << ','
        << d.parameters().size() << ',' << fixed(last_loss[i], 6) << ',' << fixed(acc, 6) << ','
        << d.fingerprint() << '\n';
    md << "| " << e.id() << " | " << e.seed << " | " << d.parameters().size() << " | "
       << fixed(last_loss[i], 4) << " | " << fixed(acc, 4) << " |\n";
    stage.log(e.id() + " test accuracy " + fixed(acc, 4));
  }
  stage.write_text("train.csv", csv.str());
  stage.write_text("train.md", md.str());
  stage.finish();
}

void cmd_attack(const ExperimentConfig& cfg, const std::string& attack, const RunOptions& opts) {
  const AttackKind kind = parse_attack(attack);
  Stage stage(cfg, "attack." + attack, opts);
  const ZooMember source = load_member(cfg, cfg.source_id);
  const AttackConfig& acfg = cfg.attack_config(attack);
  auto run = [&](int label, const std::string& folder) {
    const auto indices = test_indices(cfg.dataset, label, cfg.n_attack);
    const auto originals = load_images(cfg.dataset, indices);
    const auto results = craft(kind, source.detector, originals, acfg, craft_seed(cfg), opts.jobs, label);
    std::vector<Image> adv;
    for (const auto& r : results) adv.push_back(r.adversarial);
    audit_budget(originals, adv, acfg.epsilon, attack);
    persist_results(stage, folder, results, indices);
    stage.log(std::to_string(results.size()) + " images -> " + folder);
  };
  run(kLabelFake, "adv/" + attack);
  if (cfg.attack_real) run(kLabelReal, "adv/" + attack + "_real");
  stage.finish();
}

void cmd_matrix(const ExperimentConfig& cfg, const RunOptions& opts) {
  Stage stage(cfg, "matrix", opts);
  const auto zoo = load_zoo(cfg);
  const auto sets = load_sets(cfg);
  const auto report = transfer_report(cfg.source_id, zoo, attacked_originals(cfg), sets,
                                      test_split(cfg.dataset), craft_seed(cfg), opts.jobs);
  stage.write_text("transfer.csv", to_csv(report));
  stage.write_text("transfer.md", to_markdown(report));
  stage.finish();
}

void cmd_robust(const ExperimentConfig& cfg, const RunOptions& opts) {
  Stage stage(cfg, "robust", opts);
  const ZooMember target = load_member(cfg, cfg.robust_target);
  const auto sets = load_sets(cfg);
  const auto report = robustness_grid(target, attacked_originals(cfg), sets,
                                      default_processes(cfg.blur_sigmas),
                                      derive_seed(cfg.global_seed, "robust"), opts.jobs);
  stage.write_text("robust.csv", to_csv(report));
  stage.write_text("robust.md", to_markdown(report));
  stage.finish();
}

void cmd_quality(const ExperimentConfig& cfg, const RunOptions& opts) {
  Stage stage(cfg, "quality", opts);
  const auto report = quality_report(attacked_originals(cfg), load_sets(cfg));
  stage.write_text("quality.csv", to_csv(report));
  stage.write_text("quality.md", to_markdown(report));
  stage.finish();
}

void cmd_ablation(const ExperimentConfig& cfg, const RunOptions& opts) {
  Stage stage(cfg, "ablation", opts);
  const auto zoo = load_zoo(cfg);
  std::vector<ZooMember> targets;
  const ZooMember* source = nullptr;
  for (const auto& m : zoo) {
    if (m.id == cfg.source_id) {
      source = &m;
    } else {
      targets.push_back(m);
    }
  }
  if (targets.empty()) throw InvalidArgument("ablation needs at least one target besides the source");
  const auto report = ablation_study(cfg, *source, targets, opts);
  stage.write_text("ablation.csv", to_csv(report));
  stage.write_text("ablation.md", to_markdown(report));
  stage.finish();
}

void cmd_saliency(const ExperimentConfig& cfg, const RunOptions& opts) {
  Stage stage(cfg, "saliency", opts);
  const auto zoo = load_zoo(cfg);
  const auto report = saliency_study(cfg, zoo, opts.jobs);
  for (std::size_t i = 0; i < report.ids.size(); ++i) {
    std::vector<std::uint8_t> px(report.maps[i].size());
    for (std::size_t j = 0; j < px.size(); ++j) {
      px[j] = static_cast<std::uint8_t>(std::lround(255.0 * report.maps[i][j]));
    }
    const std::string name = "saliency_" + report.ids[i] + ".png";
    write_png8_gray(px, report.width, report.height, stage.dir() / name);
    stage.adopt(name);
  }
  stage.write_text("saliency.csv", to_csv(report));
  stage.finish();
}

void cmd_pipeline(const ExperimentConfig& cfg, const RunOptions& opts) {
  cmd_train(cfg, opts);
  for (const auto& a : cfg.attacks) cmd_attack(cfg, a, opts);
  cmd_matrix(cfg, opts);
  cmd_robust(cfg, opts);
  cmd_quality(cfg, opts);
  cmd_ablation(cfg, opts);
  cmd_saliency(cfg, opts);
}

}  // namespace dufia
