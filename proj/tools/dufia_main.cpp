// dufia: train the detector zoo, craft adversarial sets, write reports.
//
// Exit codes: 0 success, 1 usage error, 2 missing prerequisite,
// 3 invariant violation (budget audit, training divergence).

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <mutex>

#include "dufia/errors.hpp"
#include "dufia/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kPrerequisite = 2, kInvariant = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DuFIA attacks and AIGI detector evaluation harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir, attack;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool quiet = false;
  auto* seed_opt = app.add_option("--seed", seed, "Override global_seed");
  app.add_option("--config", config_path, "Experiment config (key = value)")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory (DFK_OUT takes precedence)");
  app.add_option("--attack", attack, "Attack name for `attack` (default: all configured)");
  app.add_option("--jobs", jobs, "Worker threads for per-image work")->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", quiet, "No progress output");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"train", "Generate the dataset, train the zoo, write checkpoints"},
      {"attack", "Attack fake test images on the source detector"},
      {"matrix", "Transfer accuracy report"},
      {"robust", "Robustness to JPEG / blur / noise"},
      {"quality", "PSNR / SSIM report"},
      {"ablation", "Importance ablation report"},
      {"saliency", "Averaged spectrum saliency maps"},
      {"pipeline", "Everything above, in order"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  std::mutex log_mu;
  dufia::RunOptions opts;
  opts.jobs = jobs;
  if (!quiet) {
    opts.log = [&log_mu](const std::string& line) {
      std::lock_guard lock(log_mu);
      std::cerr << line << '\n';
    };
  }

  try {
    auto cfg = config_path.empty() ? dufia::ExperimentConfig{} : dufia::ExperimentConfig::load(config_path);
    if (*seed_opt) cfg.global_seed = seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (const char* env = std::getenv("DFK_OUT"); env && *env) cfg.output_dir = env;
    cfg.validate();

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "train") {
      dufia::cmd_train(cfg, opts);
    } else if (cmd == "attack") {
      if (attack.empty()) {
        for (const auto& a : cfg.attacks) dufia::cmd_attack(cfg, a, opts);
      } else {
        dufia::cmd_attack(cfg, attack, opts);
      }
    } else if (cmd == "matrix") {
      dufia::cmd_matrix(cfg, opts);
    } else if (cmd == "robust") {
      dufia::cmd_robust(cfg, opts);
    } else if (cmd == "quality") {
      dufia::cmd_quality(cfg, opts);
    } else if (cmd == "ablation") {
      dufia::cmd_ablation(cfg, opts);
    } else if (cmd == "saliency") {
      dufia::cmd_saliency(cfg, opts);
    } else {
      dufia::cmd_pipeline(cfg, opts);
    }
  } catch (const dufia::PrerequisiteError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kPrerequisite;
  } catch (const dufia::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kPrerequisite;
  } catch (const dufia::InvariantError& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kInvariant;
  } catch (const dufia::TrainingError& e) {
    std::cerr << "error: " << e.what() << " (epoch " << e.epoch() << ")\n";
    return kInvariant;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvariant;
  }
  return kOk;
}
