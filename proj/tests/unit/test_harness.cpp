#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dufia/digest.hpp"
#include "dufia/errors.hpp"
#include "dufia/experiment.hpp"
#include "dufia/io.hpp"
#include "dufia/pipeline.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace dufia {
namespace {

const char* kTinyConfig = R"(# small end-to-end run
dataset.n_train = 200
dataset.n_test = 40
train.epochs = 1
train.batch = 32
n_attack = 4
n_ablation = 2
n_saliency = 4
ablation_seeds = 0, 1
attack.importance.n_steps = 3
attack.importance.k_draws = 2
attack.importance.fia_ensemble = 3
)";

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" DUFIA_CLI_PATH "\" " + args + " -q > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::set<std::string> files_under(const fs::path& dir) {
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.insert(fs::relative(e.path(), dir).generic_string());
  }
  return out;
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

TEST(ExperimentConfigTest, DefaultsAndParse) {
  const ExperimentConfig d;
  EXPECT_NO_THROW(d.validate());
  EXPECT_EQ(d.zoo.size(), 3u);
  EXPECT_EQ(d.source_id, "A");
  EXPECT_EQ(d.robust_target, "B");
  EXPECT_EQ(d.attack.iterations, 10);

  const auto c = ExperimentConfig::from_kv(KeyValues::parse(kTinyConfig));
  EXPECT_EQ(c.dataset.n_train, 200);
  EXPECT_EQ(c.n_attack, 4u);
  EXPECT_EQ(c.ablation_seeds, (std::vector<std::uint64_t>{0, 1}));
  EXPECT_EQ(c.attack.importance.n_steps, 3);
  EXPECT_EQ(c.attack_config("dufia").importance.k_draws, 2);
  EXPECT_EQ(ExperimentConfig::from_kv(c.to_kv()).hash(), c.hash());
}

TEST(ExperimentConfigTest, PerAttackOverrides) {
  const auto c = ExperimentConfig::from_kv(KeyValues::parse(
      "attack.epsilon = 4/255\nattack.pgd.iterations = 5\nattack.fia.importance.fia_keep_prob = 0.7\n"));
  EXPECT_EQ(c.attack_config("pgd").iterations, 5);
  EXPECT_EQ(c.attack_config("pgd").epsilon, 4.0 / 255.0);
  EXPECT_EQ(c.attack_config("fgsm").iterations, 10);
  EXPECT_EQ(c.attack_config("fia").importance.fia_keep_prob, 0.7);
  EXPECT_EQ(c.attack_config("dufia").importance.fia_keep_prob, 0.9);
  EXPECT_EQ(ExperimentConfig::from_kv(c.to_kv()).to_kv().to_text(), c.to_kv().to_text());
}

TEST(ExperimentConfigTest, RejectsBadInput) {
  for (const char* text : {"bogus = 1\n", "attack.cw.iterations = 3\n", "attack.pgd.nope = 1\n",
                           "source = D\n", "zoo = A:0, A:1\n", "attacks = fgsm, cw\n",
                           "robust_target = Z\n", "train.batch = 0\n", "n_saliency = 0\n",
                           "attack.epsilon = 0\n", "dataset.n_test = -5\n", "ablation_seeds = \n"}) {
    EXPECT_THROW(ExperimentConfig::from_kv(KeyValues::parse(text)), std::invalid_argument) << text;
  }
}

TEST(ExperimentConfigTest, HashIgnoresOutputDir) {
  ExperimentConfig a, b;
  b.output_dir = "/elsewhere";
  EXPECT_EQ(a.hash(), b.hash());
  b.global_seed = 1;
  EXPECT_NE(a.hash(), b.hash());
  b = a;
  b.attack.alpha = 1.0 / 255.0;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(ManifestTest, RecordsFilesAndTimings) {
  const fs::path dir = testing::scratch_dir("manifest");
  write(dir / "a.txt", "abc");
  Manifest m = Manifest::load_or_new(dir);
  m.record_file(dir, "a.txt");
  m.record_timing("train", 1.25);
  m.save(dir);
  const Manifest back = Manifest::load_or_new(dir);
  EXPECT_EQ(back.files().at("a.txt"), sha256_hex(std::string_view("abc")));
  EXPECT_EQ(back.entries().get("timing.train.seconds"), "1.250");
  EXPECT_EQ(back.entries().get("version"), version_string());
}

TEST(PipelineHelpersTest, AuditBudget) {
  const Image x = testing::random_image({3, 32, 32}, 1, 0.2, 0.8);
  Image y = x;
  y[5] += 0.02f;
  EXPECT_NO_THROW(audit_budget({x}, {y}, 8.0 / 255.0, "t"));
  y[5] += 0.02f;
  EXPECT_THROW(audit_budget({x}, {y}, 8.0 / 255.0, "t"), InvariantError);
  EXPECT_THROW(audit_budget({x}, {}, 8.0 / 255.0, "t"), InvariantError);
}

TEST(PipelineHelpersTest, TestIndicesSelectLabel) {
  DatasetSpec spec;
  spec.n_train = 100;
  spec.n_test = 20;
  const auto fakes = test_indices(spec, kLabelFake, 0);
  EXPECT_EQ(fakes.size(), 10u);
  for (auto k : fakes) {
    EXPECT_GE(k, 100u);
    EXPECT_EQ(generate_example(spec, k).label, kLabelFake);
  }
  EXPECT_EQ(test_indices(spec, kLabelReal, 3).size(), 3u);
}

class CliTest : public ::testing::Test {
 protected:
  static fs::path root_;
  static fs::path config_;
  static int first_, second_;

  static void SetUpTestSuite() {
    root_ = testing::scratch_dir("cli");
    config_ = root_ / "tiny.cfg";
    write(config_, kTinyConfig);
    fs::create_directories(root_ / "run1");
    fs::create_directories(root_ / "run2");
    first_ = run_cli("pipeline --config " + config_.string() + " --out " + (root_ / "run1").string());
    second_ = run_cli("pipeline --config " + config_.string(), "DFK_OUT=" + (root_ / "run2").string());
  }
};
fs::path CliTest::root_;
fs::path CliTest::config_;
int CliTest::first_ = -1;
int CliTest::second_ = -1;

TEST_F(CliTest, PipelineSucceeds) {
  EXPECT_EQ(first_, 0);
  EXPECT_EQ(second_, 0);
}

TEST_F(CliTest, ManifestCoversEveryFile) {
  const fs::path dir = root_ / "run1";
  const Manifest m = Manifest::load_or_new(dir);
  const auto recorded = m.files();
  std::set<std::string> on_disk = files_under(dir);
  on_disk.erase(Manifest::kFileName);
  std::set<std::string> listed;
  for (const auto& [rel, sum] : recorded) {
    listed.insert(rel);
    ASSERT_TRUE(fs::exists(dir / rel)) << rel;
    EXPECT_EQ(sha256_file(dir / rel), sum) << rel;
  }
  EXPECT_EQ(listed, on_disk);
  for (const char* f : {"checkpoints/A.dfk", "checkpoints/B.dfk", "checkpoints/C.dfk", "train.csv",
                        "transfer.csv", "robust.csv", "quality.csv", "ablation.csv", "saliency.csv",
                        "saliency_A.png", "adv/dufia/adversarial.dfi", "adv/fgsm/img_0003.png"}) {
    EXPECT_TRUE(recorded.count(f)) << f;
  }
  EXPECT_EQ(m.entries().get("config_hash"), ExperimentConfig::load(config_).hash());
  for (const char* stage : {"train", "attack.fgsm", "attack.dufia", "matrix", "robust", "quality",
                            "ablation", "saliency"}) {
    EXPECT_TRUE(m.entries().has(std::string("timing.") + stage + ".seconds")) << stage;
  }
}

TEST_F(CliTest, RerunIsByteIdentical) {
  const auto a = Manifest::load_or_new(root_ / "run1").files();
  const auto b = Manifest::load_or_new(root_ / "run2").files();
  EXPECT_EQ(a, b);
  EXPECT_EQ(read_text(root_ / "run1/checkpoints/A.dfk"), read_text(root_ / "run2/checkpoints/A.dfk"));
}

TEST_F(CliTest, SidecarsParse) {
  const fs::path dir = root_ / "run1/adv/dufia";
  const auto kv = KeyValues::parse(read_text(dir / "img_0001.txt"));
  EXPECT_EQ(kv.get("attack"), "dufia");
  EXPECT_EQ(split_list(kv.get("loss_trace")).size(), 11u);
  const auto cfg = AttackConfig::from_kv(kv, "config.");
  EXPECT_EQ(cfg.importance.k_draws, 2);
  const auto images = unstack_tensors(load_tensor_blob(dir / "adversarial.dfi"));
  ASSERT_EQ(images.size(), 4u);
  EXPECT_EQ(kv.get("adversarial_digest"), tensor_digest(images[1]));
  const auto hdr = testing::read_png_header(dir / "img_0001.png");
  EXPECT_EQ(hdr.width, 32u);
  EXPECT_EQ(hdr.bit_depth, 16);
}

TEST_F(CliTest, ReportShapes) {
  const fs::path dir = root_ / "run1";
  EXPECT_EQ(count_lines(read_text(dir / "ablation.csv")), 1u + 4 * 2);  // black-box targets B, C
  EXPECT_EQ(count_lines(read_text(dir / "transfer.csv")), 1u + 6 * 3 + 3);
  EXPECT_EQ(count_lines(read_text(dir / "robust.csv")), 1u + 10 * 6);
  EXPECT_EQ(count_lines(read_text(dir / "quality.csv")), 1u + 5);
  EXPECT_EQ(count_lines(read_text(dir / "saliency.csv")), 1u + 3);
}

TEST_F(CliTest, SingleStageRerunKeepsOtherFiles) {
  const fs::path dir = root_ / "stage";
  fs::create_directories(dir);
  for (const char* f : {"checkpoints", "adv"}) fs::copy(root_ / "run1" / f, dir / f, fs::copy_options::recursive);
  fs::copy_file(root_ / "run1/manifest.txt", dir / "manifest.txt");
  EXPECT_EQ(run_cli("quality --config " + config_.string() + " --out " + dir.string()), 0);
  EXPECT_EQ(read_text(dir / "quality.csv"), read_text(root_ / "run1/quality.csv"));
  const auto files = Manifest::load_or_new(dir).files();
  EXPECT_TRUE(files.count("adv/pgd/adversarial.dfi"));
  EXPECT_TRUE(files.count("quality.md"));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("train --jobs 0"), 1);
  EXPECT_EQ(run_cli("train --config " + (root_ / "nope.cfg").string()), 1);
  const fs::path bad = root_ / "bad.cfg";
  write(bad, "bogus = 3\n");
  EXPECT_EQ(run_cli("train --config " + bad.string() + " --out " + root_.string()), 1);
  EXPECT_EQ(run_cli("attack --attack cw --config " + config_.string() + " --out " + (root_ / "run1").string()), 1);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST_F(CliTest, MissingOutputDirWritesNothing) {
  const fs::path missing = root_ / "missing";
  EXPECT_EQ(run_cli("train --config " + config_.string() + " --out " + missing.string()), 2);
  EXPECT_FALSE(fs::exists(missing));
  EXPECT_EQ(run_cli("pipeline --config " + config_.string(), "DFK_OUT=" + missing.string()), 2);
  EXPECT_FALSE(fs::exists(missing));
  // DFK_OUT wins over --out.
  EXPECT_EQ(run_cli("train --config " + config_.string() + " --out " + (root_ / "run1").string(),
                    "DFK_OUT=" + missing.string()),
            2);
  EXPECT_FALSE(fs::exists(missing));
}

TEST_F(CliTest, MissingPrerequisites) {
  const fs::path empty = root_ / "empty";
  fs::create_directories(empty);
  const std::string base = " --config " + config_.string() + " --out " + empty.string();
  EXPECT_EQ(run_cli("attack --attack fgsm" + base), 2);
  EXPECT_EQ(run_cli("matrix" + base), 2);
  EXPECT_EQ(run_cli("saliency" + base), 2);
  fs::create_directories(empty / "checkpoints");
  fs::copy_file(root_ / "run1/checkpoints/A.dfk", empty / "checkpoints/A.dfk");
  fs::copy_file(root_ / "run1/checkpoints/B.dfk", empty / "checkpoints/B.dfk");
  fs::copy_file(root_ / "run1/checkpoints/C.dfk", empty / "checkpoints/C.dfk");
  EXPECT_EQ(run_cli("quality" + base), 2);  // no adversarial sets yet
  write(empty / "checkpoints/C.dfk", "garbage");
  EXPECT_EQ(run_cli("saliency" + base), 2);
}

TEST_F(CliTest, TamperedAdversarialSetIsAnInvariantViolation) {
  const fs::path dir = root_ / "tampered";
  fs::create_directories(dir);
  fs::copy(root_ / "run1/checkpoints", dir / "checkpoints", fs::copy_options::recursive);
  fs::copy(root_ / "run1/adv", dir / "adv", fs::copy_options::recursive);
  const fs::path dfi = dir / "adv/fgsm/adversarial.dfi";
  TensorBlob blob = load_tensor_blob(dfi);
  blob.values[100] = blob.values[100] > 0.5f ? 0.0f : 1.0f;
  save_tensor_blob(blob, dfi);
  EXPECT_EQ(run_cli("quality --config " + config_.string() + " --out " + dir.string()), 3);
}

TEST_F(CliTest, SeedOverrideChangesAttacks) {
  const fs::path dir = root_ / "seeded";
  fs::create_directories(dir);
  fs::copy(root_ / "run1/checkpoints", dir / "checkpoints", fs::copy_options::recursive);
  EXPECT_EQ(run_cli("attack --attack pgd --seed 5 --config " + config_.string() + " --out " + dir.string()), 0);
  EXPECT_NE(read_text(dir / "adv/pgd/adversarial.dfi"), read_text(root_ / "run1/adv/pgd/adversarial.dfi"));
  EXPECT_EQ(run_cli("attack --attack fgsm --seed 5 --config " + config_.string() + " --out " + dir.string()), 0);
  EXPECT_EQ(read_text(dir / "adv/fgsm/adversarial.dfi"), read_text(root_ / "run1/adv/fgsm/adversarial.dfi"));
}

}  // namespace
}  // namespace dufia
