#include "dufia/experiment.hpp"

#include <algorithm>
#include <set>

#include "dufia/digest.hpp"
#include "dufia/errors.hpp"
#include "dufia/evaluate.hpp"
#include "dufia/io.hpp"

#ifndef DUFIA_VERSION
#define DUFIA_VERSION "0.0.0"
#endif

namespace dufia {
namespace {

const std::vector<std::string> kAttackNames{"fgsm", "ifgsm", "pgd", "mifgsm", "fia", "dufia"};

std::set<std::string> attack_keys() {
  std::set<std::string> keys;
  const KeyValues defaults = AttackConfig{}.to_kv();
  for (const auto& [k, v] : defaults.entries()) keys.insert(k);
  return keys;
}

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + xs[i];
  return out;
}

template <typename T, typename F>
std::string join_with(const std::vector<T>& xs, F f) {
  std::vector<std::string> s;
  for (const auto& x : xs) s.push_back(f(x));
  return join(s);
}

std::size_t to_count(std::int64_t v, const char* key) {
  if (v < 0) throw InvalidArgument(std::string(key) + " must be >= 0");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::string version_string() { return DUFIA_VERSION; }

ExperimentConfig ExperimentConfig::from_kv(const KeyValues& kv) {
  static const std::set<std::string> plain{
      "dataset.seed", "dataset.n_train", "dataset.n_test", "dataset.artifact_lo",
      "dataset.artifact_hi", "zoo", "source", "attacks", "train.epochs", "train.lr",
      "train.momentum", "train.batch", "train.clip_norm", "n_attack", "attack_real",
      "robust_target", "blur_sigmas", "ablation_seeds", "n_ablation", "n_saliency",
      "global_seed", "output_dir"};
  const auto akeys = attack_keys();
  for (const auto& [key, value] : kv.entries()) {
    if (plain.count(key)) continue;
    if (key.rfind("attack.", 0) == 0) {
      std::string rest = key.substr(7);
      if (akeys.count(rest)) continue;
      const auto dot = rest.find('.');
      if (dot != std::string::npos &&
          std::find(kAttackNames.begin(), kAttackNames.end(), rest.substr(0, dot)) !=
              kAttackNames.end() &&
          akeys.count(rest.substr(dot + 1))) {
        continue;
      }
    }
    throw InvalidArgument("unknown config key '" + key + "'");
  }

  ExperimentConfig c;
  auto& d = c.dataset;
  d.seed = kv.get_u64("dataset.seed", d.seed);
  d.n_train = kv.get_int("dataset.n_train", d.n_train);
  d.n_test = kv.get_int("dataset.n_test", d.n_test);
  d.artifact_lo = static_cast<float>(kv.get_double("dataset.artifact_lo", d.artifact_lo));
  d.artifact_hi = static_cast<float>(kv.get_double("dataset.artifact_hi", d.artifact_hi));

  if (kv.has("zoo")) {
    c.zoo.clear();
    for (const auto& item : split_list(kv.get("zoo"))) {
      const auto colon = item.find(':');
      ZooEntry e;
      e.arch = parse_arch(item.substr(0, colon));
      if (colon != std::string::npos) e.seed = static_cast<std::uint64_t>(parse_int(item.substr(colon + 1)));
      c.zoo.push_back(e);
    }
  }
  c.source_id = kv.get_or("source", c.source_id);
  if (kv.has("attacks")) c.attacks = split_list(kv.get("attacks"));

  // Shared attack settings first, then per-attack keys on top of them.
  KeyValues base = c.attack.to_kv();
  for (const auto& k : akeys) {
    if (kv.has("attack." + k)) base.set(k, kv.get("attack." + k));
  }
  c.attack = AttackConfig::from_kv(base);
  for (const auto& name : kAttackNames) {
    KeyValues merged = base;
    bool any = false;
    for (const auto& k : akeys) {
      const std::string key = "attack." + name + "." + k;
      if (kv.has(key)) {
        merged.set(k, kv.get(key));
        any = true;
      }
    }
    if (any) c.attack_overrides[name] = AttackConfig::from_kv(merged);
  }

  auto& t = c.train;
  t.epochs = static_cast<int>(kv.get_int("train.epochs", t.epochs));
  t.lr = kv.get_double("train.lr", t.lr);
  t.momentum = kv.get_double("train.momentum", t.momentum);
  t.batch = to_count(kv.get_int("train.batch", static_cast<std::int64_t>(t.batch)), "train.batch");
  t.clip_norm = kv.get_double("train.clip_norm", t.clip_norm);

  c.n_attack = to_count(kv.get_int("n_attack", static_cast<std::int64_t>(c.n_attack)), "n_attack");
  c.attack_real = kv.get_bool("attack_real", c.attack_real);
  c.robust_target = kv.get_or("robust_target", c.robust_target);
  if (kv.has("blur_sigmas")) {
    c.blur_sigmas.clear();
    for (const auto& s : split_list(kv.get("blur_sigmas"))) c.blur_sigmas.push_back(parse_double(s));
  }
  if (kv.has("ablation_seeds")) {
    c.ablation_seeds.clear();
    for (const auto& s : split_list(kv.get("ablation_seeds"))) {
      c.ablation_seeds.push_back(static_cast<std::uint64_t>(parse_int(s)));
    }
  }
  c.n_ablation = to_count(kv.get_int("n_ablation", static_cast<std::int64_t>(c.n_ablation)), "n_ablation");
  c.n_saliency = to_count(kv.get_int("n_saliency", static_cast<std::int64_t>(c.n_saliency)), "n_saliency");
  c.global_seed = kv.get_u64("global_seed", c.global_seed);
  c.output_dir = kv.get_or("output_dir", c.output_dir.string());
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  try {
    return from_kv(KeyValues::load(path));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

KeyValues ExperimentConfig::to_kv() const {
  KeyValues kv;
  kv.set("dataset.seed", dataset.seed);
  kv.set("dataset.n_train", dataset.n_train);
  kv.set("dataset.n_test", dataset.n_test);
  kv.set("dataset.artifact_lo", static_cast<double>(dataset.artifact_lo));
  kv.set("dataset.artifact_hi", static_cast<double>(dataset.artifact_hi));
  kv.set("zoo", join_with(zoo, [](const ZooEntry& e) { return e.id() + ":" + std::to_string(e.seed); }));
  kv.set("source", source_id);
  kv.set("attacks", join(attacks));
  kv.merge(attack.to_kv(), "attack.");
  for (const auto& [name, cfg] : attack_overrides) kv.merge(cfg.to_kv(), "attack." + name + ".");
  kv.set("train.epochs", train.epochs);
  kv.set("train.lr", train.lr);
  kv.set("train.momentum", train.momentum);
  kv.set("train.batch", static_cast<std::uint64_t>(train.batch));
  kv.set("train.clip_norm", train.clip_norm);
  kv.set("n_attack", static_cast<std::uint64_t>(n_attack));
  kv.set("attack_real", attack_real);
  kv.set("robust_target", robust_target);
  kv.set("blur_sigmas", join_with(blur_sigmas, [](double v) { return format_double(v); }));
  kv.set("ablation_seeds", join_with(ablation_seeds, [](std::uint64_t v) { return std::to_string(v); }));
  kv.set("n_ablation", static_cast<std::uint64_t>(n_ablation));
  kv.set("n_saliency", static_cast<std::uint64_t>(n_saliency));
  kv.set("global_seed", global_seed);
  return kv;
}

std::string ExperimentConfig::hash() const { return sha256_hex(to_kv().to_text()); }

void ExperimentConfig::validate() const {
  dataset.validate();
  if (zoo.empty()) throw InvalidArgument("zoo is empty");
  std::set<std::string> ids;
  for (const auto& e : zoo) {
    if (!ids.insert(e.id()).second) throw InvalidArgument("zoo lists " + e.id() + " twice");
  }
  if (!ids.count(source_id)) throw InvalidArgument("source '" + source_id + "' is not in the zoo");
  if (!ids.count(robust_target)) {
    throw InvalidArgument("robust_target '" + robust_target + "' is not in the zoo");
  }
  for (const auto& a : attacks) parse_attack(a);
  attack.validate();
  for (const auto& [name, cfg] : attack_overrides) cfg.validate();
  if (train.epochs < 0) throw InvalidArgument("train.epochs must be >= 0");
  if (train.batch == 0) throw InvalidArgument("train.batch must be >= 1");
  if (!(train.lr >= 0.0)) throw InvalidArgument("train.lr must be >= 0");
  for (double s : blur_sigmas) {
    if (!(s >= 0.0)) throw InvalidArgument("blur sigmas must be >= 0");
  }
  if (ablation_seeds.empty()) throw InvalidArgument("ablation_seeds is empty");
  if (n_ablation == 0) throw InvalidArgument("n_ablation must be >= 1");
  if (n_saliency == 0) throw InvalidArgument("n_saliency must be >= 1");
}

const AttackConfig& ExperimentConfig::attack_config(const std::string& name) const {
  const auto it = attack_overrides.find(name);
  return it == attack_overrides.end() ? attack : it->second;
}

const ZooEntry& ExperimentConfig::zoo_entry(const std::string& id) const {
  for (const auto& e : zoo) {
    if (e.id() == id) return e;
  }
  throw InvalidArgument("no zoo member '" + id + "'");
}

Manifest Manifest::load_or_new(const std::filesystem::path& dir) {
  Manifest m;
  const auto path = dir / kFileName;
  if (std::filesystem::exists(path)) m.kv_ = KeyValues::load(path);
  m.kv_.set("version", version_string());
  return m;
}

void Manifest::record_file(const std::filesystem::path& dir, const std::string& relative) {
  kv_.set("file." + relative, sha256_file(dir / relative));
}

void Manifest::record_timing(const std::string& stage, double seconds) {
  kv_.set("timing." + stage + ".seconds", fixed(seconds, 3));
}

void Manifest::save(const std::filesystem::path& dir) const {
  write_text_atomic(dir / kFileName, "# dufia run manifest\n" + kv_.to_text());
}

std::map<std::string, std::string> Manifest::files() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : kv_.entries()) {
    if (k.rfind("file.", 0) == 0) out[k.substr(5)] = v;
  }
  return out;
}

}  // namespace dufia
