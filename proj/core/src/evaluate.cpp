#include "dufia/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "dufia/errors.hpp"
#include "dufia/metrics.hpp"
#include "dufia/parallel.hpp"
#include "dufia/rng.hpp"

namespace dufia {
namespace {

std::size_t index_of(const std::vector<std::string>& names, const std::string& name,
                     const char* what) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument(std::string("no ") + what + " '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

std::string cell(double v) { return std::isinf(v) ? "inf" : fixed(v, 4); }

}  // namespace

std::string fixed(double v, int precision) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

AttackConfig per_image_config(const AttackConfig& cfg, std::uint64_t seed, std::size_t i) {
  AttackConfig c = cfg;
  c.seed = derive_seed(seed, "attack", i);
  c.importance.seed = derive_seed(seed, "importance", i);
  return c;
}

std::vector<AttackResult> craft(AttackKind kind, const Detector& source,
                                const std::vector<Image>& originals, const AttackConfig& cfg,
                                std::uint64_t seed, int jobs, int label) {
  std::vector<AttackResult> out(originals.size());
  parallel_for(originals.size(), jobs, [&](std::size_t i) {
    out[i] = run_attack(kind, source, originals[i], label, per_image_config(cfg, seed, i));
  });
  return out;
}

AdversarialSet to_set(std::string attack, const std::vector<AttackResult>& results) {
  AdversarialSet s{std::move(attack), {}};
  s.images.reserve(results.size());
  for (const auto& r : results) s.images.push_back(r.adversarial);
  return s;
}

double TransferReport::at(const std::string& attack, const std::string& target) const {
  return accuracy[index_of(attacks, attack, "attack")][index_of(targets, target, "target")];
}

TransferReport transfer_report(const std::string& source_id, const std::vector<ZooMember>& targets,
                               const std::vector<Image>& originals,
                               const std::vector<AdversarialSet>& sets,
                               const std::vector<LabeledExample>& balanced, std::uint64_t seed,
                               int jobs) {
  if (originals.empty()) throw InvalidArgument("transfer report needs at least one image");
  TransferReport r;
  r.source_id = source_id;
  r.n_images = originals.size();
  r.n_balanced = balanced.size();
  r.seed = seed;
  for (const auto& t : targets) r.targets.push_back(t.id);
  r.attacks.push_back(kUnattacked);
  for (const auto& s : sets) {
    if (s.images.size() != originals.size()) {
      throw ShapeError("adversarial set '" + s.attack + "' has " + std::to_string(s.images.size()) +
                       " images, expected " + std::to_string(originals.size()));
    }
    r.attacks.push_back(s.attack);
  }
  r.accuracy.assign(r.attacks.size(), std::vector<double>(targets.size(), 0.0));
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Detector& d = targets[t].detector;
    r.accuracy[0][t] = accuracy(d, originals, kLabelFake, 0.5, jobs);
    for (std::size_t a = 0; a < sets.size(); ++a) {
      r.accuracy[a + 1][t] = accuracy(d, sets[a].images, kLabelFake, 0.5, jobs);
    }
    r.clean_balanced.push_back(balanced.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                : accuracy(d, balanced));
  }
  return r;
}

TransferReport transfer_matrix(const ZooMember& source, const std::vector<ZooMember>& targets,
                               const std::vector<AttackKind>& attacks,
                               const std::vector<Image>& test_fakes, const AttackConfig& cfg,
                               std::uint64_t seed, const std::vector<LabeledExample>& balanced,
                               int jobs) {
  std::vector<AdversarialSet> sets;
  for (AttackKind k : attacks) {
    sets.push_back(to_set(std::string(to_string(k)),
                          craft(k, source.detector, test_fakes, cfg, seed, jobs)));
  }
  return transfer_report(source.id, targets, test_fakes, sets, balanced, seed, jobs);
}

double RobustnessReport::at(ProcessKind kind, double strength, const std::string& attack) const {
  const std::size_t a = index_of(attacks, attack, "attack");
  for (std::size_t p = 0; p < processes.size(); ++p) {
    if (processes[p].kind == kind && processes[p].strength == strength) return accuracy[p][a];
  }
  throw InvalidArgument("robustness grid has no such process");
}

RobustnessReport robustness_grid(const ZooMember& target, const std::vector<Image>& originals,
                                 const std::vector<AdversarialSet>& sets,
                                 const std::vector<PostProcess>& processes, std::uint64_t seed,
                                 int jobs) {
  if (originals.empty()) throw InvalidArgument("robustness grid needs at least one image");
  RobustnessReport r;
  r.target_id = target.id;
  r.processes = processes;
  r.n_images = originals.size();
  r.seed = seed;
  std::vector<const std::vector<Image>*> columns{&originals};
  r.attacks.push_back(kUnattacked);
  for (const auto& s : sets) {
    if (s.images.size() != originals.size()) {
      throw ShapeError("adversarial set '" + s.attack + "' does not share the originals");
    }
    r.attacks.push_back(s.attack);
    columns.push_back(&s.images);
  }
  r.accuracy.assign(processes.size(), std::vector<double>(columns.size(), 0.0));
  for (std::size_t p = 0; p < processes.size(); ++p) {
    const auto& proc = processes[p];
    const std::string stage = "post-" + proc.name() + "-" + proc.strength_label();
    for (std::size_t a = 0; a < columns.size(); ++a) {
      const auto& images = *columns[a];
      std::vector<char> hit(images.size(), 0);
      parallel_for(images.size(), jobs, [&](std::size_t i) {
        const Image x = proc.apply(images[i], derive_seed(seed, stage, i));
        hit[i] = correct(target.detector.forward(x).fake_probability, kLabelFake);
      });
      std::size_t hits = 0;
      for (char h : hit) hits += h;
      r.accuracy[p][a] = static_cast<double>(hits) / static_cast<double>(images.size());
    }
  }
  return r;
}

const QualityRow& QualityReport::row(const std::string& attack) const {
  for (const auto& r : rows) {
    if (r.attack == attack) return r;
  }
  throw InvalidArgument("quality report has no attack '" + attack + "'");
}

QualityReport quality_report(const std::vector<Image>& originals,
                             const std::vector<AdversarialSet>& sets) {
  if (originals.empty()) throw InvalidArgument("quality report needs at least one image");
  QualityReport q;
  q.n_images = originals.size();
  for (const auto& s : sets) {
    if (s.images.size() != originals.size()) {
      throw ShapeError("adversarial set '" + s.attack + "' does not share the originals");
    }
    QualityRow row;
    row.attack = s.attack;
    row.min_psnr = std::numeric_limits<double>::infinity();
    // Identical pairs have infinite PSNR; they are capped at 100 dB for the
    // mean so a single untouched image does not swamp the average.
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (std::size_t i = 0; i < originals.size(); ++i) {
      const double p = psnr(originals[i], s.images[i]);
      psnr_sum += std::min(p, 100.0);
      row.min_psnr = std::min(row.min_psnr, p);
      ssim_sum += ssim(originals[i], s.images[i]);
      row.max_linf = std::max(row.max_linf, max_abs_diff(originals[i], s.images[i]));
    }
    row.mean_psnr = psnr_sum / static_cast<double>(originals.size());
    row.mean_ssim = ssim_sum / static_cast<double>(originals.size());
    q.rows.push_back(row);
  }
  return q;
}

std::string to_csv(const TransferReport& r) {
  std::ostringstream os;
  os << "source,target,attack,set,n_images,accuracy\n";
  for (std::size_t a = 0; a < r.attacks.size(); ++a) {
    for (std::size_t t = 0; t < r.targets.size(); ++t) {
      os << r.source_id << ',' << r.targets[t] << ',' << r.attacks[a] << ",fake," << r.n_images
         << ',' << fixed(r.accuracy[a][t], 6) << '\n';
    }
  }
  if (r.n_balanced > 0) {
    for (std::size_t t = 0; t < r.targets.size(); ++t) {
      os << r.source_id << ',' << r.targets[t] << ',' << kUnattacked << ",balanced,"
         << r.n_balanced << ',' << fixed(r.clean_balanced[t], 6) << '\n';
    }
  }
  return os.str();
}

std::string to_markdown(const TransferReport& r) {
  std::ostringstream os;
  os << "# Transfer accuracy (source " << r.source_id << ")\n\n"
     << "Accuracy at threshold 0.5 on " << r.n_images
     << " attacked fake test images (lower is a stronger attack). The source column is "
        "white-box, the others are black-box transfer.";
  if (r.n_balanced > 0) {
    os << " The `none (balanced)` row is clean accuracy on " << r.n_balanced
       << " real+fake test images.";
  }
  os << " Seed " << r.seed << ".\n\n| Attack |";
  for (const auto& t : r.targets) os << ' ' << t << (t == r.source_id ? " (source)" : "") << " |";
  os << " Avg |\n|---|";
  for (std::size_t t = 0; t <= r.targets.size(); ++t) os << "---|";
  os << '\n';
  auto emit = [&](const std::string& name, const std::vector<double>& row) {
    os << "| " << name << " |";
    double sum = 0.0;
    for (double v : row) {
      os << ' ' << cell(v) << " |";
      sum += v;
    }
    os << ' ' << cell(sum / static_cast<double>(row.size())) << " |\n";
  };
  if (r.n_balanced > 0) emit("none (balanced)", r.clean_balanced);
  for (std::size_t a = 0; a < r.attacks.size(); ++a) emit(r.attacks[a], r.accuracy[a]);
  return os.str();
}

std::string to_csv(const RobustnessReport& r) {
  std::ostringstream os;
  os << "target,process,strength,attack,n_images,accuracy\n";
  for (std::size_t p = 0; p < r.processes.size(); ++p) {
    for (std::size_t a = 0; a < r.attacks.size(); ++a) {
      os << r.target_id << ',' << r.processes[p].name() << ',' << r.processes[p].strength_label()
         << ',' << r.attacks[a] << ',' << r.n_images << ',' << fixed(r.accuracy[p][a], 6) << '\n';
    }
  }
  return os.str();
}

std::string to_markdown(const RobustnessReport& r) {
  std::ostringstream os;
  os << "# Robustness to post-processing (target " << r.target_id << ")\n\n"
     << "Accuracy on " << r.n_images
     << " fake test images after each post-process. Blur uses the sigma set from the config "
        "(default 0.02/0.32/0.64; 0.08 is also accepted). Seed "
     << r.seed << ".\n\n| Attack |";
  for (const auto& p : r.processes) os << ' ' << p.name() << ' ' << p.strength_label() << " |";
  os << "\n|---|";
  for (std::size_t p = 0; p < r.processes.size(); ++p) os << "---|";
  os << '\n';
  for (std::size_t a = 0; a < r.attacks.size(); ++a) {
    os << "| " << r.attacks[a] << " |";
    for (std::size_t p = 0; p < r.processes.size(); ++p) os << ' ' << cell(r.accuracy[p][a]) << " |";
    os << '\n';
  }
  return os.str();
}

std::string to_csv(const QualityReport& r) {
  std::ostringstream os;
  os << "attack,n_images,mean_psnr_db,min_psnr_db,mean_ssim,max_linf\n";
  for (const auto& row : r.rows) {
    os << row.attack << ',' << r.n_images << ',' << fixed(row.mean_psnr, 6) << ','
       << fixed(row.min_psnr, 6) << ',' << fixed(row.mean_ssim, 6) << ',' << fixed(row.max_linf, 9)
       << '\n';
  }
  return os.str();
}

std::string to_markdown(const QualityReport& r) {
  std::ostringstream os;
  os << "# Perceptual quality\n\n"
     << "Mean over " << r.n_images
     << " attacked images, computed on the float tensors (not on re-quantized PNGs). "
        "PSNR of identical pairs is capped at 100 dB inside the mean.\n\n"
     << "| Attack | PSNR (dB) | min PSNR (dB) | SSIM | max Linf |\n|---|---|---|---|---|\n";
  for (const auto& row : r.rows) {
    os << "| " << row.attack << " | " << fixed(row.mean_psnr, 2) << " | " << fixed(row.min_psnr, 2)
       << " | " << fixed(row.mean_ssim, 4) << " | " << fixed(row.max_linf, 6) << " |\n";
  }
  return os.str();
}

}  // namespace dufia
