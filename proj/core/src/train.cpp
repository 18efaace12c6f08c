#include "dufia/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "dufia/errors.hpp"
#include "dufia/rng.hpp"

namespace dufia {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  CounterRng rng(derive_seed(seed, "shuffle", static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

double mean_loss(const Detector& detector, std::span<const LabeledExample> xs) {
  double s = 0.0;
  for (const auto& x : xs) s += detector.loss(x.image, x.label);
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

Detector train(const Detector& detector, std::span<const LabeledExample> train_set,
               const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch) {
  if (train_set.empty()) throw InvalidArgument("train: empty training set");
  if (cfg.batch == 0 || cfg.epochs < 0) throw InvalidArgument("train: invalid batch/epochs");

  Network<float> net = detector.network();
  const std::size_t n_params = net.params().size();
  std::vector<float> grad(n_params), velocity(n_params, 0.0f);
  const auto lr = static_cast<float>(cfg.lr);
  const auto mu = static_cast<float>(cfg.momentum);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(train_set.size(), cfg.seed, epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      std::fill(grad.begin(), grad.end(), 0.0f);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = train_set[order[i]];
        batch_loss += net.accumulate_param_grad(ex.image.values(), ex.label, grad);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("training diverged: non-finite loss in epoch " +
                                std::to_string(epoch),
                            epoch);
      }
      epoch_loss += batch_loss;
      float inv = 1.0f / static_cast<float>(end - start);
      if (cfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (float g : grad) sq += static_cast<double>(g) * g;
        const double norm = std::sqrt(sq) * inv;
        if (norm > cfg.clip_norm) inv *= static_cast<float>(cfg.clip_norm / norm);
      }
      auto& p = net.mutable_params();
      for (std::size_t k = 0; k < n_params; ++k) {
        velocity[k] = mu * velocity[k] + grad[k] * inv;
        p[k] -= lr * velocity[k];
      }
    }
    const double mean = epoch_loss / static_cast<double>(train_set.size());
    if (!std::isfinite(mean)) {
      throw TrainingError("training diverged in epoch " + std::to_string(epoch), epoch);
    }
    if (on_epoch) on_epoch({epoch, mean});
  }
  return Detector(detector.arch(), std::vector<float>(net.params().begin(), net.params().end()));
}

Detector sgd_step(const Detector& detector, std::span<const LabeledExample> batch, double lr) {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.lr = lr;
  cfg.momentum = 0.0;
  cfg.clip_norm = 0.0;
  cfg.batch = batch.size();
  return train(detector, batch, cfg);
}

}  // namespace dufia
