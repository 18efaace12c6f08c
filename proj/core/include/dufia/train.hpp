#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dufia/dataset.hpp"
#include "dufia/detector.hpp"

namespace dufia {

struct TrainConfig {
  int epochs = 10;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t batch = 64;
  std::uint64_t seed = 0;
  /// Batch-mean gradients with a larger global L2 norm are rescaled to this
  /// norm before entering the momentum buffer. 0 disables clipping.
  double clip_norm = 1.0;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
};

/// Mini-batch SGD with heavy-ball momentum (v <- mu v + g; p <- p - lr v)
/// on mean cross-entropy. Shuffling is a pure function of (seed, epoch).
/// Throws TrainingError when the loss becomes non-finite.
Detector train(const Detector& detector, std::span<const LabeledExample> train_set,
               const TrainConfig& cfg,
               const std::function<void(const EpochStats&)>& on_epoch = {});

/// One SGD step on a single batch; used for descent checks.
Detector sgd_step(const Detector& detector, std::span<const LabeledExample> batch, double lr);

double mean_loss(const Detector& detector, std::span<const LabeledExample> xs);

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, int epoch);

}  // namespace dufia
