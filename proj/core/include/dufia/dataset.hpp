#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dufia/tensor.hpp"

namespace dufia {

struct LabeledExample {
  Image image;
  int label = 0;  // 0 = real, 1 = fake
};

/// Procedural stand-in for a real-vs-generated image benchmark.
struct DatasetSpec {
  std::uint64_t seed = 7;
  std::int64_t n_train = 4000;
  std::int64_t n_test = 1000;
  float artifact_lo = 0.02f;
  float artifact_hi = 0.08f;

  void validate() const;
};

struct Dataset {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
};

/// Alternating labels within each split (even position real, odd fake).
/// Example k is drawn from its own counter stream, so any subset can be
/// regenerated independently.
Dataset generate_dataset(const DatasetSpec& spec);

/// Example with global index k (train indices first, then test).
LabeledExample generate_example(const DatasetSpec& spec, std::uint64_t k);

/// Real-style smooth field; `width` x `width` per channel in [0, 1].
Image smooth_base(std::uint64_t key, std::size_t width, double blur_sigma);

std::vector<LabeledExample> select_label(std::span<const LabeledExample> xs, int label);

}  // namespace dufia
