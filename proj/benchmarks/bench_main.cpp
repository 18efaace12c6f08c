#include <benchmark/benchmark.h>

#include "dufia/attacks.hpp"
#include "dufia/dct.hpp"
#include "dufia/detector.hpp"
#include "dufia/importance.hpp"
#include "dufia/metrics.hpp"
#include "dufia/rng.hpp"

namespace {

using namespace dufia;

Image noise_image(std::uint64_t seed) {
  Image x(Shape3{3, 32, 32});
  CounterRng rng(seed);
  for (auto& v : x.values()) v = static_cast<float>(rng.uniform());
  return x;
}

ArchId arch_of(const benchmark::State& s) { return static_cast<ArchId>('A' + s.range(0)); }

void BM_Forward(benchmark::State& state) {
  const Detector d = build_detector(arch_of(state), 1);
  const Image x = noise_image(1);
  for (auto _ : state) benchmark::DoNotOptimize(d.forward(x));
}
BENCHMARK(BM_Forward)->Arg(0)->Arg(1)->Arg(2);

void BM_InputGradient(benchmark::State& state) {
  const Detector d = build_detector(arch_of(state), 1);
  const Image x = noise_image(2);
  for (auto _ : state) benchmark::DoNotOptimize(d.grad_loss_wrt_input(x, kLabelFake));
}
BENCHMARK(BM_InputGradient)->Arg(0)->Arg(1)->Arg(2);

void BM_Dct2(benchmark::State& state) {
  const Image x = noise_image(3);
  for (auto _ : state) benchmark::DoNotOptimize(dct2(x));
}
BENCHMARK(BM_Dct2);

void BM_Ssim(benchmark::State& state) {
  const Image a = noise_image(4), b = noise_image(5);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim);

void BM_MifgsmStep(benchmark::State& state) {
  const Detector d = build_detector(ArchId::A, 1);
  const Image x = noise_image(6);
  AttackConfig cfg;
  cfg.iterations = 1;
  for (auto _ : state) benchmark::DoNotOptimize(mifgsm(d, x, kLabelFake, cfg));
}
BENCHMARK(BM_MifgsmStep);

void BM_JointImportance(benchmark::State& state) {
  const Detector d = build_detector(ArchId::A, 1);
  const Image x = noise_image(7);
  const ImportanceConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ablation_importance(d, x, kLabelFake, ImportanceMode::Joint, cfg));
  }
}
BENCHMARK(BM_JointImportance)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
