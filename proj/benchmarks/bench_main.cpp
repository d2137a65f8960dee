#include <ATen/CPUGeneratorImpl.h>
#include <benchmark/benchmark.h>

#include "mrsynth/losses.hpp"
#include "mrsynth/networks.hpp"
#include "mrsynth/phantom.hpp"

using namespace mrsynth;

namespace {

NetConfig bench_net(int final_res) {
  NetConfig cfg = NetConfig::desk();
  cfg.final_resolution = final_res;
  return cfg;
}

void BM_GradientPenalty(benchmark::State& state) {
  torch::manual_seed(0);
  const int res = static_cast<int>(state.range(0));
  auto net = bench_net(res);
  Critic d = build_discriminator(net);
  auto real = torch::randn({16, 1, res, res}), fake = torch::randn({16, 1, res, res});
  auto gen = at::make_generator<at::CPUGeneratorImpl>(1);
  CriticFn fn = [&](const torch::Tensor& x) { return d->forward(x, FadeState::stable(res)); };
  for (auto _ : state) {
    auto gp = gradient_penalty(fn, real, fake, 10.0, gen);
    gp.backward();
    benchmark::DoNotOptimize(gp.item<double>());
  }
}
BENCHMARK(BM_GradientPenalty)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GeneratorForward(benchmark::State& state) {
  torch::NoGradGuard no_grad;
  torch::manual_seed(0);
  const int res = static_cast<int>(state.range(0));
  auto net = bench_net(64);
  Generator g = build_generator(net);
  auto z = torch::randn({16, net.latent_dim});
  auto c = torch::rand({16, net.condition_dim});
  for (auto _ : state) benchmark::DoNotOptimize(g->forward(z, c, FadeState::stable(res)));
}
BENCHMARK(BM_GeneratorForward)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_PhantomSlice(benchmark::State& state) {
  auto spec = PhantomSpec::defaults(static_cast<int>(state.range(0)));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_phantom(spec, {3000, 30, "sagittal"}, seed++));
}
BENCHMARK(BM_PhantomSlice)->Arg(64)->Arg(256);

}  // namespace
BENCHMARK_MAIN();
