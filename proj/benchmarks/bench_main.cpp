#include <random>

#include <benchmark/benchmark.h>

#include "cholec/env/cholec_env.hpp"
#include "cholec/env/render.hpp"
#include "cholec/eval/controller.hpp"
#include "cholec/nn/policy.hpp"
#include "cholec/ppo/gae.hpp"
#include "cholec/ppo/trainer.hpp"
#include "cholec/sim/occlusion.hpp"

using namespace cholec;

namespace {

const std::shared_ptr<const env::EnvAssets>& assets() {
  static const auto a = env::EnvAssets::build(env::EnvConfig{});
  return a;
}

void BM_EnvStep(benchmark::State& state) {
  env::EnvConfig cfg;
  cfg.obs_mode = state.range(0) ? env::ObsMode::kImage : env::ObsMode::kFeatures;
  env::CholecEnv env(cfg, assets());
  std::mt19937_64 rng(1);
  std::uint64_t seed = 0;
  env.reset(seed);
  for (auto _ : state) {
    if (env.state().done) env.reset(++seed);
    benchmark::DoNotOptimize(env.step({static_cast<int>(rng() % 9), static_cast<int>(rng() % 9)}));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EnvStep)->Arg(0)->Arg(1)->ArgName("image");

void BM_Occlusion(benchmark::State& state) {
  env::CholecEnv env(env::EnvConfig{}, assets());
  env.reset(3);
  const auto& s = env.state();
  const int rays = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::occlusion_query(s.gallbladder.vertices, s.gallbladder.triangles,
                                                  env.scene().camera.position_mm, s.target, rays));
  }
}
BENCHMARK(BM_Occlusion)->Arg(16)->Arg(32)->Arg(64)->ArgName("rays");

void BM_RenderScene(benchmark::State& state) {
  env::CholecEnv env(env::EnvConfig{}, assets());
  env.reset(3);
  for (auto _ : state) benchmark::DoNotOptimize(env::render_scene(env, 64, 64));
}
BENCHMARK(BM_RenderScene);

void BM_PolicyStep(benchmark::State& state) {
  const bool image = state.range(0) != 0;
  nn::PolicyValueNet<float> net(image ? nn::ArchSpec::image() : nn::ArchSpec::features(), "bench");
  net.initialize(0);
  const int lanes = 8;
  nn::Matrix<float> obs = nn::Matrix<float>::Random(lanes, net.spec().observation_size());
  const std::vector<int> prev(lanes, 3);
  auto rec = net.initial_state(lanes);
  for (auto _ : state) benchmark::DoNotOptimize(net.step(obs, prev, rec));
  state.SetItemsProcessed(state.iterations() * lanes);
}
BENCHMARK(BM_PolicyStep)->Arg(0)->Arg(1)->ArgName("image");

void BM_PolicyForwardBackward(benchmark::State& state) {
  nn::PolicyValueNet<float> net(nn::ArchSpec::features(), "bench");
  net.initialize(0);
  const int lanes = 4, steps = 80;
  nn::Matrix<float> obs = nn::Matrix<float>::Random(lanes * steps, net.spec().observation_size());
  const std::vector<int> prev(lanes * steps, 1);
  std::vector<std::uint8_t> reset(lanes * steps, 0);
  for (int i = 0; i < lanes; ++i) reset[i] = 1;
  const auto init = net.initial_state(lanes);
  for (auto _ : state) {
    nn::Graph<float> g;
    const auto out = net.forward(g, obs, prev, reset, init, steps);
    g.backward(g.sum(g.add(g.sum(out.logits), g.sum(out.value))));
  }
  state.SetItemsProcessed(state.iterations() * lanes * steps);
}
BENCHMARK(BM_PolicyForwardBackward);

void BM_Gae(benchmark::State& state) {
  const int n = 320;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> r(n), v(n), boot(n, 0.0);
  std::vector<std::uint8_t> done(n, 0), trunc(n, 0);
  for (int i = 0; i < n; ++i) {
    r[i] = u(rng);
    v[i] = u(rng);
    done[i] = (rng() % 50) == 0;
  }
  boot.back() = 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(ppo::compute_gae(r, v, done, trunc, boot, 0.99, 0.95));
}
BENCHMARK(BM_Gae);

void BM_TrainerIteration(benchmark::State& state) {
  ppo::Trainer t(env::EnvConfig{}, ppo::PpoConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(t.iteration());
  state.SetItemsProcessed(state.iterations() * t.config().batch_steps);
}
BENCHMARK(BM_TrainerIteration)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
