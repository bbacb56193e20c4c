#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "groundflow/dense_flow.hpp"
#include "groundflow/event_core.hpp"
#include "groundflow/pipeline.hpp"
#include "groundflow/rigid_motion.hpp"
#include "groundflow/synth.hpp"

using namespace groundflow;

namespace
{

constexpr int kWidth = 346;
constexpr int kHeight = 260;

ImageF noise_image(int shift_x)
{
  Texture tex({TextureKind::noise, 7, 6.0});
  ImageF img(kWidth, kHeight);
  for (int y = 0; y < kHeight; ++y) {
    for (int x = 0; x < kWidth; ++x) {
      img(x, y) = 255.f * tex.lattice(x - shift_x, y);
    }
  }
  return img;
}

std::vector<Correspondence> noisy_pairs(std::size_t n, double outlier_fraction)
{
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> coord(0.0, kWidth), wild(-50.0, 50.0), unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.2);
  const auto r = Mat2::rotation(0.01);
  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p{coord(rng), coord(rng)};
    Vec2 q = r * p + Vec2{3.0, -1.0} + Vec2{noise(rng), noise(rng)};
    if (unit(rng) < outlier_fraction) {
      q += Vec2{wild(rng), wild(rng)};
    }
    out.push_back({p, q});
  }
  return out;
}

SimOutput two_windows()
{
  SimConfig sim;
  sim.cam = CameraModel::from_focal(kWidth, kHeight, 60, 0.6);
  sim.texture = {TextureKind::noise, 3, 10.0};
  sim.texture.intensity_min = 0.3;
  sim.duration = 0.066;
  sim.time_step = 0.033 / 8;
  return generate_events(sim, Trajectory::constant(sim.duration, 1.5, 0.0, 0.3));
}

RunConfig run_config()
{
  RunConfig cfg;
  cfg.accum.window = 33000;
  cfg.accum.width = kWidth;
  cfg.accum.height = kHeight;
  cfg.camera = CameraModel::from_focal(kWidth, kHeight, 60, 0.6);
  cfg.mapping = simulator_axis_mapping();
  cfg.t_begin = 0;
  cfg.t_end = 66000;
  return cfg;
}

}  // namespace

static void BM_ComputeFlow(benchmark::State & state)
{
  const auto a = noise_image(0);
  const auto b = noise_image(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_flow(a, b, FlowParams{}, 0.033));
  }
}
BENCHMARK(BM_ComputeFlow)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

static void BM_PolynomialExpansion(benchmark::State & state)
{
  const auto a = noise_image(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(polynomial_expansion(a, 5, 1.1));
  }
}
BENCHMARK(BM_PolynomialExpansion)->Unit(benchmark::kMillisecond);

static void BM_EstimateRigid(benchmark::State & state)
{
  const auto pairs = noisy_pairs(static_cast<std::size_t>(state.range(0)), 0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_rigid(pairs));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EstimateRigid)->Arg(100)->Arg(5600);

static void BM_Ransac(benchmark::State & state)
{
  const auto pairs = noisy_pairs(5600, 0.2);
  const RansacParams params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ransac_estimate(pairs, params, 42));
  }
}
BENCHMARK(BM_Ransac)->Unit(benchmark::kMicrosecond);

static void BM_Accumulate(benchmark::State & state)
{
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> x(0, kWidth - 1), y(0, kHeight - 1);
  std::vector<Event> events(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < events.size(); ++i) {
    events[i] = {static_cast<Timestamp>(i * 33000 / events.size()), static_cast<std::uint16_t>(x(rng)),
                 static_cast<std::uint16_t>(y(rng)), static_cast<std::int8_t>(i % 2 ? 1 : -1)};
  }
  AccumulationConfig cfg;
  cfg.width = kWidth;
  cfg.height = kHeight;
  for (auto _ : state) {
    benchmark::DoNotOptimize(accumulate(events, cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Accumulate)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);

static void BM_FramePair(benchmark::State & state)
{
  const auto sim = two_windows();
  const auto cfg = run_config();
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_pipeline(cfg, sim.events));
  }
  state.counters["events"] = static_cast<double>(sim.events.size());
}
BENCHMARK(BM_FramePair)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
