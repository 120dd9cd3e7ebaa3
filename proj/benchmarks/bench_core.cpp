#include <benchmark/benchmark.h>

#include <random>

#include "gspose/anomaly.hpp"
#include "gspose/loss.hpp"
#include "gspose/pose.hpp"
#include "gspose/render.hpp"
#include "gspose/se3.hpp"
#include "gspose/synth.hpp"

using namespace gspose;

namespace {

struct Scene {
  GaussianCloud cloud;
  Camera cam;
};

Scene make_scene(int splats_per_primitive, int size) {
  SynthConfig cfg;
  cfg.seed = 1;
  cfg.splats_per_primitive = splats_per_primitive;
  cfg.width = cfg.height = size;
  Scene s;
  s.cloud = generate_object(cfg, 1);
  s.cam = sample_cameras(1, 1, ViewMode::UniformSphere, cfg)[0];
  return s;
}

ImageBuffer noisy(const ImageBuffer& img, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0.0, 0.02);
  ImageBuffer out = img;
  for (double& v : out.data) v += n(rng);
  return out;
}

void BM_RenderForward(benchmark::State& state) {
  const Scene s = make_scene(static_cast<int>(state.range(1)), static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_forward(s.cloud, s.cam, {}));
  state.counters["splats"] = static_cast<double>(s.cloud.size());
}
BENCHMARK(BM_RenderForward)->Args({64, 40})->Args({128, 40})->Args({256, 40})->Args({128, 400})->Unit(benchmark::kMillisecond);

void BM_RenderBackward(benchmark::State& state) {
  const Scene s = make_scene(static_cast<int>(state.range(1)), static_cast<int>(state.range(0)));
  const RenderOutput fwd = render_forward(s.cloud, s.cam, {});
  const ImageBuffer upstream(s.cam.width, s.cam.height, 3, 1e-3);
  for (auto _ : state) benchmark::DoNotOptimize(render_backward(s.cloud, s.cam, {}, fwd, upstream));
}
BENCHMARK(BM_RenderBackward)->Args({64, 40})->Args({128, 40})->Args({128, 400})->Unit(benchmark::kMillisecond);

void BM_CombinedLoss(benchmark::State& state) {
  const Scene s = make_scene(40, static_cast<int>(state.range(0)));
  const ImageBuffer a = render(s.cloud, s.cam, {});
  const ImageBuffer b = noisy(a, 3);
  for (auto _ : state) benchmark::DoNotOptimize(combined(a, b));
}
BENCHMARK(BM_CombinedLoss)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ApplyToCloud(benchmark::State& state) {
  const Scene s = make_scene(static_cast<int>(state.range(0)), 64);
  const ScrewTransform t{Vec3(0.3, -0.2, 0.9), Vec3(0.1, 0.0, -0.2), 0.15};
  GaussianCloud out;
  for (auto _ : state) {
    apply_to_cloud(t, s.cloud, out);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_ApplyToCloud)->Arg(40)->Arg(400)->Unit(benchmark::kMicrosecond);

void BM_RefineStep(benchmark::State& state) {
  const Scene s = make_scene(static_cast<int>(state.range(1)), static_cast<int>(state.range(0)));
  const ImageBuffer query = noisy(render(s.cloud, s.cam, {}), 4);
  RefineConfig cfg;
  cfg.k = 1;
  for (auto _ : state) benchmark::DoNotOptimize(refine_pose(query, s.cam, s.cloud, cfg));
}
BENCHMARK(BM_RefineStep)->Args({64, 40})->Args({128, 40})->Args({128, 400})->Unit(benchmark::kMillisecond);

void BM_ScoreMap(benchmark::State& state) {
  const Scene s = make_scene(40, static_cast<int>(state.range(0)));
  const ImageBuffer a = render(s.cloud, s.cam, {});
  const ImageBuffer b = noisy(a, 5);
  for (auto _ : state) benchmark::DoNotOptimize(detect_anomalies(a, b));
}
BENCHMARK(BM_ScoreMap)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_CoarseMatch(benchmark::State& state) {
  SynthConfig cfg;
  cfg.width = cfg.height = 64;
  const GaussianCloud c = generate_object(cfg, 2);
  std::vector<View> train;
  for (const auto& cam : sample_cameras(3, static_cast<int>(state.range(0)), ViewMode::UniformSphere, cfg))
    train.push_back({render(c, cam, {}), cam});
  NccMatcher m;
  m.prepare(train);
  for (auto _ : state) benchmark::DoNotOptimize(coarse_pose(train[0].image, train, m));
}
BENCHMARK(BM_CoarseMatch)->Arg(42)->Arg(210)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
