#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "hedseg/boxes.hpp"
#include "hedseg/enhance.hpp"
#include "hedseg/eval.hpp"
#include "hedseg/hed.hpp"
#include "hedseg/maskrcnn.hpp"
#include "hedseg/postprocess.hpp"
#include "hedseg/rng.hpp"
#include "hedseg/roi_align.hpp"

using namespace hedseg;

namespace {

Image noise(int n, std::uint64_t seed) {
  Rng rng(seed);
  Image img(n, n);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(rng.uniform());
  return img;
}

Mask blob_mask(int n, std::uint64_t seed) {
  Rng rng(seed);
  Mask m(n, n, 0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform() < 0.55;
  return m;
}

}  // namespace

static void BM_Clahe(benchmark::State& state) {
  const Image img = noise(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(clahe(img, 2.0, {8, 8}));
}
BENCHMARK(BM_Clahe)->Arg(128)->Arg(512);

static void BM_EnhanceCt(benchmark::State& state) {
  const Slice s{"P", 0, Modality::CT, noise(static_cast<int>(state.range(0)), 2), std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(enhance_ct(s, {}));
}
BENCHMARK(BM_EnhanceCt)->Arg(128)->Arg(512);

static void BM_Nms(benchmark::State& state) {
  Rng rng(3);
  std::vector<Box> boxes;
  std::vector<double> scores;
  for (int i = 0; i < state.range(0); ++i) {
    const double x = rng.uniform(0, 400), y = rng.uniform(0, 400);
    boxes.push_back({x, y, x + rng.uniform(10, 120), y + rng.uniform(10, 120)});
    scores.push_back(rng.uniform());
  }
  for (auto _ : state) benchmark::DoNotOptimize(nms(boxes, scores, 0.7));
}
BENCHMARK(BM_Nms)->Arg(300)->Arg(2000);

static void BM_RoiAlignPlain(benchmark::State& state) {
  FeatureMap f(32, 32, 32);
  Rng rng(4);
  for (auto& v : f.data) v = static_cast<float>(rng.uniform());
  for (auto _ : state) benchmark::DoNotOptimize(roi_align(f, {10, 12, 90, 100}, 7, 2, 0.25));
}
BENCHMARK(BM_RoiAlignPlain);

static void BM_RoiAlignTensor(benchmark::State& state) {
  torch::set_num_threads(1);
  const auto f = torch::rand({32, 32, 32});
  std::vector<Box> boxes;
  Rng rng(5);
  for (int i = 0; i < state.range(0); ++i) {
    const double x = rng.uniform(0, 80), y = rng.uniform(0, 80);
    boxes.push_back({x, y, x + 40, y + 40});
  }
  const auto b = boxes_to_tensor(boxes);
  for (auto _ : state) benchmark::DoNotOptimize(roi_align(f, b, 7, 2, 0.25));
}
BENCHMARK(BM_RoiAlignTensor)->Arg(32)->Arg(128);

static void BM_Dice(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Mask a = blob_mask(n, 6), b = blob_mask(n, 7);
  for (auto _ : state) benchmark::DoNotOptimize(dice_coefficient(a, b));
}
BENCHMARK(BM_Dice)->Arg(128)->Arg(512);

static void BM_LargestComponent(benchmark::State& state) {
  const Mask m = blob_mask(static_cast<int>(state.range(0)), 8);
  for (auto _ : state) benchmark::DoNotOptimize(largest_component(m));
}
BENCHMARK(BM_LargestComponent)->Arg(128)->Arg(512);

static void BM_HedForward(benchmark::State& state) {
  torch::set_num_threads(1);
  torch::manual_seed(0);
  const int n = static_cast<int>(state.range(0));
  HedNet net = build_hed(HedConfig::toy(n));
  net->eval();
  const auto x = torch::rand({1, 1, n, n});
  torch::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(net->forward(x));
}
BENCHMARK(BM_HedForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_DetectorForward(benchmark::State& state) {
  torch::set_num_threads(1);
  torch::manual_seed(0);
  MaskRcnn model = build_detector(DetectorConfig::toy(128));
  model->eval();
  const FusedSample s{noise(128, 9), "P/0", ""};
  for (auto _ : state) benchmark::DoNotOptimize(detect(model, s));
}
BENCHMARK(BM_DetectorForward)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
