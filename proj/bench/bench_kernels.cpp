#include <benchmark/benchmark.h>

#include <random>

#include "simfl/kernels.hpp"
#include "simfl/model.hpp"

using namespace simfl;

namespace {

std::vector<Sample> make_samples(std::size_t n) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].label = static_cast<int>(i % 10);
    for (auto& p : out[i].pixels) p = u(gen) < 0.2f ? u(gen) : 0.0f;
  }
  return out;
}

ModelParams make_params() {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> n(0.0, 0.05);
  ModelParams p;
  for (auto& v : p.flat()) v = n(gen);
  return p;
}

template <auto Kernel>
void BM_batch_gradient(benchmark::State& state) {
  const auto samples = make_samples(static_cast<std::size_t>(state.range(0)));
  std::vector<const Sample*> batch;
  for (const auto& s : samples) batch.push_back(&s);
  const auto params = make_params();
  std::vector<double> grad(kParamCount);
  for (auto _ : state) {
    Kernel(params.flat(), batch, grad);
    benchmark::DoNotOptimize(grad.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void BM_count_correct(benchmark::State& state) {
  const auto samples = make_samples(static_cast<std::size_t>(state.range(0)));
  const auto params = make_params();
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(params.flat(), samples));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void BM_weighted_sum(benchmark::State& state) {
  std::vector<ModelParams> models(10, make_params());
  std::vector<std::span<const double>> inputs;
  for (const auto& m : models) inputs.push_back(m.flat());
  const std::vector<double> weights(10, 0.1);
  std::vector<double> out(kParamCount);
  for (auto _ : state) {
    Kernel(inputs, weights, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Kernel>
void BM_pairwise(benchmark::State& state) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n;
  Matrix pts(10, kParamCount);
  for (std::size_t i = 0; i < pts.rows(); ++i)
    for (auto& v : pts.row(i)) v = n(gen);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(pts));
}

}  // namespace

BENCHMARK(BM_batch_gradient<kernels::serial::batch_gradient>)->Name("batch_gradient/serial")->Arg(32)->Arg(256);
BENCHMARK(BM_batch_gradient<kernels::parallel::batch_gradient>)->Name("batch_gradient/parallel")->Arg(32)->Arg(256);
BENCHMARK(BM_count_correct<kernels::serial::count_correct>)->Name("count_correct/serial")->Arg(1500);
BENCHMARK(BM_count_correct<kernels::parallel::count_correct>)->Name("count_correct/parallel")->Arg(1500);
BENCHMARK(BM_weighted_sum<kernels::serial::weighted_sum>)->Name("weighted_sum/serial");
BENCHMARK(BM_weighted_sum<kernels::parallel::weighted_sum>)->Name("weighted_sum/parallel");
BENCHMARK(BM_pairwise<kernels::serial::pairwise_sq_distances>)->Name("pairwise_sq_distances/serial");
BENCHMARK(BM_pairwise<kernels::parallel::pairwise_sq_distances>)->Name("pairwise_sq_distances/parallel");

BENCHMARK_MAIN();
