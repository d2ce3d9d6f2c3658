#include <benchmark/benchmark.h>

#include <vector>

#include "ctfkit/engine.hpp"
#include "ctfkit/mmd_trainer.hpp"
#include "ctfkit/monotone_net.hpp"
#include "ctfkit/normalization.hpp"

using namespace ctfkit;

namespace {

Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sample_one(Normal{0, 1}, rng);
  return m;
}

MonotoneMlp bench_net(std::size_t layers, std::size_t width) {
  Rng rng(1);
  return init_mlp({2, layers, width, true}, rng);
}

void BM_Forward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const MonotoneMlp net = bench_net(4, width);
  Rng rng(2);
  const Eigen::MatrixXd inputs = normal_matrix(2, 4096, rng);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_batch(net, inputs));
  state.SetItemsProcessed(state.iterations() * inputs.cols());
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64);

void BM_ForwardBackward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const MonotoneMlp net = bench_net(4, width);
  Rng rng(3);
  const Eigen::MatrixXd inputs = normal_matrix(2, 4096, rng);
  const Eigen::RowVectorXd upstream = normal_matrix(1, 4096, rng);
  for (auto _ : state) {
    const ForwardCache cache = forward_batch(net, inputs);
    benchmark::DoNotOptimize(backward(net, cache, upstream));
  }
  state.SetItemsProcessed(state.iterations() * inputs.cols());
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(64);

void BM_BatchLoss(benchmark::State& state) {
  const auto batch = state.range(0);
  const MonotoneMlp net = bench_net(4, 64);
  Rng rng(4);
  const Eigen::MatrixXd parents = normal_matrix(1, batch, rng);
  const Eigen::VectorXd targets = normal_matrix(batch, 1, rng);
  const Eigen::MatrixXd noise = normal_matrix(64, batch, rng);
  const RbfLossKernel kernel{1.0};
  for (auto _ : state) benchmark::DoNotOptimize(batch_loss_and_grads(net, parents, targets, noise, kernel));
}
BENCHMARK(BM_BatchLoss)->Arg(64)->Arg(256);

void BM_SampleLatent(benchmark::State& state) {
  const auto worlds = static_cast<std::size_t>(state.range(0));
  std::vector<std::vector<double>> indices;
  for (std::size_t w = 0; w < worlds; ++w) indices.push_back({0.1 * static_cast<double>(w)});
  const LatentFactor factor = prepare_latent(make_gaussian(0.8), indices);
  Rng rng(5);
  std::vector<double> out(worlds);
  for (auto _ : state) {
    factor.draw(rng, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_SampleLatent)->Arg(2)->Arg(16);

void BM_PrepareLatent(benchmark::State& state) {
  const auto worlds = static_cast<std::size_t>(state.range(0));
  std::vector<std::vector<double>> indices;
  for (std::size_t w = 0; w < worlds; ++w) indices.push_back({0.1 * static_cast<double>(w)});
  for (auto _ : state) benchmark::DoNotOptimize(prepare_latent(make_gaussian(0.8), indices));
}
BENCHMARK(BM_PrepareLatent)->Arg(2)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
