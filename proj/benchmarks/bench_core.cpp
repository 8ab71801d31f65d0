#include <benchmark/benchmark.h>

#include "bas/analysis.hpp"
#include "bas/data_metrics.hpp"
#include "bas/solvers.hpp"

namespace {

using bas::TensorBuffer;

TensorBuffer noise(std::size_t rows, std::size_t cols) {
  bas::Rng rng(1);
  return bas::flow::sample_noise(rows, cols, rng);
}

void BM_MlpForward(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::vector<std::size_t> dims{10, 64, 64, 2};
  const auto model = bas::nnet::mlp_init(dims, 3);
  const auto x = noise(rows, 10);
  for (auto _ : state) benchmark::DoNotOptimize(bas::nnet::mlp_forward(model, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForward)->Arg(1)->Arg(256)->Arg(2048);

void BM_GradMse(benchmark::State& state) {
  const std::vector<std::size_t> dims{10, 64, 64, 2};
  const auto model = bas::nnet::mlp_init(dims, 3);
  const auto x = noise(256, 10);
  const auto y = noise(256, 2);
  for (auto _ : state) benchmark::DoNotOptimize(bas::nnet::grad_mse(model, x, y));
}
BENCHMARK(BM_GradMse);

void BM_QuadratureApply(benchmark::State& state) {
  const auto rule = bas::quadrature::make_rule(bas::quadrature::QuadratureKind::GaussLobatto4);
  const std::vector<TensorBuffer> values(rule.size(), noise(2048, 2));
  for (auto _ : state) benchmark::DoNotOptimize(bas::quadrature::apply(rule, values, 0.2));
}
BENCHMARK(BM_QuadratureApply);

// Learned backbone and SideNet at the shipped architecture, untrained.
void BM_Solver(benchmark::State& state) {
  const auto kind = static_cast<bas::solvers::SolverKind>(state.range(0));
  const auto backbone_model = bas::nnet::mlp_init(
      std::vector<std::size_t>{10, 64, 64, 2}, 4, bas::flow::LearnedField::feature_config(2, 4));
  const bas::flow::LearnedField backbone(backbone_model);
  const auto side = bas::sidenet::SideNet::create(2, {{64, 64}, 4}, 5);
  const auto x1 = noise(2000, 2);
  bas::solvers::SamplerConfig config;
  config.solver = kind;
  config.intervals = 5;
  for (auto _ : state) benchmark::DoNotOptimize(bas::solvers::solve(config, backbone, &side, x1));
  state.SetLabel(std::string(bas::solvers::to_string(kind)));
}
BENCHMARK(BM_Solver)
    ->Arg(static_cast<int>(bas::solvers::SolverKind::Euler))
    ->Arg(static_cast<int>(bas::solvers::SolverKind::Heun))
    ->Arg(static_cast<int>(bas::solvers::SolverKind::SingleAnchor))
    ->Arg(static_cast<int>(bas::solvers::SolverKind::BiAnchor))
    ->Unit(benchmark::kMillisecond);

void BM_SlicedWasserstein(benchmark::State& state) {
  const auto a = bas::data::sample_dataset(bas::data::DatasetKind::GaussianRing8, 2000, 1).points;
  const auto b = bas::data::sample_dataset(bas::data::DatasetKind::GaussianRing8, 2000, 2).points;
  for (auto _ : state) benchmark::DoNotOptimize(bas::data::sliced_wasserstein(a, b, 64, 3));
}
BENCHMARK(BM_SlicedWasserstein)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
