#include <benchmark/benchmark.h>

#include <random>

#include "vggsvm/svm.hpp"

using namespace vggsvm;

namespace {

// Two Gaussian clouds, mean +/-0.5 on every axis.
dataset::LabeledFeatureSet clouds(std::size_t n, std::size_t d, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    dataset::LabeledFeatureSet set;
    set.vectors = Tensor({n, d});
    for (std::size_t i = 0; i < n; ++i)
    {
        const std::int8_t y = i % 2 ? 1 : -1;
        set.labels.push_back(y);
        for (std::size_t j = 0; j < d; ++j) set.vectors[i * d + j] = 0.5 * y + noise(rng);
    }
    return set;
}

void BM_GramRbf(benchmark::State& state)
{
    const auto data = clouds(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)), 1);
    const auto k = svm::KernelSpec::rbf(1.0 / static_cast<double>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(svm::gram_matrix(k, data.vectors));
}
BENCHMARK(BM_GramRbf)->Args({140, 512})->Args({1260, 512})->Unit(benchmark::kMillisecond);

// args: n, d, kernel (0 linear, 1 rbf), C * 1000
void BM_SmoTrain(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const auto data = clouds(n, d, 2);
    const auto kernel = state.range(2) ? svm::KernelSpec::rbf(1.0 / static_cast<double>(d)) : svm::KernelSpec::linear();
    svm::SvmTrainConfig cfg;
    cfg.C = static_cast<double>(state.range(3)) / 1000.0;
    std::size_t svs = 0;
    for (auto _ : state)
    {
        const auto r = svm::train(data, kernel, cfg);
        svs = r.model.size();
        benchmark::DoNotOptimize(r.model.bias);
    }
    state.counters["support_vectors"] = static_cast<double>(svs);
}
BENCHMARK(BM_SmoTrain)
    ->Args({200, 64, 1, 1000})
    ->Args({1000, 64, 1, 1000})
    ->Args({1000, 64, 0, 1000})
    ->Args({1000, 64, 1, 1})
    ->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state)
{
    const auto train = clouds(1000, 64, 3);
    const auto test = clouds(static_cast<std::size_t>(state.range(0)), 64, 4);
    svm::SvmTrainConfig cfg;
    cfg.C = 1.0;
    const auto model = svm::train(train, svm::KernelSpec::rbf(1.0 / 64.0), cfg).model;
    for (auto _ : state) benchmark::DoNotOptimize(svm::predict(model, test.vectors));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Predict)->Arg(540)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
