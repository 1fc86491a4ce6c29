#include <benchmark/benchmark.h>

#include <random>

#include "vggsvm/layers.hpp"
#include "vggsvm/vgg.hpp"

using namespace vggsvm;

namespace {

Tensor random_tensor(Tensor::Shape shape, std::uint64_t seed)
{
    Tensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : t.data()) v = u(rng);
    return t;
}

// args: channels, side
void BM_Conv3x3Forward(benchmark::State& state)
{
    const auto c = static_cast<std::size_t>(state.range(0));
    const auto s = static_cast<std::size_t>(state.range(1));
    const auto x = random_tensor({8, c, s, s}, 1);
    const auto w = random_tensor({c, c, 3, 3}, 2);
    const auto b = random_tensor({c}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(nn::conv3x3_forward(x, w, b));
    state.SetItemsProcessed(state.iterations() * 8 * static_cast<std::int64_t>(c * c * s * s * 9));
}
BENCHMARK(BM_Conv3x3Forward)->Args({8, 32})->Args({16, 16})->Args({64, 8})->Unit(benchmark::kMicrosecond);

void BM_Conv3x3Backward(benchmark::State& state)
{
    const auto c = static_cast<std::size_t>(state.range(0));
    const auto s = static_cast<std::size_t>(state.range(1));
    const auto x = random_tensor({8, c, s, s}, 1);
    const auto w = random_tensor({c, c, 3, 3}, 2);
    const auto g = random_tensor({8, c, s, s}, 3);
    Tensor gx(x.shape()), gw(w.shape()), gb({c});
    for (auto _ : state)
    {
        nn::conv3x3_backward(x, w, g, &gx, gw, gb);
        benchmark::DoNotOptimize(gx.data().data());
    }
}
BENCHMARK(BM_Conv3x3Backward)->Args({8, 32})->Args({64, 8})->Unit(benchmark::kMicrosecond);

void BM_Vgg19DeskForward(benchmark::State& state)
{
    const auto model = vgg::build(vgg::make_config(vgg::Variant::Vgg19, 0.125, 32), 0);
    const auto x = random_tensor({static_cast<std::size_t>(state.range(0)), 3, 32, 32}, 4);
    for (auto _ : state) benchmark::DoNotOptimize(vgg::forward(model, x));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Vgg19DeskForward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
