#include <benchmark/benchmark.h>

#include <random>

#include "zsretinex/imageio.hpp"
#include "zsretinex/losses.hpp"
#include "zsretinex/networks.hpp"
#include "zsretinex/ops.hpp"
#include "zsretinex/optimizer.hpp"
#include "zsretinex/pipeline.hpp"

using namespace zsretinex;

namespace {

Tensor uniform(Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = dist(rng);
    return t;
}

// Args: image side, channels in and out.
void BM_Conv2dForward(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const auto ch = static_cast<std::size_t>(state.range(1));
    const Tensor x = uniform({ch, side, side}, 1);
    const Tensor w = uniform({ch, ch, 3, 3}, 2, -0.1, 0.1);
    const Tensor b = uniform({ch}, 3);
    for (auto _ : state) {
        Tape tape;
        benchmark::DoNotOptimize(ops::conv2d(tape.constant(x), tape.constant(w), tape.constant(b), 1).value().data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * side * side));
}
BENCHMARK(BM_Conv2dForward)->Args({64, 32})->Args({128, 32})->Unit(benchmark::kMillisecond);

void BM_Conv2dForwardBackward(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const auto ch = static_cast<std::size_t>(state.range(1));
    Tensor x = uniform({ch, side, side}, 1);
    Tensor w = uniform({ch, ch, 3, 3}, 2, -0.1, 0.1);
    Tensor b = uniform({ch}, 3);
    w.set_requires_grad(true);
    b.set_requires_grad(true);
    for (auto _ : state) {
        Tape tape;
        Var y = ops::sum(ops::conv2d(tape.constant(x), tape.parameter(w), tape.parameter(b), 1));
        tape.backward(y);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * side * side));
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({64, 32})->Args({128, 32})->Unit(benchmark::kMillisecond);

// One optimization iteration (forward, losses, backward, Adam) with default
// settings; includes network initialization and per-image setup.
void BM_DecomposeIteration(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const Tensor s0 = uniform({3, side, side}, 4, 0.0, 0.3);
    EnhanceConfig cfg;
    cfg.iterations = 1;
    for (auto _ : state) benchmark::DoNotOptimize(decompose(s0, cfg).loss_trace.back().total);
}
BENCHMARK(BM_DecomposeIteration)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GaussianFilter(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const Tensor a = uniform({1, side, side}, 5);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::gaussian_filter(a, 1.0, 5).data());
}
BENCHMARK(BM_GaussianFilter)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
