#include <benchmark/benchmark.h>

#include "roicae/cae.hpp"
#include "roicae/losses.hpp"
#include "roicae/rng.hpp"
#include "roicae/tape.hpp"

using namespace roicae;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

void BM_Conv2dForward(benchmark::State& state) {
    Rng rng(1);
    Tensor x = random_tensor({8, 8, 56, 80}, rng);
    Tensor k = random_tensor({16, 8, 4, 4}, rng, -0.1, 0.1);
    Tensor b = random_tensor({16}, rng, -0.1, 0.1);
    for (auto _ : state) {
        Tensor y = detail::conv2d_forward(x, k, b, 2, 1);
        benchmark::DoNotOptimize(y.data.data());
    }
}
BENCHMARK(BM_Conv2dForward)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
    Rng rng(1);
    Tensor x = random_tensor({8, 8, 56, 80}, rng);
    Tensor k = random_tensor({16, 8, 4, 4}, rng, -0.1, 0.1);
    Tensor b = random_tensor({16}, rng, -0.1, 0.1);
    Tensor gy = random_tensor({8, 16, 28, 40}, rng, -1.0, 1.0);
    for (auto _ : state) {
        Tensor gx(x.shape), gk(k.shape), gb(b.shape);
        detail::conv2d_backward(x, k, gy, 2, 1, gx, gk, gb);
        benchmark::DoNotOptimize(gx.data.data());
    }
}
BENCHMARK(BM_Conv2dBackward)->Unit(benchmark::kMillisecond);

void BM_MsSsimBackward(benchmark::State& state) {
    Rng rng(2);
    Tensor x = random_tensor({8, 1, 112, 160}, rng);
    Tensor y = random_tensor({8, 1, 112, 160}, rng);
    for (auto _ : state) {
        Tape tape;
        auto xn = tape.leaf(x);
        auto yn = tape.leaf(y);
        auto loss = phase1_loss_node(tape, xn, yn);
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.grad(yn).data.data());
    }
}
BENCHMARK(BM_MsSsimBackward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    Rng rng(3);
    CaeConfig cfg;
    Rng init = rng.sub(1);
    ParamMap params = init_cae_params(cfg, init);
    Tensor x = random_tensor({8, 1, cfg.height, cfg.width}, rng);
    for (auto _ : state) {
        Tape tape;
        CaeGraph g = cae_forward(tape, cfg, params, x, true);
        auto loss = phase1_loss_node(tape, g.input, g.xhat);
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.grad(g.params.at("enc1.w")).data.data());
    }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
