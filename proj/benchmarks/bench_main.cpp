#include <benchmark/benchmark.h>

#include <random>

#include "ttfs/circuit.hpp"
#include "ttfs/simulator.hpp"

using namespace ttfs;

namespace {

NetworkModel random_model(std::vector<std::size_t> sizes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    NetworkModel m;
    m.layer_sizes = sizes;
    for (std::size_t l = 1; l < sizes.size(); ++l) {
        // scaled so a typical neuron fires a few ms after its inputs
        std::normal_distribution<double> d(0.4 / static_cast<double>(sizes[l - 1]),
                                           1.0 / std::sqrt(static_cast<double>(sizes[l - 1])));
        Matrix w(sizes[l], sizes[l - 1]);
        for (double& x : w.data()) x = d(rng);
        m.weights.push_back(std::move(w));
    }
    return m;
}

std::vector<double> random_pixels(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> px(n);
    // MNIST-like: most pixels dark
    for (double& x : px) x = u(rng) < 0.8 ? 0.0 : u(rng);
    return px;
}

}  // namespace

static void BM_IdealLayer(benchmark::State& state) {
    const auto fan_in = static_cast<std::size_t>(state.range(0));
    const NetworkModel m = random_model({fan_in, 800}, 1);
    const auto px = random_pixels(fan_in, 2);
    const LayerActivity in = encode_input(px, EncoderConfig{}, false);
    for (auto _ : state) benchmark::DoNotOptimize(forward_layer_ideal(m.weights[0], in, 1.0, 15.0));
    state.SetItemsProcessed(state.iterations() * 800);
}
BENCHMARK(BM_IdealLayer)->Arg(100)->Arg(784);

static void BM_RunNetwork(benchmark::State& state) {
    const NetworkModel m = random_model({784, 800, 10}, 3);
    const auto px = random_pixels(784, 4);
    ConstraintConfig cfg;
    RunOptions opts;
    if (state.range(0) == 1) {
        cfg.t_clock_model = 0.8;
        cfg.v_min = -1.0;
        cfg.sigma_vth = 0.04;
        opts.mode = Mode::constrained;
    }
    for (auto _ : state) benchmark::DoNotOptimize(run_network(m, px, cfg, EncoderConfig{}, opts));
}
BENCHMARK(BM_RunNetwork)->Arg(0)->Arg(1)->ArgNames({"constrained"});

static void BM_CircuitNetwork(benchmark::State& state) {
    const NetworkModel m = random_model({784, 800, 10}, 5);
    const CircuitParams c;
    const double t_model = 0.8;
    const QuantizedNetwork q = quantize_weights(m, derive_wmin(c, t_model, 1.0) * 64.0);
    const auto px = random_pixels(784, 6);
    std::vector<std::int64_t> ticks;
    for (double x : px)
        ticks.push_back(x > 0.0 ? std::llround(5.0 * (1.0 - x) / t_model) : kNoTick);
    const auto horizon = static_cast<std::int64_t>(15.0 / t_model);
    for (auto _ : state) benchmark::DoNotOptimize(simulate_circuit_network(q, c, ticks, horizon));
}
BENCHMARK(BM_CircuitNetwork);
BENCHMARK_MAIN();
