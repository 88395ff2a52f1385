#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ttfs/simulator.hpp"

using namespace ttfs;

namespace {

LayerActivity spikes(std::vector<double> times) {
    LayerActivity a;
    a.spike_times = std::move(times);
    return a;
}

Matrix row_matrix(std::vector<std::vector<double>> rows) {
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    return m;
}

double max_abs_diff(const LayerActivity& a, const LayerActivity& b) {
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (fired(a.spike_times[i]) != fired(b.spike_times[i])) return kNoSpike;
        if (fired(a.spike_times[i]))
            e = std::max(e, std::abs(a.spike_times[i] - b.spike_times[i]));
    }
    return e;
}

}  // namespace

TEST_CASE("encode_input follows t = tau (1 - x)") {
    EncoderConfig enc;
    enc.tau = 5.0;
    const std::vector<double> px = {1.0, 0.0, 0.2};
    const LayerActivity in = encode_input(px, enc, false);
    CHECK(in.spike_times[0] == 0.0);
    CHECK_FALSE(fired(in.spike_times[1]));
    CHECK(in.spike_times[2] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("encode_input rejects out-of-range pixels") {
    EncoderConfig enc;
    const std::vector<double> px = {0.5, 1.5};
    CHECK_THROWS_AS(encode_input(px, enc, false), SimulationError);
}

TEST_CASE("encode_input jitter is seeded, clipped at zero and leaves silent pixels silent") {
    EncoderConfig enc;
    enc.jitter_sigma = 0.5;
    enc.seed = 9;
    std::vector<double> px(200, 1.0);
    px[7] = 0.0;
    const auto a = encode_input(px, enc, true, 3);
    const auto b = encode_input(px, enc, true, 3);
    const auto c = encode_input(px, enc, true, 4);
    CHECK(a.spike_times == b.spike_times);
    CHECK(a.spike_times != c.spike_times);
    CHECK_FALSE(fired(a.spike_times[7]));
    std::size_t positive = 0;
    for (double t : a.spike_times) {
        if (!fired(t)) continue;
        CHECK(t >= 0.0);
        positive += t > 0.0 ? 1 : 0;
    }
    CHECK(positive > 50);
}

TEST_CASE("ideal layer: constant slope crossing") {
    const auto out = forward_layer_ideal(row_matrix({{2.0}}), spikes({0.0}), 1.0, 15.0);
    CHECK(out.spike_times[0] == doctest::Approx(0.5));
    CHECK(out.causal_set(0).size() == 1);
}

TEST_CASE("ideal layer: piecewise-linear crossing") {
    const auto out =
        forward_layer_ideal(row_matrix({{0.5, 0.5}}), spikes({0.0, 1.0}), 1.0, 15.0, true);
    CHECK(out.spike_times[0] == doctest::Approx(1.5));
    CHECK(out.causal_set(0).size() == 2);
    // v(1) = 0.5 is one of the recorded breakpoints
    const auto& tr = out.traces[0];
    CHECK(std::find(tr.begin(), tr.end(), std::make_pair(1.0, 0.5)) != tr.end());
    CHECK(tr.back().first == doctest::Approx(1.5));
}

TEST_CASE("ideal layer: causal set excludes inputs at or after the spike") {
    // crosses at 0.5, the input at 0.5 and the one at 2 are not causal
    const auto out =
        forward_layer_ideal(row_matrix({{2.0, 5.0, 1.0}}), spikes({0.0, 0.5, 2.0}), 1.0, 15.0);
    CHECK(out.spike_times[0] == doctest::Approx(0.5));
    REQUIRE(out.causal_set(0).size() == 1);
    CHECK(out.causal_set(0)[0] == 0);
}

TEST_CASE("ideal layer: silent neurons and the horizon") {
    const auto out = forward_layer_ideal(row_matrix({{-1.0}, {0.05}, {0.2}}), spikes({0.0}), 1.0,
                                         15.0);
    CHECK_FALSE(fired(out.spike_times[0]));
    CHECK_FALSE(fired(out.spike_times[1]));  // would cross at 20 ms
    CHECK(out.spike_times[2] == doctest::Approx(5.0));
    CHECK(out.final_potential[0] == doctest::Approx(-15.0));
}

TEST_CASE("ideal engine matches dense grid integration on 1000 random layers") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> wdist(-0.3, 0.7);
    std::uniform_real_distribution<double> tdist(0.0, 5.0);
    const double dt = 1e-4;
    double worst = 0.0;
    std::size_t compared = 0;
    for (int layer = 0; layer < 1000; ++layer) {
        LayerActivity in;
        for (int j = 0; j < 10; ++j) in.spike_times.push_back(tdist(rng));
        Matrix w(3, 10);
        for (double& x : w.data()) x = wdist(rng);
        const auto out = forward_layer_ideal(w, in, 1.0, 15.0);
        for (std::size_t i = 0; i < 3; ++i) {
            const double ref = oracle::grid_spike_time(w.row(i), in.spike_times, 1.0, 15.0, dt);
            REQUIRE(fired(out.spike_times[i]) == std::isfinite(ref));
            if (!fired(ref)) continue;
            worst = std::max(worst, std::abs(out.spike_times[i] - ref));
            ++compared;
        }
    }
    MESSAGE("compared " << compared << " spikes, worst error " << worst << " ms");
    CHECK(compared > 1500);
    CHECK(worst < 1e-3);
}

TEST_CASE("constrained layer: clocked sampling delays the spike to the next tick") {
    LayerConstraint c;
    c.t_clock = 0.4;
    Rng rng(1);
    const auto out = forward_layer_constrained(row_matrix({{2.0}}), spikes({0.0}), c, 1.0, rng);
    CHECK(out.tick_indices[0] == 2);
    CHECK(out.spike_times[0] == 2.0 * 0.4);
}

TEST_CASE("constrained layer: inputs at a tick do not count at that tick") {
    LayerConstraint c;
    c.t_clock = 1.0;
    Rng rng(1);
    // a single huge input at t = 1 contributes nothing to v(1)
    const auto out = forward_layer_constrained(row_matrix({{100.0}}), spikes({1.0}), c, 1.0, rng);
    CHECK(out.tick_indices[0] == 2);
}

TEST_CASE("constrained layer: membrane floor") {
    LayerConstraint c;
    c.v_min = -0.5;
    Rng rng(1);
    const Matrix w = row_matrix({{-1.0, 2.0}});
    const auto clamped = forward_layer_constrained(w, spikes({0.0, 2.0}), c, 1.0, rng, true);
    CHECK(clamped.spike_times[0] == doctest::Approx(3.5));
    for (const auto& [t, v] : clamped.traces[0]) CHECK(v >= -0.5);
    const auto free = forward_layer_ideal(w, spikes({0.0, 2.0}), 1.0, 15.0);
    CHECK(free.spike_times[0] == doctest::Approx(5.0));
}

TEST_CASE("constrained layer: floor also applies under clocked sampling") {
    LayerConstraint c;
    c.v_min = -0.5;
    c.t_clock = 0.25;
    Rng rng(1);
    const auto out =
        forward_layer_constrained(row_matrix({{-1.0, 2.0}}), spikes({0.0, 2.0}), c, 1.0, rng, true);
    CHECK(out.spike_times[0] == 3.5);
    CHECK(out.tick_indices[0] == 14);
    for (const auto& [t, v] : out.traces[0]) CHECK(v >= -0.5);
}

TEST_CASE("constrained layer: threshold noise is reproducible from the seed") {
    LayerConstraint c;
    c.t_clock = 0.1;
    c.sigma_vth = 0.04;
    Matrix w(20, 5);
    std::mt19937_64 g(3);
    std::uniform_real_distribution<double> u(0.0, 0.6);
    for (double& x : w.data()) x = u(g);
    const auto in = spikes({0.0, 0.5, 1.0, 2.0, 3.0});
    Rng r1(77), r2(77), r3(78);
    const auto a = forward_layer_constrained(w, in, c, 1.0, r1);
    const auto b = forward_layer_constrained(w, in, c, 1.0, r2);
    const auto d = forward_layer_constrained(w, in, c, 1.0, r3);
    CHECK(a.tick_indices == b.tick_indices);
    CHECK(a.spike_times == b.spike_times);
    CHECK(a.tick_indices != d.tick_indices);
}

TEST_CASE("constrained layer: event-exact threshold noise redraws per input event") {
    LayerConstraint c;
    c.sigma_vth = 0.05;
    Matrix w(50, 3, 0.3);
    const auto in = spikes({0.0, 1.0, 2.0});
    Rng rng(5);
    const auto out = forward_layer_constrained(w, in, c, 1.0, rng);
    const auto ideal = forward_layer_ideal(w, in, 1.0, 15.0);
    // identical neurons now fire at different times, all near the ideal time
    std::vector<double> t = out.spike_times;
    std::sort(t.begin(), t.end());
    CHECK(t.front() < t.back());
    for (double x : out.spike_times) CHECK(std::abs(x - ideal.spike_times[0]) < 0.5);
}

TEST_CASE("property: clocked spikes lie on the grid, never early and at most one tick late") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> wpos(0.0, 0.5);
    std::uniform_real_distribution<double> tdist(0.0, 5.0);
    std::uniform_real_distribution<double> clock(0.05, 2.0);
    for (int trial = 0; trial < 300; ++trial) {
        LayerActivity in;
        for (int j = 0; j < 8; ++j) in.spike_times.push_back(tdist(rng));
        Matrix w(4, 8);
        for (double& x : w.data()) x = wpos(rng);  // nondecreasing potential
        LayerConstraint c;
        c.t_clock = clock(rng);
        c.horizon = 1e3;
        Rng r(1);
        const auto ideal = forward_layer_ideal(w, in, 1.0, 1e3);
        const auto clk = forward_layer_constrained(w, in, c, 1.0, r);
        for (std::size_t i = 0; i < 4; ++i) {
            if (!fired(ideal.spike_times[i])) continue;
            REQUIRE(clk.tick_indices[i] != kNoTick);
            CHECK(clk.spike_times[i] == static_cast<double>(clk.tick_indices[i]) * *c.t_clock);
            CHECK(clk.spike_times[i] >= ideal.spike_times[i]);
            CHECK(clk.spike_times[i] <= ideal.spike_times[i] + *c.t_clock + 1e-12);
        }
    }
}

TEST_CASE("property: clocked spikes are never earlier than ideal spikes for mixed-sign weights") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> wdist(-0.5, 0.8);
    std::uniform_real_distribution<double> tdist(0.0, 5.0);
    for (int trial = 0; trial < 300; ++trial) {
        LayerActivity in;
        for (int j = 0; j < 8; ++j) in.spike_times.push_back(tdist(rng));
        Matrix w(4, 8);
        for (double& x : w.data()) x = wdist(rng);
        LayerConstraint c;
        c.t_clock = 0.3;
        Rng r(1);
        const auto ideal = forward_layer_ideal(w, in, 1.0, 15.0);
        const auto clk = forward_layer_constrained(w, in, c, 1.0, r);
        for (std::size_t i = 0; i < 4; ++i)
            if (fired(clk.spike_times[i])) CHECK(clk.spike_times[i] >= ideal.spike_times[i]);
    }
}

TEST_CASE("property: the membrane floor only raises the trajectory") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> wdist(-1.0, 0.8);
    std::uniform_real_distribution<double> tdist(0.0, 5.0);
    for (int trial = 0; trial < 300; ++trial) {
        LayerActivity in;
        for (int j = 0; j < 8; ++j) in.spike_times.push_back(tdist(rng));
        Matrix w(4, 8);
        for (double& x : w.data()) x = wdist(rng);
        LayerConstraint c;
        c.v_min = -0.3;
        Rng r(1);
        const auto free = forward_layer_ideal(w, in, 1.0, 15.0, true);
        const auto clamped = forward_layer_constrained(w, in, c, 1.0, r);
        for (std::size_t i = 0; i < 4; ++i) {
            if (fired(free.spike_times[i])) {
                REQUIRE(fired(clamped.spike_times[i]));
                CHECK(clamped.spike_times[i] <= free.spike_times[i] + 1e-12);
            }
            // pointwise ordering at every breakpoint of the free trajectory
            for (const auto& [t, v] : free.traces[i]) {
                if (t >= clamped.spike_times[i]) break;
                LayerConstraint probe = c;
                probe.horizon = t;
                Rng rp(1);
                // the clamped potential at t is the final potential of a run cut at t
                const auto cut = forward_layer_constrained(w, in, probe, 1.0, rp);
                if (!fired(cut.spike_times[i])) CHECK(cut.final_potential[i] >= v - 1e-12);
            }
        }
    }
}

TEST_CASE("predict: earliest spike, tie-break, and silent fallback") {
    LayerActivity out;
    out.spike_times.assign(10, kNoSpike);
    out.final_potential.assign(10, 0.0);
    out.spike_times[3] = 2.1;
    out.spike_times[5] = 1.7;
    auto p = predict(out);
    CHECK(p.label == 5);
    CHECK_FALSE(p.no_output_spike);
    CHECK_FALSE(p.tie);

    out.spike_times[2] = 1.7;
    p = predict(out);
    CHECK(p.label == 2);
    CHECK(p.tie);

    LayerActivity silent;
    silent.spike_times.assign(3, kNoSpike);
    silent.final_potential = {0.1, 0.7, 0.3};
    p = predict(silent);
    CHECK(p.label == 1);
    CHECK(p.no_output_spike);
}

TEST_CASE("run_network: constrained mode with every constraint off equals the ideal composition") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const NetworkModel m = oracle::random_network({12, 8, 4}, rng, 0.3, 0.6);
        const auto px = oracle::random_pixels(12, rng);
        ConstraintConfig cfg;
        EncoderConfig enc;
        RunOptions ideal_opts;
        RunOptions con_opts;
        con_opts.mode = Mode::constrained;
        const auto a = run_network(m, px, cfg, enc, ideal_opts);
        const auto b = run_network(m, px, cfg, enc, con_opts);
        auto layer = encode_input(px, enc, false);
        for (std::size_t l = 1; l < m.num_layers(); ++l)
            layer = forward_layer_ideal(m.weights[l - 1], layer, 1.0, cfg.horizon);
        CHECK(a.output().spike_times == layer.spike_times);
        CHECK(b.output().spike_times == layer.spike_times);
        CHECK(a.predicted_label == b.predicted_label);
    }
}

TEST_CASE("run_network: fig.2 constraints put spikes on the 2 ms grid above the floor") {
    const NetworkModel m = init_network({784, 800, 10}, 5.0, 1.0, 3);
    std::mt19937_64 rng(4);
    // a stroke-like image: ~20% bright pixels
    const auto px = oracle::random_pixels(784, rng, 0.8);
    ConstraintConfig cfg;
    cfg.t_clock_model = 2.0;
    cfg.v_min = -0.5;
    cfg.sigma_vth = 0.04;
    EncoderConfig enc;
    RunOptions opts;
    opts.mode = Mode::constrained;
    opts.traces = TraceLevel::all;
    const auto r = run_network(m, px, cfg, enc, opts);
    std::size_t spikes_seen = 0;
    for (std::size_t l = 0; l < r.layers.size(); ++l) {
        const auto& a = r.layers[l];
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!fired(a.spike_times[i])) continue;
            ++spikes_seen;
            const double ticks = a.spike_times[i] / 2.0;
            CHECK(ticks == std::round(ticks));
        }
        for (const auto& trace : a.traces)
            for (const auto& [t, v] : trace) CHECK(v >= -0.5);
    }
    CHECK(spikes_seen > 100);
}

TEST_CASE("run_network: fine clock, deep floor and no noise converge to the ideal engine") {
    std::mt19937_64 rng(37);
    std::size_t compared = 0, over = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
        const NetworkModel m = oracle::random_network({5, 4, 3}, rng, 0.4, 0.6);
        const auto px = oracle::random_pixels(5, rng, 0.0);
        ConstraintConfig cfg;
        cfg.t_clock_model = 1e-3;
        cfg.v_min = -1e6;
        EncoderConfig enc;
        RunOptions ideal_opts, con_opts;
        con_opts.mode = Mode::constrained;
        const auto a = run_network(m, px, cfg, enc, ideal_opts);
        const auto b = run_network(m, px, cfg, enc, con_opts);
        // First-order error budget: input rounding is at most T/2, each layer
        // adds at most one tick and scales upstream errors by sum|w|/S.
        const double T = *cfg.t_clock_model;
        std::vector<double> budget(a.layers[0].size(), 0.5 * T);
        for (std::size_t l = 1; l < a.layers.size(); ++l) {
            std::vector<double> next(a.layers[l].size(), 0.0);
            for (std::size_t i = 0; i < a.layers[l].size(); ++i) {
                const double ta = a.layers[l].spike_times[i], tb = b.layers[l].spike_times[i];
                REQUIRE(fired(ta) == fired(tb));
                if (!fired(ta)) continue;
                double s = 0.0, spread = 0.0;
                for (std::size_t j : a.layers[l].causal_set(i)) {
                    s += m.weights[l - 1](i, j);
                    spread += std::abs(m.weights[l - 1](i, j)) * budget[j];
                }
                next[i] = T + spread / s;
                CHECK(std::abs(ta - tb) <= next[i] + 1e-12);
                worst = std::max(worst, std::abs(ta - tb));
                over += std::abs(ta - tb) >= 2e-3 ? 1 : 0;
                ++compared;
            }
            budget = std::move(next);
        }
    }
    MESSAGE("compared " << compared << " spikes, worst " << worst << " ms, " << over
                        << " at or above 2e-3 ms");
    CHECK(compared > 100);
    CHECK(static_cast<double>(over) < 0.05 * static_cast<double>(compared));
}

TEST_CASE("property: clocked network error shrinks monotonically as the clock shrinks") {
    const std::vector<double> clocks = {1.0, 0.1, 0.01, 0.001};
    std::vector<double> error(clocks.size(), 0.0);
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const NetworkModel m = oracle::random_network({6, 5, 3}, rng, 0.4, 0.5);
        const auto px = oracle::random_pixels(6, rng, 0.0);
        EncoderConfig enc;
        RunOptions ideal_opts;
        const auto ideal = run_network(m, px, ConstraintConfig{}, enc, ideal_opts);
        for (std::size_t k = 0; k < clocks.size(); ++k) {
            ConstraintConfig cfg;
            cfg.t_clock_model = clocks[k];
            RunOptions opts;
            opts.mode = Mode::constrained;
            const auto r = run_network(m, px, cfg, enc, opts);
            for (std::size_t i = 0; i < r.output().size(); ++i) {
                const double ti = ideal.output().spike_times[i];
                const double tc = r.output().spike_times[i];
                if (fired(ti) != fired(tc)) error[k] += cfg.horizon;
                else if (fired(ti)) error[k] += std::abs(ti - tc);
            }
        }
    }
    for (std::size_t k = 0; k < clocks.size(); ++k) MESSAGE("T=" << clocks[k] << " err=" << error[k]);
    for (std::size_t k = 1; k < clocks.size(); ++k) CHECK(error[k] < error[k - 1]);
}

TEST_CASE("run_network is deterministic with threshold noise") {
    const NetworkModel m = init_network({50, 30, 10}, 5.0, 1.0, 8);
    std::mt19937_64 rng(6);
    const auto px = oracle::random_pixels(50, rng);
    ConstraintConfig cfg;
    cfg.t_clock_model = 0.2;
    cfg.sigma_vth = 0.04;
    cfg.v_min = -1.0;
    cfg.seed = 12;
    EncoderConfig enc;
    RunOptions opts;
    opts.mode = Mode::constrained;
    opts.sample_index = 5;
    const auto a = run_network(m, px, cfg, enc, opts);
    const auto b = run_network(m, px, cfg, enc, opts);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        CHECK(a.layers[l].spike_times == b.layers[l].spike_times);
        CHECK(a.layers[l].tick_indices == b.layers[l].tick_indices);
    }
}

TEST_CASE("potential minima: single output neuron gives identical statistics") {
    SimulationResult r;
    r.layers.push_back(spikes({0.0, 1.0}));
    r.layers.push_back(
        forward_layer_ideal(row_matrix({{-1.0, 2.0}}), r.layers[0], 1.0, 15.0, true));
    r.earliest_output_time = r.output().spike_times[0];
    const auto m = sample_minima(r);
    CHECK(m.v_min_overall == doctest::Approx(-1.0));
    CHECK(m.v_min_pre_earliest == m.v_min_overall);
}

TEST_CASE("potential minima: a dip after another neuron fires only shows in the overall minimum") {
    SimulationResult r;
    r.layers.push_back(spikes({0.0, 1.0, 3.0}));
    r.layers.push_back(forward_layer_ideal(row_matrix({{2.0, 0.0, 0.0}, {0.0, -1.0, 3.0}}),
                                           r.layers[0], 1.0, 15.0, true));
    const Prediction p = predict(r.output());
    REQUIRE(p.label == 0);
    r.earliest_output_time = r.output().spike_times[0];
    CHECK(r.output().spike_times[1] == doctest::Approx(4.5));
    const auto m = sample_minima(r);
    CHECK(m.v_min_overall == doctest::Approx(-2.0));
    CHECK(m.v_min_pre_earliest > -2.0);
    CHECK(m.v_min_pre_earliest == doctest::Approx(0.0));
}

TEST_CASE("property: pre-earliest minimum never falls below the overall minimum") {
    std::mt19937_64 rng(43);
    std::vector<SimulationResult> results;
    for (int trial = 0; trial < 200; ++trial) {
        const NetworkModel m = oracle::random_network({8, 6, 4}, rng, 0.1, 0.8);
        const auto px = oracle::random_pixels(8, rng);
        ConstraintConfig cfg;
        if (trial % 2) cfg.t_clock_model = 0.6;
        EncoderConfig enc;
        RunOptions opts;
        opts.mode = Mode::constrained;
        opts.traces = TraceLevel::output;
        results.push_back(run_network(m, px, cfg, enc, opts));
    }
    const PotentialStats stats = potential_stats(results);
    REQUIRE(stats.v_min_overall.size() == 200);
    for (std::size_t s = 0; s < 200; ++s)
        CHECK(stats.v_min_pre_earliest[s] >= stats.v_min_overall[s]);
    CHECK(stats.pre_earliest_min() >= stats.overall_min());
}

TEST_CASE("sample_minima requires output traces") {
    SimulationResult r;
    r.layers.push_back(spikes({0.0}));
    r.layers.push_back(forward_layer_ideal(row_matrix({{2.0}}), r.layers[0], 1.0, 15.0));
    CHECK_THROWS_AS(sample_minima(r), SimulationError);
}

TEST_CASE("make_histogram bins values and counts out-of-range ones") {
    const std::vector<double> v = {-3.0, -0.9, -0.1, 0.0, 0.4, 2.0};
    const Histogram h = make_histogram(v, -1.0, 1.0, 4);
    CHECK(h.underflow == 1);
    CHECK(h.overflow == 1);
    CHECK(h.counts == std::vector<std::size_t>{1, 1, 2, 0});
}
