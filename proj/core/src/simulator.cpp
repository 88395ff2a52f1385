// simulator.cpp

#include "ttfs/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ttfs {

namespace {

struct Events {
    std::vector<double> times;
    std::vector<std::size_t> idx;
    std::size_t size() const { return times.size(); }
};

Events sorted_events(const LayerActivity& in, double horizon) {
    std::vector<std::size_t> order;
    order.reserve(in.size());
    for (std::size_t j = 0; j < in.size(); ++j)
        if (fired(in.spike_times[j]) && in.spike_times[j] <= horizon) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ta = in.spike_times[a], tb = in.spike_times[b];
        return ta < tb || (ta == tb && a < b);
    });
    Events ev;
    ev.times.reserve(order.size());
    for (std::size_t j : order) ev.times.push_back(in.spike_times[j]);
    ev.idx = std::move(order);
    return ev;
}

using Trace = std::vector<std::pair<double, double>>;

struct Outcome {
    double time = kNoSpike;
    std::int64_t tick = kNoTick;
    std::size_t causal = 0;
    double final_v = 0.0;
};

void push_trace(Trace* trace, double t, double v) {
    if (!trace) return;
    if (!trace->empty() && trace->back().first == t) {
        trace->back().second = v;
        return;
    }
    trace->emplace_back(t, v);
}

// Piecewise-linear integration between input events. Threshold noise is
// redrawn whenever the set of active inputs changes.
template <bool Clamp, bool Noise>
Outcome integrate_exact(std::span<const double> w, const Events& ev, double v_th,
                        double v_min, double sigma, double horizon, Rng* rng,
                        Trace* trace) {
    Outcome out;
    std::normal_distribution<double> noise(0.0, 1.0);
    double v = 0.0, slope = 0.0, t = 0.0;
    double th = v_th;
    if constexpr (Noise) th = v_th + sigma * noise(*rng);
    push_trace(trace, 0.0, 0.0);
    if constexpr (Noise) {
        if (v >= th) {
            out.time = 0.0;
            out.final_v = v;
            return out;
        }
    }
    const std::size_t n = ev.size();
    for (std::size_t k = 0; k < n; ++k) {
        const double te = ev.times[k];
        const double v_end = v + slope * (te - t);
        if (slope > 0.0 && v_end >= th) {
            out.time = std::min(t + (th - v) / slope, te);
            out.causal = k;
            out.final_v = th;
            push_trace(trace, out.time, th);
            return out;
        }
        if constexpr (Clamp) v = std::max(v_min, v_end);
        else v = v_end;
        t = te;
        slope += w[ev.idx[k]];
        push_trace(trace, t, v);
        if constexpr (Noise) {
            if (k + 1 == n || ev.times[k + 1] != te) {
                th = v_th + sigma * noise(*rng);
                if (v >= th) {
                    out.time = t;
                    out.causal = static_cast<std::size_t>(
                        std::lower_bound(ev.times.begin(), ev.times.begin() + k, te) -
                        ev.times.begin());
                    out.final_v = v;
                    return out;
                }
            }
        }
    }
    const double v_end = v + slope * (horizon - t);
    if (slope > 0.0 && v_end >= th) {
        out.time = std::min(t + (th - v) / slope, horizon);
        out.causal = n;
        out.final_v = th;
        push_trace(trace, out.time, th);
        return out;
    }
    out.final_v = Clamp ? std::max(v_min, v_end) : v_end;
    out.causal = n;
    push_trace(trace, horizon, out.final_v);
    return out;
}

// Clocked detection: the potential is integrated exactly but compared with
// the threshold only at t = p * t_clock. Inputs arriving at a tick contribute
// nothing to the potential sampled at that tick.
template <bool Clamp, bool Noise>
Outcome integrate_ticks(std::span<const double> w, const Events& ev, double v_th,
                        double t_clock, double v_min, double sigma, double horizon, Rng* rng,
                        Trace* trace) {
    Outcome out;
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto last_tick = static_cast<std::int64_t>(std::floor(horizon / t_clock + 1e-9));
    const std::size_t n = ev.size();
    double v = 0.0, slope = 0.0, t = 0.0;
    std::size_t e = 0;
    auto advance = [&](double to) {
        const double v_end = v + slope * (to - t);
        if constexpr (Clamp) v = std::max(v_min, v_end);
        else v = v_end;
        t = to;
    };
    for (std::int64_t p = 0; p <= last_tick; ++p) {
        const double tp = static_cast<double>(p) * t_clock;
        while (e < n && ev.times[e] < tp) {
            advance(ev.times[e]);
            slope += w[ev.idx[e]];
            ++e;
        }
        advance(tp);
        push_trace(trace, tp, v);
        double th = v_th;
        if constexpr (Noise) th = v_th + sigma * noise(*rng);
        if (v >= th) {
            out.time = tp;
            out.tick = p;
            out.causal = e;
            out.final_v = v;
            return out;
        }
        if constexpr (!Noise) {
            if (e == n && slope <= 0.0) break;
        }
    }
    out.causal = e;
    out.final_v = v;
    return out;
}

template <bool Clamp, bool Noise>
Outcome integrate(std::span<const double> w, const Events& ev, double v_th,
                  const LayerConstraint& c, Rng* rng, Trace* trace) {
    const double v_min = c.v_min.value_or(0.0);
    if (c.t_clock)
        return integrate_ticks<Clamp, Noise>(w, ev, v_th, *c.t_clock, v_min, c.sigma_vth,
                                             c.horizon, rng, trace);
    return integrate_exact<Clamp, Noise>(w, ev, v_th, v_min, c.sigma_vth, c.horizon, rng, trace);
}

LayerActivity run_layer(const Matrix& weights, const LayerActivity& inputs,
                        const LayerConstraint& c, double v_th, Rng* rng, bool record_traces) {
    if (weights.cols() != inputs.size())
        throw SimulationError("weight matrix does not match presynaptic layer width");
    Events ev = sorted_events(inputs, c.horizon);
    const std::size_t n_out = weights.rows();
    LayerActivity out;
    out.spike_times.assign(n_out, kNoSpike);
    out.causal_count.assign(n_out, 0);
    out.final_potential.assign(n_out, 0.0);
    if (c.t_clock) out.tick_indices.assign(n_out, kNoTick);
    if (record_traces) out.traces.resize(n_out);

    const bool clamp = c.v_min.has_value();
    const bool noise = c.sigma_vth > 0.0;
    for (std::size_t i = 0; i < n_out; ++i) {
        Trace* trace = record_traces ? &out.traces[i] : nullptr;
        const auto w = weights.row(i);
        Outcome o;
        if (clamp && noise) o = integrate<true, true>(w, ev, v_th, c, rng, trace);
        else if (clamp) o = integrate<true, false>(w, ev, v_th, c, rng, trace);
        else if (noise) o = integrate<false, true>(w, ev, v_th, c, rng, trace);
        else o = integrate<false, false>(w, ev, v_th, c, rng, trace);
        out.spike_times[i] = o.time;
        out.causal_count[i] = o.causal;
        out.final_potential[i] = o.final_v;
        if (c.t_clock) out.tick_indices[i] = o.tick;
    }
    out.input_order = std::move(ev.idx);
    return out;
}

}  // namespace

LayerConstraint LayerConstraint::from(const ConstraintConfig& cfg, std::size_t layer) {
    LayerConstraint c;
    if (cfg.discretize_layer(layer)) c.t_clock = cfg.t_clock_model;
    if (cfg.clamp_layer(layer)) c.v_min = cfg.v_min;
    c.sigma_vth = cfg.sigma_vth;
    c.horizon = cfg.horizon;
    return c;
}

LayerActivity encode_input(std::span<const double> pixels, const EncoderConfig& enc,
                           bool jitter_on, std::uint64_t stream) {
    LayerActivity out;
    out.spike_times.assign(pixels.size(), kNoSpike);
    const bool jitter = jitter_on && enc.jitter_sigma > 0.0;
    Rng rng = make_rng(enc.seed, stream);
    std::normal_distribution<double> noise(0.0, enc.jitter_sigma > 0.0 ? enc.jitter_sigma : 1.0);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const double x = pixels[i];
        if (!(x >= 0.0 && x <= 1.0))
            throw SimulationError("pixel value outside [0, 1] at index " + std::to_string(i));
        if (x == 0.0) continue;
        double t = enc.tau * (1.0 - x);
        if (jitter) t = std::max(0.0, t + noise(rng));
        out.spike_times[i] = t;
    }
    return out;
}

void discretize_input(LayerActivity& input, double t_clock) {
    for (double& t : input.spike_times)
        if (fired(t)) t = std::round(t / t_clock) * t_clock;
    input.tick_indices.assign(input.size(), kNoTick);
    for (std::size_t i = 0; i < input.size(); ++i)
        if (fired(input.spike_times[i]))
            input.tick_indices[i] = std::llround(input.spike_times[i] / t_clock);
}

LayerActivity forward_layer_ideal(const Matrix& weights, const LayerActivity& inputs,
                                  double v_th, double horizon, bool record_traces) {
    LayerConstraint c;
    c.horizon = horizon;
    return run_layer(weights, inputs, c, v_th, nullptr, record_traces);
}

LayerActivity forward_layer_constrained(const Matrix& weights, const LayerActivity& inputs,
                                        const LayerConstraint& constraint, double v_th,
                                        Rng& rng, bool record_traces) {
    return run_layer(weights, inputs, constraint, v_th, &rng, record_traces);
}

Prediction predict(const LayerActivity& output) {
    Prediction p;
    const std::size_t n = output.size();
    double best = kNoSpike;
    std::size_t count = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = output.spike_times[k];
        if (!fired(t)) continue;
        if (t < best) {
            best = t;
            p.label = k;
            count = 1;
        } else if (t == best) {
            ++count;
        }
    }
    if (fired(best)) {
        p.tie = count > 1;
        return p;
    }
    p.no_output_spike = true;
    if (!output.final_potential.empty()) {
        p.label = static_cast<std::size_t>(
            std::max_element(output.final_potential.begin(), output.final_potential.end()) -
            output.final_potential.begin());
    }
    return p;
}

SimulationResult run_network(const NetworkModel& model, std::span<const double> pixels,
                             const ConstraintConfig& cfg, const EncoderConfig& enc,
                             const RunOptions& options) {
    if (pixels.size() != model.layer_sizes.front())
        throw SimulationError("input width does not match the network");
    const bool constrained = options.mode == Mode::constrained;
    SimulationResult result;
    result.layers.reserve(model.num_layers());
    result.layers.push_back(encode_input(pixels, enc, options.jitter, options.sample_index));
    if (constrained && cfg.discretize_layer(0))
        discretize_input(result.layers.front(), *cfg.t_clock_model);

    Rng rng = make_rng(cfg.seed, options.sample_index);
    const std::size_t last = model.num_layers() - 1;
    for (std::size_t l = 1; l <= last; ++l) {
        const bool traces = options.traces == TraceLevel::all ||
                            (options.traces == TraceLevel::output && l == last);
        LayerConstraint c;
        c.horizon = cfg.horizon;
        if (constrained) c = LayerConstraint::from(cfg, l);
        result.layers.push_back(run_layer(model.weights[l - 1], result.layers[l - 1], c,
                                          model.v_th_model, &rng, traces));
    }

    const Prediction p = predict(result.output());
    result.predicted_label = p.label;
    result.no_output_spike = p.no_output_spike;
    result.tie = p.tie;
    if (!p.no_output_spike) {
        result.earliest_output_time = result.output().spike_times[p.label];
        if (!result.output().tick_indices.empty())
            result.earliest_output_tick = result.output().tick_indices[p.label];
    }
    return result;
}

SampleMinima sample_minima(const SimulationResult& result) {
    const LayerActivity& out = result.output();
    if (out.traces.size() != out.size())
        throw SimulationError("output-layer traces were not recorded");
    const double earliest = result.earliest_output_time.value_or(kNoSpike);
    SampleMinima m{kNoSpike, kNoSpike};
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double own = out.spike_times[i];
        for (const auto& [t, v] : out.traces[i]) {
            if (t < own) m.v_min_overall = std::min(m.v_min_overall, v);
            if (t < earliest) m.v_min_pre_earliest = std::min(m.v_min_pre_earliest, v);
        }
    }
    return m;
}

double Histogram::mean_bin_value() const {
    double total = 0.0, weight = 0.0;
    for (std::size_t b = 0; b < counts.size(); ++b) {
        const double centre = lo + (static_cast<double>(b) + 0.5) * bin_width();
        total += centre * static_cast<double>(counts[b]);
        weight += static_cast<double>(counts[b]);
    }
    return weight > 0.0 ? total / weight : 0.0;
}

Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
    if (!(hi > lo) || bins == 0) throw std::invalid_argument("bad histogram range");
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.counts.assign(bins, 0);
    for (double v : values) {
        if (v < lo) {
            ++h.underflow;
        } else if (v >= hi) {
            ++h.overflow;
        } else {
            auto b = static_cast<std::size_t>((v - lo) / h.bin_width());
            ++h.counts[std::min(b, bins - 1)];
        }
    }
    return h;
}

double PotentialStats::overall_min() const {
    return v_min_overall.empty() ? 0.0
                                 : *std::min_element(v_min_overall.begin(), v_min_overall.end());
}

double PotentialStats::pre_earliest_min() const {
    return v_min_pre_earliest.empty()
               ? 0.0
               : *std::min_element(v_min_pre_earliest.begin(), v_min_pre_earliest.end());
}

PotentialStats potential_stats(std::span<const SimulationResult> results) {
    PotentialStats stats;
    for (const auto& r : results) stats.add(sample_minima(r));
    return stats;
}

}  // namespace ttfs
