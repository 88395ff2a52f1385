// simulator.hpp
//
// Forward simulation of the non-leaky integrate-and-fire network. Synaptic
// currents are step functions, so every membrane trajectory is piecewise
// linear and can be integrated exactly between events.
//
// Two engines share the same neuron semantics (single spike, potential
// frozen after firing):
//  - ideal: event-exact, continuous spike times, records causal sets;
//  - constrained: applies clocked spike detection, a membrane floor and
//    per-comparison threshold noise, each switchable per layer.

#ifndef TTFS_SIMULATOR_HPP
#define TTFS_SIMULATOR_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ttfs/network.hpp"
#include "ttfs/rng.hpp"

namespace ttfs {

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EncoderConfig {
    double tau = 5.0;           // ms
    double jitter_sigma = 0.0;  // ms, applied only when jitter is requested
    std::uint64_t seed = 0;
};

enum class Mode { ideal, constrained };
enum class TraceLevel { none, output, all };

struct RunOptions {
    Mode mode = Mode::ideal;
    TraceLevel traces = TraceLevel::none;
    bool jitter = false;
    std::uint64_t sample_index = 0;  // selects the per-sample rng stream
};

/// Per-layer view of a ConstraintConfig.
struct LayerConstraint {
    std::optional<double> t_clock;  // set: spikes detected only at ticks
    std::optional<double> v_min;    // set: potential floor
    double sigma_vth = 0.0;
    double horizon = 15.0;

    static LayerConstraint from(const ConstraintConfig& cfg, std::size_t layer);
};

struct Prediction {
    std::size_t label = 0;
    bool no_output_spike = false;
    bool tie = false;
};

struct SimulationResult {
    std::vector<LayerActivity> layers;  // layers[0] is the encoded input
    std::size_t predicted_label = 0;
    bool no_output_spike = false;
    bool tie = false;
    std::optional<double> earliest_output_time;
    std::optional<std::int64_t> earliest_output_tick;

    const LayerActivity& output() const { return layers.back(); }
};

/// t = tau (1 - x) for x > 0; x == 0 emits no spike. Jitter (if requested)
/// is Gaussian with enc.jitter_sigma, clipped below at zero, drawn from the
/// (enc.seed, stream) generator.
LayerActivity encode_input(std::span<const double> pixels, const EncoderConfig& enc,
                           bool jitter_on, std::uint64_t stream = 0);

/// Rounds every input spike to the nearest multiple of t_clock.
void discretize_input(LayerActivity& input, double t_clock);

LayerActivity forward_layer_ideal(const Matrix& weights, const LayerActivity& inputs,
                                  double v_th, double horizon, bool record_traces = false);

LayerActivity forward_layer_constrained(const Matrix& weights, const LayerActivity& inputs,
                                        const LayerConstraint& constraint, double v_th,
                                        Rng& rng, bool record_traces = false);

/// Earliest finite spike wins, ties to the lowest index. Without any output
/// spike the label is the argmax of the final membrane potential.
Prediction predict(const LayerActivity& output);

/// Quantization is not applied here: pass an already-quantized model.
SimulationResult run_network(const NetworkModel& model, std::span<const double> pixels,
                             const ConstraintConfig& cfg, const EncoderConfig& enc,
                             const RunOptions& options);

struct SampleMinima {
    double v_min_overall;       // min_i min_{t < t_i} v_i(t)
    double v_min_pre_earliest;  // min_i min_{t < min_j t_j} v_i(t)
};

/// Requires output-layer traces.
SampleMinima sample_minima(const SimulationResult& result);

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::size_t> counts;
    std::size_t underflow = 0;
    std::size_t overflow = 0;

    double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
    double mean_bin_value() const;
};

Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

struct PotentialStats {
    std::vector<double> v_min_overall;
    std::vector<double> v_min_pre_earliest;

    void add(const SampleMinima& m) {
        v_min_overall.push_back(m.v_min_overall);
        v_min_pre_earliest.push_back(m.v_min_pre_earliest);
    }
    double overall_min() const;
    double pre_earliest_min() const;
    Histogram overall_histogram(double lo, double hi, std::size_t bins) const {
        return make_histogram(v_min_overall, lo, hi, bins);
    }
    Histogram pre_earliest_histogram(double lo, double hi, std::size_t bins) const {
        return make_histogram(v_min_pre_earliest, lo, hi, bins);
    }
};

PotentialStats potential_stats(std::span<const SimulationResult> results);

}  // namespace ttfs

#endif  // TTFS_SIMULATOR_HPP
