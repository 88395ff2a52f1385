// circuit.hpp
//
// Weight quantization, the capacitor-integrator circuit model and the
// model-to-circuit clock mapping.
//
// The circuit neuron obeys C dv/dt = I_min * sum_j I_ij theta(t - t_j) and
// is compared with V_th^circuit once per circuit clock. With integer
// currents I_ij equal to the weight levels, it reproduces the clocked model
// neuron exactly when
//
//     T_model * w_min = T_circuit * I_min * V_th^model / (C * V_th^circuit).

#ifndef TTFS_CIRCUIT_HPP
#define TTFS_CIRCUIT_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ttfs/dataio.hpp"
#include "ttfs/network.hpp"
#include "ttfs/trainer.hpp"

namespace ttfs {

/// Integer weight levels of one layer, row-major like Matrix.
struct LevelMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int64_t> levels;

    std::int64_t operator()(std::size_t r, std::size_t c) const { return levels[r * cols + c]; }
    std::int64_t max_abs() const;
};

struct QuantizedNetwork {
    NetworkModel source;  // topology, v_th, tau of the original model
    double w_min = 0.0;
    std::vector<LevelMatrix> levels;

    /// Per-layer level count max|level|.
    std::vector<std::int64_t> level_counts() const;
    /// Largest level count over all layers.
    std::int64_t level_count() const;
    /// Real-valued model with w = w_min * level.
    NetworkModel dequantized() const;
};

/// round(w / w_min), halves away from zero.
std::int64_t quantize_level(double w, double w_min);
QuantizedNetwork quantize_weights(const NetworkModel& model, double w_min);

/// w_min that makes a layer's level count equal to `levels`:
/// max_l max|w| / levels.
double w_min_for_levels(const NetworkModel& model, double levels);

/// w_min = T_circuit I_min V_th^model / (C V_th^circuit T_model) with
/// T_model in ms, so the result is in the model's weight unit (1/ms). The
/// default circuit gives 1e-5 /ms (0.01 /s) at T_model = 1 ms.
double derive_wmin(const CircuitParams& circuit, double t_clock_model_ms, double v_th_model);

/// Activity of the circuit in physical units. Spike times are seconds.
struct CircuitActivity {
    std::vector<std::vector<std::int64_t>> ticks;          // per layer, kNoTick if silent
    std::vector<std::vector<double>> firing_potential;     // volts at the firing tick
};

/// Integrates the circuit network exactly in volts. input_ticks are tick
/// indices on the circuit clock (kNoTick: no spike). Neurons fire at the
/// first tick p <= horizon_ticks with v(p T_circuit) >= V_th^circuit.
CircuitActivity simulate_circuit_network(const QuantizedNetwork& qnet,
                                         const CircuitParams& circuit,
                                         std::span<const std::int64_t> input_ticks,
                                         std::int64_t horizon_ticks);

struct SweepRow {
    double t_clock_model = 0.0;  // ms
    double w_min = 0.0;
    std::vector<std::int64_t> levels_per_layer;
    double accuracy = 0.0;
    double mean_spike_time_model_ms = 0.0;
    double mean_spike_time_circuit_s = 0.0;  // mean earliest tick * T_circuit
    double no_spike_rate = 0.0;
};

struct OperatingPoint {
    double t_clock_model = 0.0;
    double accuracy = 0.0;
    double floor = 0.0;
};

class InfeasibleError : public std::runtime_error {
public:
    InfeasibleError(const std::string& what, double best_accuracy)
        : std::runtime_error(what), best_accuracy_(best_accuracy) {}
    double best_accuracy() const { return best_accuracy_; }

private:
    double best_accuracy_;
};

/// Which circuit effects a sweep applies at each grid point.
struct SweepTemplate {
    bool discretize = true;  // all layers on the model clock
    bool quantize = true;    // w_min from derive_wmin
    std::optional<double> v_min;
    double sigma_vth = 0.0;
    double horizon = 15.0;
    std::uint64_t seed = 0;
};

/// Evaluates every grid point (results in grid order).
std::vector<SweepRow> sweep(const NetworkModel& model, const Dataset& data,
                            const CircuitParams& circuit, std::span<const double> t_model_grid,
                            const SweepTemplate& tmpl, const EncoderConfig& enc,
                            std::size_t workers = 1);

/// Largest T_model whose accuracy meets the floor. Throws InfeasibleError.
OperatingPoint select_operating_point(std::span<const SweepRow> rows, double accuracy_floor);

struct SweepOutcome {
    std::vector<SweepRow> rows;
    OperatingPoint selected;
};

SweepOutcome sweep_and_select(const NetworkModel& model, const Dataset& data,
                              const CircuitParams& circuit, std::span<const double> t_model_grid,
                              double accuracy_floor, const SweepTemplate& tmpl,
                              const EncoderConfig& enc, std::size_t workers = 1);

Table sweep_table(std::span<const SweepRow> rows);

}  // namespace ttfs

#endif  // TTFS_CIRCUIT_HPP
