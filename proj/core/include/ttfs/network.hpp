// network.hpp
//
// Domain types shared by the simulator, trainer and circuit mapping:
// the feed-forward network, the constraint knobs applied at inference
// time, physical circuit constants and per-layer spike activity.

#ifndef TTFS_NETWORK_HPP
#define TTFS_NETWORK_HPP

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ttfs {

/// Spike time used for neurons that never reach threshold.
inline constexpr double kNoSpike = std::numeric_limits<double>::infinity();
/// Tick index used for neurons that never reach threshold.
inline constexpr std::int64_t kNoTick = -1;

inline bool fired(double spike_time) { return spike_time != kNoSpike; }

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix. Row i holds the fan-in weights of neuron i.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// The trained continuous-time object. weights[l] maps layer l to layer l+1,
/// with shape (layer_sizes[l+1], layer_sizes[l]).
struct NetworkModel {
    std::vector<std::size_t> layer_sizes;
    std::vector<Matrix> weights;
    double v_th_model = 1.0;
    double tau = 5.0;  // ms

    std::size_t num_layers() const { return layer_sizes.size(); }
    std::size_t output_size() const { return layer_sizes.back(); }

    bool operator==(const NetworkModel&) const = default;
};

/// Inference-time circuit constraints. Per-layer flags are indexed by layer
/// (0 = input). An empty flag vector applies the knob to every eligible
/// layer whenever the knob itself is set.
struct ConstraintConfig {
    std::optional<double> t_clock_model;  // ms
    std::vector<bool> discretize;         // size num_layers
    std::optional<double> w_min;
    std::optional<double> v_min;
    std::vector<bool> clamp;              // size num_layers, entry 0 ignored
    double sigma_vth = 0.0;
    double horizon = 15.0;                // ms
    std::uint64_t seed = 0;

    bool discretize_layer(std::size_t layer) const;
    bool clamp_layer(std::size_t layer) const;
    bool any_constraint() const;
};

/// Physical constants of the capacitor-integrator neuron (SI units).
struct CircuitParams {
    double capacitance = 100e-15;     // F
    double i_min = 10e-12;            // A
    double v_th_circuit = 1.0;        // V
    double t_clock_circuit = 100e-9;  // s

    void validate() const;
};

/// Spikes emitted by one layer. For non-input layers causal_count[i] is the
/// length of the prefix of input_order that arrived strictly before neuron
/// i fired; input_order lists the fired presynaptic neurons by ascending
/// spike time (ties by index).
struct LayerActivity {
    std::vector<double> spike_times;
    std::vector<std::int64_t> tick_indices;  // empty in continuous mode
    std::vector<std::size_t> input_order;
    std::vector<std::size_t> causal_count;
    std::vector<std::vector<std::pair<double, double>>> traces;  // (ms, potential)
    std::vector<double> final_potential;

    std::size_t size() const { return spike_times.size(); }
    std::span<const std::size_t> causal_set(std::size_t neuron) const {
        return {input_order.data(), causal_count.at(neuron)};
    }
};

/// Throws ConfigError naming the violated invariant.
void validate_model(const NetworkModel& model);
void validate_config(const NetworkModel& model, const ConstraintConfig& cfg);

/// Standard deviation of initial weights is std_scale / sqrt(fan_in).
inline constexpr double kDefaultInitStdScale = 1.0;

/// Mean-shifted Gaussian initialization: mean 2 v_th / (fan_in tau), so the
/// expected slope after all inputs arrive reaches threshold within tau/2.
NetworkModel init_network(const std::vector<std::size_t>& layer_sizes, double tau,
                          double v_th_model, std::uint64_t seed,
                          double std_scale = kDefaultInitStdScale);

}  // namespace ttfs

#endif  // TTFS_NETWORK_HPP
