// trainer.hpp
//
// Supervised training of the ideal (continuous-time) network with exact
// spike-time gradients, and the evaluation harness used by every experiment.
//
// For a fired neuron with causal set G (inputs strictly before its spike)
// the crossing time has the closed form
//
//     t_i = (V_th + sum_{j in G} w_ij t_j) / S_i,   S_i = sum_{j in G} w_ij,
//
// which gives dt_i/dw_ij = (t_j - t_i) / S_i and dt_i/dt_j = w_ij / S_i.
// Neurons that never fire pass no gradient.

#ifndef TTFS_TRAINER_HPP
#define TTFS_TRAINER_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ttfs/dataio.hpp"
#include "ttfs/network.hpp"
#include "ttfs/simulator.hpp"

namespace ttfs {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 128;
    double learning_rate = 3e-4;
    OptimizerKind optimizer = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double gamma = 1.0;         // softmax time scale, ms
    double jitter_sigma = 0.1;  // ms
    double fan_in_penalty = 1e-3;
    double horizon = 15.0;      // ms
    double lr_decay = 0.9;      // multiplicative, per epoch
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    void validate() const;
};

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad;  // dL/dt per output neuron
};

/// Softmax cross-entropy over -t / gamma. Output times must be finite;
/// substitute the horizon for silent neurons before calling.
LossResult compute_loss(std::span<const double> output_times, std::size_t label, double gamma);

/// Gradient of the loss w.r.t. every weight given an ideal-mode forward
/// pass. layers[0] is the input activity; the result has one matrix per
/// weight matrix of the model.
std::vector<Matrix> backprop_gradients(const NetworkModel& model,
                                       std::span<const LayerActivity> layers,
                                       std::span<const double> dl_dt_output);

/// Accumulating form: grads += scale * dL/dw.
void accumulate_gradients(const NetworkModel& model, std::span<const LayerActivity> layers,
                          std::span<const double> dl_dt_output, double scale,
                          std::vector<Matrix>& grads);

/// Penalty coeff * sum_i max(0, v_th/tau - sum_j w_ij)^2 over all neurons.
double fan_in_penalty(const NetworkModel& model, double coeff);
void add_fan_in_penalty_gradient(const NetworkModel& model, double coeff,
                                 std::vector<Matrix>& grads);

/// Loss and gradient of a single sample (ideal mode, jitter optional).
struct SampleGradient {
    double loss = 0.0;
    bool correct = false;
};
SampleGradient sample_gradient(const NetworkModel& model, std::span<const double> pixels,
                               std::size_t label, const TrainConfig& cfg,
                               const EncoderConfig& enc, bool jitter, std::uint64_t stream,
                               double scale, std::vector<Matrix>& grads);

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> validation_accuracy;
};

struct TrainResult {
    NetworkModel model;
    std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&, const NetworkModel&)>;

TrainResult train(NetworkModel model, const Dataset& data, const TrainConfig& cfg,
                  const EncoderConfig& enc, const Dataset* validation = nullptr,
                  const EpochCallback& on_epoch = {});

struct EvalReport {
    std::size_t samples = 0;
    double accuracy = 0.0;
    double mean_earliest_output_time = 0.0;  // ms, over samples with an output spike
    std::optional<double> mean_earliest_output_tick;
    double no_spike_rate = 0.0;
    double tie_rate = 0.0;
    std::array<std::array<std::size_t, 10>, 10> confusion{};  // [true][predicted]
};

/// Constrained-mode inference over a dataset with jitter off. Applies
/// weight quantization when cfg.w_min is set. Deterministic regardless of
/// the worker count.
EvalReport evaluate(const NetworkModel& model, const Dataset& data, const ConstraintConfig& cfg,
                    const EncoderConfig& enc, std::size_t workers = 1);

/// Per-sample output-layer potential minima (traces recorded internally).
PotentialStats evaluate_potentials(const NetworkModel& model, const Dataset& data,
                                   const ConstraintConfig& cfg, const EncoderConfig& enc,
                                   std::size_t workers = 1);

/// Runs fn(i) for i in [0, n) on up to `workers` threads with a static
/// partition.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace ttfs

#endif  // TTFS_TRAINER_HPP
