// trainer.cpp

#include "ttfs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "ttfs/circuit.hpp"
#include "ttfs/rng.hpp"

namespace ttfs {

namespace {

// Samples per gradient buffer. Fixed so the reduction order never depends on
// the worker count.
constexpr std::size_t kChunk = 32;

std::vector<Matrix> zero_like(const NetworkModel& model) {
    std::vector<Matrix> g;
    g.reserve(model.weights.size());
    for (const Matrix& w : model.weights) g.emplace_back(w.rows(), w.cols());
    return g;
}

void zero(std::vector<Matrix>& grads) {
    for (Matrix& g : grads) std::fill(g.data().begin(), g.data().end(), 0.0);
}

class Optimizer {
public:
    Optimizer(const NetworkModel& model, const TrainConfig& cfg)
        : cfg_(cfg), m_(zero_like(model)), v_(zero_like(model)) {}

    void step(NetworkModel& model, const std::vector<Matrix>& grads, double lr) {
        ++t_;
        if (cfg_.optimizer == OptimizerKind::sgd) {
            for (std::size_t l = 0; l < grads.size(); ++l) {
                auto& w = model.weights[l].data();
                const auto& g = grads[l].data();
                for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * g[k];
            }
            return;
        }
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        for (std::size_t l = 0; l < grads.size(); ++l) {
            auto& w = model.weights[l].data();
            auto& m = m_[l].data();
            auto& v = v_[l].data();
            const auto& g = grads[l].data();
            for (std::size_t k = 0; k < w.size(); ++k) {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.epsilon);
            }
        }
    }

private:
    const TrainConfig& cfg_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    std::size_t t_ = 0;
};

}  // namespace

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void TrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (!(jitter_sigma >= 0.0)) throw ConfigError("jitter_sigma must be non-negative");
    if (!(fan_in_penalty >= 0.0)) throw ConfigError("fan_in_penalty must be non-negative");
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must be in (0, 1]");
    if (optimizer == OptimizerKind::adam &&
        !(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0))
        throw ConfigError("invalid Adam parameters");
}

LossResult compute_loss(std::span<const double> output_times, std::size_t label, double gamma) {
    if (label >= output_times.size()) throw std::out_of_range("label out of range");
    const double t_min = *std::min_element(output_times.begin(), output_times.end());
    LossResult r;
    r.grad.resize(output_times.size());
    double z = 0.0;
    for (std::size_t k = 0; k < output_times.size(); ++k) {
        r.grad[k] = std::exp(-(output_times[k] - t_min) / gamma);
        z += r.grad[k];
    }
    r.loss = (output_times[label] - t_min) / gamma + std::log(z);
    for (std::size_t k = 0; k < output_times.size(); ++k) {
        const double p = r.grad[k] / z;
        r.grad[k] = ((k == label ? 1.0 : 0.0) - p) / gamma;
    }
    return r;
}

void accumulate_gradients(const NetworkModel& model, std::span<const LayerActivity> layers,
                          std::span<const double> dl_dt_output, double scale,
                          std::vector<Matrix>& grads) {
    const std::size_t last = model.num_layers() - 1;
    if (layers.size() != model.num_layers())
        throw SimulationError("expected one activity per layer");
    std::vector<double> delta(dl_dt_output.begin(), dl_dt_output.end());
    std::vector<double> delta_prev;
    for (std::size_t l = last; l >= 1; --l) {
        const Matrix& w = model.weights[l - 1];
        const LayerActivity& act = layers[l];
        const LayerActivity& prev = layers[l - 1];
        Matrix& g = grads[l - 1];
        const bool propagate = l > 1;
        if (propagate) delta_prev.assign(prev.size(), 0.0);
        for (std::size_t i = 0; i < act.size(); ++i) {
            const double ti = act.spike_times[i];
            if (delta[i] == 0.0 || !fired(ti)) continue;
            const auto causal = act.causal_set(i);
            const auto wi = w.row(i);
            double s = 0.0;
            for (std::size_t j : causal) s += wi[j];
            if (!(s > 0.0))
                throw SimulationError("fired neuron with non-positive causal slope in layer " +
                                      std::to_string(l));
            const double coeff = delta[i] / s;
            auto gi = g.row(i);
            for (std::size_t j : causal) {
                gi[j] += scale * coeff * (prev.spike_times[j] - ti);
                if (propagate) delta_prev[j] += coeff * wi[j];
            }
        }
        if (!propagate) break;
        delta.swap(delta_prev);
    }
}

std::vector<Matrix> backprop_gradients(const NetworkModel& model,
                                       std::span<const LayerActivity> layers,
                                       std::span<const double> dl_dt_output) {
    auto grads = zero_like(model);
    accumulate_gradients(model, layers, dl_dt_output, 1.0, grads);
    return grads;
}

double fan_in_penalty(const NetworkModel& model, double coeff) {
    if (coeff == 0.0) return 0.0;
    const double target = model.v_th_model / model.tau;
    double total = 0.0;
    for (const Matrix& w : model.weights) {
        for (std::size_t i = 0; i < w.rows(); ++i) {
            const auto row = w.row(i);
            const double gap = target - std::accumulate(row.begin(), row.end(), 0.0);
            if (gap > 0.0) total += gap * gap;
        }
    }
    return coeff * total;
}

void add_fan_in_penalty_gradient(const NetworkModel& model, double coeff,
                                 std::vector<Matrix>& grads) {
    if (coeff == 0.0) return;
    const double target = model.v_th_model / model.tau;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        const Matrix& w = model.weights[l];
        for (std::size_t i = 0; i < w.rows(); ++i) {
            const auto row = w.row(i);
            const double gap = target - std::accumulate(row.begin(), row.end(), 0.0);
            if (gap <= 0.0) continue;
            for (double& g : grads[l].row(i)) g -= 2.0 * coeff * gap;
        }
    }
}

SampleGradient sample_gradient(const NetworkModel& model, std::span<const double> pixels,
                               std::size_t label, const TrainConfig& cfg,
                               const EncoderConfig& enc, bool jitter, std::uint64_t stream,
                               double scale, std::vector<Matrix>& grads) {
    std::vector<LayerActivity> layers;
    layers.reserve(model.num_layers());
    EncoderConfig e = enc;
    e.jitter_sigma = cfg.jitter_sigma;
    layers.push_back(encode_input(pixels, e, jitter, stream));
    for (std::size_t l = 1; l < model.num_layers(); ++l)
        layers.push_back(forward_layer_ideal(model.weights[l - 1], layers.back(),
                                             model.v_th_model, cfg.horizon));
    const LayerActivity& out = layers.back();
    std::vector<double> times(out.spike_times);
    for (double& t : times)
        if (!fired(t)) t = cfg.horizon;
    LossResult lr = compute_loss(times, label, cfg.gamma);
    for (std::size_t k = 0; k < out.size(); ++k)
        if (!fired(out.spike_times[k])) lr.grad[k] = 0.0;
    accumulate_gradients(model, layers, lr.grad, scale, grads);
    SampleGradient sg;
    sg.loss = lr.loss;
    sg.correct = predict(out).label == label && !predict(out).no_output_spike;
    return sg;
}

TrainResult train(NetworkModel model, const Dataset& data, const TrainConfig& cfg,
                  const EncoderConfig& enc, const Dataset* validation,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    validate_model(model);
    if (data.size() == 0) throw TrainingError("empty training set");
    if (data.pixels_per_sample() != model.layer_sizes.front())
        throw TrainingError("dataset width does not match the input layer");

    TrainResult result;
    Optimizer opt(model, cfg);
    const std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    std::vector<Matrix> total = zero_like(model);
    const std::size_t max_chunks = (cfg.batch_size + kChunk - 1) / kChunk;
    std::vector<std::vector<Matrix>> chunk_grads(max_chunks, zero_like(model));
    std::vector<double> chunk_loss(max_chunks);
    std::vector<std::size_t> chunk_correct(max_chunks);
    std::vector<std::vector<double>> pixel_buf(max_chunks,
                                               std::vector<double>(data.pixels_per_sample()));
    double lr = cfg.learning_rate;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = make_rng(cfg.seed, 1'000'000 + epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
            const std::size_t end = std::min(n, begin + cfg.batch_size);
            const std::size_t batch = end - begin;
            const std::size_t chunks = (batch + kChunk - 1) / kChunk;
            const double scale = 1.0 / static_cast<double>(batch);
            parallel_for(chunks, cfg.workers, [&](std::size_t c) {
                zero(chunk_grads[c]);
                chunk_loss[c] = 0.0;
                chunk_correct[c] = 0;
                const std::size_t c_end = std::min(end, begin + (c + 1) * kChunk);
                for (std::size_t s = begin + c * kChunk; s < c_end; ++s) {
                    const std::size_t idx = order[s];
                    normalize_pixels(data.image(idx), pixel_buf[c]);
                    const auto sg = sample_gradient(model, pixel_buf[c], data.labels[idx], cfg,
                                                    enc, true, epoch * n + idx, scale,
                                                    chunk_grads[c]);
                    chunk_loss[c] += sg.loss;
                    chunk_correct[c] += sg.correct ? 1 : 0;
                }
            });
            zero(total);
            for (std::size_t c = 0; c < chunks; ++c) {
                for (std::size_t l = 0; l < total.size(); ++l) {
                    auto& t = total[l].data();
                    const auto& g = chunk_grads[c][l].data();
                    for (std::size_t k = 0; k < t.size(); ++k) t[k] += g[k];
                }
                loss_sum += chunk_loss[c];
                correct += chunk_correct[c];
            }
            add_fan_in_penalty_gradient(model, cfg.fan_in_penalty, total);
            if (!std::isfinite(loss_sum)) throw TrainingError("training loss is not finite");
            for (const Matrix& g : total)
                for (double x : g.data())
                    if (!std::isfinite(x)) throw TrainingError("gradient is not finite");
            opt.step(model, total, lr);
        }

        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.train_loss =
            loss_sum / static_cast<double>(n) + fan_in_penalty(model, cfg.fan_in_penalty);
        stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
        if (!std::isfinite(stats.train_loss)) throw TrainingError("training loss is not finite");
        if (validation) {
            ConstraintConfig ideal;
            ideal.horizon = cfg.horizon;
            stats.validation_accuracy = evaluate(model, *validation, ideal, enc, cfg.workers).accuracy;
        }
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats, model);
        lr *= cfg.lr_decay;
    }
    result.model = std::move(model);
    return result;
}

namespace {

struct SampleOutcome {
    std::size_t predicted = 0;
    bool no_spike = false;
    bool tie = false;
    double earliest = 0.0;
    std::int64_t earliest_tick = kNoTick;
};

}  // namespace

EvalReport evaluate(const NetworkModel& model, const Dataset& data, const ConstraintConfig& cfg,
                    const EncoderConfig& enc, std::size_t workers) {
    validate_config(model, cfg);
    const NetworkModel effective =
        cfg.w_min ? quantize_weights(model, *cfg.w_min).dequantized() : model;
    const std::size_t n = data.size();
    std::vector<SampleOutcome> outcomes(n);
    const std::size_t blocks = std::max<std::size_t>(1, workers);
    parallel_for(blocks, blocks, [&](std::size_t b) {
        std::vector<double> pixels(data.pixels_per_sample());
        RunOptions opts;
        opts.mode = Mode::constrained;
        for (std::size_t i = b; i < n; i += blocks) {
            normalize_pixels(data.image(i), pixels);
            opts.sample_index = i;
            const SimulationResult r = run_network(effective, pixels, cfg, enc, opts);
            SampleOutcome& o = outcomes[i];
            o.predicted = r.predicted_label;
            o.no_spike = r.no_output_spike;
            o.tie = r.tie;
            o.earliest = r.earliest_output_time.value_or(0.0);
            o.earliest_tick = r.earliest_output_tick.value_or(kNoTick);
        }
    });

    EvalReport rep;
    rep.samples = n;
    std::size_t correct = 0, no_spike = 0, ties = 0, fired_count = 0, tick_count = 0;
    double time_sum = 0.0, tick_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const SampleOutcome& o = outcomes[i];
        const std::size_t label = data.labels[i];
        if (o.predicted == label) ++correct;
        if (label < 10 && o.predicted < 10) ++rep.confusion[label][o.predicted];
        if (o.no_spike) {
            ++no_spike;
            continue;
        }
        if (o.tie) ++ties;
        ++fired_count;
        time_sum += o.earliest;
        if (o.earliest_tick != kNoTick) {
            ++tick_count;
            tick_sum += static_cast<double>(o.earliest_tick);
        }
    }
    const auto dn = static_cast<double>(std::max<std::size_t>(n, 1));
    rep.accuracy = static_cast<double>(correct) / dn;
    rep.no_spike_rate = static_cast<double>(no_spike) / dn;
    rep.tie_rate = static_cast<double>(ties) / dn;
    rep.mean_earliest_output_time =
        fired_count ? time_sum / static_cast<double>(fired_count) : 0.0;
    if (tick_count) rep.mean_earliest_output_tick = tick_sum / static_cast<double>(tick_count);
    return rep;
}

PotentialStats evaluate_potentials(const NetworkModel& model, const Dataset& data,
                                   const ConstraintConfig& cfg, const EncoderConfig& enc,
                                   std::size_t workers) {
    validate_config(model, cfg);
    const NetworkModel effective =
        cfg.w_min ? quantize_weights(model, *cfg.w_min).dequantized() : model;
    const std::size_t n = data.size();
    std::vector<SampleMinima> minima(n);
    const std::size_t blocks = std::max<std::size_t>(1, workers);
    parallel_for(blocks, blocks, [&](std::size_t b) {
        std::vector<double> pixels(data.pixels_per_sample());
        RunOptions opts;
        opts.mode = Mode::constrained;
        opts.traces = TraceLevel::output;
        for (std::size_t i = b; i < n; i += blocks) {
            normalize_pixels(data.image(i), pixels);
            opts.sample_index = i;
            minima[i] = sample_minima(run_network(effective, pixels, cfg, enc, opts));
        }
    });
    PotentialStats stats;
    for (const auto& m : minima) stats.add(m);
    return stats;
}

}  // namespace ttfs
