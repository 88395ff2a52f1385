// network.cpp

#include "ttfs/network.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "ttfs/rng.hpp"

namespace ttfs {

namespace {

bool flag_at(const std::vector<bool>& flags, std::size_t layer, bool fallback) {
    if (flags.empty()) return fallback;
    return layer < flags.size() && flags[layer];
}

std::string layer_name(std::size_t l) {
    std::ostringstream os;
    os << "layer " << l;
    return os.str();
}

}  // namespace

bool ConstraintConfig::discretize_layer(std::size_t layer) const {
    return t_clock_model.has_value() && flag_at(discretize, layer, true);
}

bool ConstraintConfig::clamp_layer(std::size_t layer) const {
    return layer > 0 && v_min.has_value() && flag_at(clamp, layer, true);
}

bool ConstraintConfig::any_constraint() const {
    return t_clock_model.has_value() || w_min.has_value() || v_min.has_value() ||
           sigma_vth > 0.0;
}

void CircuitParams::validate() const {
    auto check = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError(std::string(name) + " must be positive and finite");
    };
    check(capacitance, "capacitance");
    check(i_min, "i_min");
    check(v_th_circuit, "v_th_circuit");
    check(t_clock_circuit, "t_clock_circuit");
}

void validate_model(const NetworkModel& model) {
    if (model.layer_sizes.size() < 2)
        throw ConfigError("network needs at least 2 layers");
    for (std::size_t s : model.layer_sizes)
        if (s == 0) throw ConfigError("layer sizes must be positive");
    if (!(model.v_th_model > 0.0) || !std::isfinite(model.v_th_model))
        throw ConfigError("v_th_model must be positive");
    if (!(model.tau > 0.0) || !std::isfinite(model.tau))
        throw ConfigError("tau must be positive");
    if (model.weights.size() != model.layer_sizes.size() - 1)
        throw ConfigError("expected one weight matrix per non-input layer");
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        const Matrix& w = model.weights[l];
        if (w.rows() != model.layer_sizes[l + 1] || w.cols() != model.layer_sizes[l])
            throw ConfigError("weight shape mismatch in " + layer_name(l + 1));
        for (double x : w.data())
            if (!std::isfinite(x))
                throw ConfigError("non-finite weight in " + layer_name(l + 1));
    }
}

void validate_config(const NetworkModel& model, const ConstraintConfig& cfg) {
    validate_model(model);
    const std::size_t n = model.num_layers();
    if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon))
        throw ConfigError("horizon must be positive");
    if (cfg.horizon < model.tau)
        throw ConfigError("horizon must be at least tau");
    if (cfg.t_clock_model && !(*cfg.t_clock_model > 0.0 && std::isfinite(*cfg.t_clock_model)))
        throw ConfigError("t_clock_model must be positive");
    if (!cfg.discretize.empty()) {
        if (cfg.discretize.size() != n)
            throw ConfigError("discretize flags must have one entry per layer");
        bool any = false;
        for (bool f : cfg.discretize) any = any || f;
        if (any && !cfg.t_clock_model)
            throw ConfigError("discretization requested without t_clock_model");
    }
    if (cfg.w_min && !(*cfg.w_min > 0.0 && std::isfinite(*cfg.w_min)))
        throw ConfigError("w_min must be positive");
    if (cfg.v_min) {
        if (!std::isfinite(*cfg.v_min)) throw ConfigError("v_min must be finite");
        if (!(*cfg.v_min < model.v_th_model))
            throw ConfigError("v_min must be below threshold");
    }
    if (!cfg.clamp.empty()) {
        if (cfg.clamp.size() != n)
            throw ConfigError("clamp flags must have one entry per layer");
        bool any = false;
        for (std::size_t l = 1; l < n; ++l) any = any || cfg.clamp[l];
        if (any && !cfg.v_min) throw ConfigError("clamping requested without v_min");
    }
    if (!(cfg.sigma_vth >= 0.0) || !std::isfinite(cfg.sigma_vth))
        throw ConfigError("sigma_vth must be non-negative");
}

NetworkModel init_network(const std::vector<std::size_t>& layer_sizes, double tau,
                          double v_th_model, std::uint64_t seed, double std_scale) {
    NetworkModel model;
    model.layer_sizes = layer_sizes;
    model.tau = tau;
    model.v_th_model = v_th_model;
    if (layer_sizes.size() < 2) throw ConfigError("network needs at least 2 layers");
    for (std::size_t s : layer_sizes)
        if (s == 0) throw ConfigError("layer sizes must be positive");

    Rng rng(derive_seed(seed, 0));
    for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
        const auto fan_in = static_cast<double>(layer_sizes[l - 1]);
        const double mean = 2.0 * v_th_model / (fan_in * tau);
        std::normal_distribution<double> dist(mean, std_scale / std::sqrt(fan_in));
        Matrix w(layer_sizes[l], layer_sizes[l - 1]);
        for (double& x : w.data()) x = dist(rng);
        model.weights.push_back(std::move(w));
    }
    validate_model(model);
    return model;
}

}  // namespace ttfs
