// circuit.cpp

#include "ttfs/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ttfs {

std::int64_t LevelMatrix::max_abs() const {
    std::int64_t m = 0;
    for (std::int64_t l : levels) m = std::max(m, l < 0 ? -l : l);
    return m;
}

std::vector<std::int64_t> QuantizedNetwork::level_counts() const {
    std::vector<std::int64_t> counts;
    for (const LevelMatrix& lm : levels) counts.push_back(lm.max_abs());
    return counts;
}

std::int64_t QuantizedNetwork::level_count() const {
    const auto counts = level_counts();
    return counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
}

NetworkModel QuantizedNetwork::dequantized() const {
    NetworkModel m = source;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        auto& w = m.weights[l].data();
        for (std::size_t k = 0; k < w.size(); ++k)
            w[k] = w_min * static_cast<double>(levels[l].levels[k]);
    }
    return m;
}

std::int64_t quantize_level(double w, double w_min) {
    // std::llround rounds halves away from zero.
    return std::llround(w / w_min);
}

QuantizedNetwork quantize_weights(const NetworkModel& model, double w_min) {
    if (!(w_min > 0.0) || !std::isfinite(w_min)) throw ConfigError("w_min must be positive");
    QuantizedNetwork q;
    q.source = model;
    q.w_min = w_min;
    for (const Matrix& w : model.weights) {
        LevelMatrix lm;
        lm.rows = w.rows();
        lm.cols = w.cols();
        lm.levels.reserve(w.size());
        for (double x : w.data()) lm.levels.push_back(quantize_level(x, w_min));
        q.levels.push_back(std::move(lm));
    }
    return q;
}

double w_min_for_levels(const NetworkModel& model, double levels) {
    if (!(levels > 0.0)) throw ConfigError("level count must be positive");
    double max_abs = 0.0;
    for (const Matrix& w : model.weights)
        for (double x : w.data()) max_abs = std::max(max_abs, std::abs(x));
    if (max_abs == 0.0) throw ConfigError("all weights are zero");
    return max_abs / levels;
}

double derive_wmin(const CircuitParams& circuit, double t_clock_model_ms, double v_th_model) {
    circuit.validate();
    if (!(t_clock_model_ms > 0.0) || !std::isfinite(t_clock_model_ms))
        throw ConfigError("t_clock_model must be positive");
    if (!(v_th_model > 0.0)) throw ConfigError("v_th_model must be positive");
    // T_circuit I_min / (C V_th^circuit) is the dimensionless potential step
    // of one level over one circuit clock; dividing by T_model (ms) gives a
    // weight in the model's 1/ms units.
    const double step = circuit.t_clock_circuit * circuit.i_min /
                        (circuit.capacitance * circuit.v_th_circuit);
    return step * v_th_model / t_clock_model_ms;
}

CircuitActivity simulate_circuit_network(const QuantizedNetwork& qnet,
                                         const CircuitParams& circuit,
                                         std::span<const std::int64_t> input_ticks,
                                         std::int64_t horizon_ticks) {
    circuit.validate();
    const NetworkModel& topo = qnet.source;
    if (input_ticks.size() != topo.layer_sizes.front())
        throw ConfigError("input width does not match the network");
    // Potential after integrating a constant total current of one level for
    // one circuit clock, and the threshold expressed in that unit. The
    // comparison is done on the integer charge; the relative slack absorbs
    // rounding in the unit conversion when the threshold is an exact
    // multiple of the step.
    const double volts_per_level_tick =
        circuit.i_min * circuit.t_clock_circuit / circuit.capacitance;
    const double threshold_charge =
        circuit.v_th_circuit / volts_per_level_tick * (1.0 - 1e-12);

    CircuitActivity act;
    act.ticks.emplace_back(input_ticks.begin(), input_ticks.end());
    act.firing_potential.emplace_back(input_ticks.size(), 0.0);
    for (std::size_t l = 0; l < qnet.levels.size(); ++l) {
        const LevelMatrix& lm = qnet.levels[l];
        const auto& in = act.ticks.back();
        std::vector<std::size_t> order;
        for (std::size_t j = 0; j < in.size(); ++j)
            if (in[j] != kNoTick && in[j] <= horizon_ticks) order.push_back(j);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return in[a] < in[b]; });

        std::vector<std::int64_t> out(lm.rows, kNoTick);
        std::vector<double> vfire(lm.rows, 0.0);
        for (std::size_t i = 0; i < lm.rows; ++i) {
            // charge[p] = sum_{j: t_j < p} I_ij (p - t_j), in level-ticks.
            std::int64_t charge = 0, current = 0;
            std::size_t e = 0;
            for (std::int64_t p = 0; p <= horizon_ticks; ++p) {
                if (p > 0) charge += current;
                if (static_cast<double>(charge) >= threshold_charge) {
                    out[i] = p;
                    vfire[i] = volts_per_level_tick * static_cast<double>(charge);
                    break;
                }
                while (e < order.size() && in[order[e]] == p) current += lm(i, order[e++]);
                if (e == order.size() && current <= 0) break;
            }
        }
        act.ticks.push_back(std::move(out));
        act.firing_potential.push_back(std::move(vfire));
    }
    return act;
}

std::vector<SweepRow> sweep(const NetworkModel& model, const Dataset& data,
                            const CircuitParams& circuit, std::span<const double> t_model_grid,
                            const SweepTemplate& tmpl, const EncoderConfig& enc,
                            std::size_t workers) {
    if (t_model_grid.empty()) throw ConfigError("empty T_clock grid");
    circuit.validate();
    std::vector<SweepRow> rows;
    for (double t_model : t_model_grid) {
        SweepRow row;
        row.t_clock_model = t_model;
        row.w_min = derive_wmin(circuit, t_model, model.v_th_model);
        ConstraintConfig cfg;
        cfg.horizon = tmpl.horizon;
        cfg.seed = tmpl.seed;
        cfg.sigma_vth = tmpl.sigma_vth;
        cfg.v_min = tmpl.v_min;
        if (tmpl.discretize) cfg.t_clock_model = t_model;
        if (tmpl.quantize) {
            cfg.w_min = row.w_min;
            row.levels_per_layer = quantize_weights(model, row.w_min).level_counts();
        }
        const EvalReport rep = evaluate(model, data, cfg, enc, workers);
        row.accuracy = rep.accuracy;
        row.no_spike_rate = rep.no_spike_rate;
        row.mean_spike_time_model_ms = rep.mean_earliest_output_time;
        if (rep.mean_earliest_output_tick)
            row.mean_spike_time_circuit_s = *rep.mean_earliest_output_tick * circuit.t_clock_circuit;
        else
            row.mean_spike_time_circuit_s =
                rep.mean_earliest_output_time / t_model * circuit.t_clock_circuit;
        rows.push_back(std::move(row));
    }
    return rows;
}

OperatingPoint select_operating_point(std::span<const SweepRow> rows, double accuracy_floor) {
    if (rows.empty()) throw ConfigError("empty sweep");
    if (!(accuracy_floor > 0.0)) throw ConfigError("accuracy floor must be positive");
    const SweepRow* best = nullptr;
    double best_acc = 0.0;
    for (const SweepRow& r : rows) {
        best_acc = std::max(best_acc, r.accuracy);
        if (r.accuracy >= accuracy_floor && (!best || r.t_clock_model > best->t_clock_model))
            best = &r;
    }
    if (!best)
        throw InfeasibleError("infeasible: no grid point reaches accuracy " +
                                  format_number(accuracy_floor) + " (best " +
                                  format_number(best_acc) + ")",
                              best_acc);
    return {best->t_clock_model, best->accuracy, accuracy_floor};
}

SweepOutcome sweep_and_select(const NetworkModel& model, const Dataset& data,
                              const CircuitParams& circuit, std::span<const double> t_model_grid,
                              double accuracy_floor, const SweepTemplate& tmpl,
                              const EncoderConfig& enc, std::size_t workers) {
    if (t_model_grid.empty()) throw ConfigError("empty T_clock grid");
    if (!(accuracy_floor > 0.0)) throw ConfigError("accuracy floor must be positive");
    SweepOutcome out;
    out.rows = sweep(model, data, circuit, t_model_grid, tmpl, enc, workers);
    out.selected = select_operating_point(out.rows, accuracy_floor);
    return out;
}

Table sweep_table(std::span<const SweepRow> rows) {
    Table t;
    t.columns = {"t_model_ms",  "w_min", "levels", "accuracy", "mean_spike_time_model_ms",
                 "mean_spike_time_circuit_us", "no_spike_rate"};
    for (const SweepRow& r : rows) {
        std::string levels;
        for (std::size_t l = 0; l < r.levels_per_layer.size(); ++l)
            levels += (l ? ";" : "") + std::to_string(r.levels_per_layer[l]);
        t.add_row({format_number(r.t_clock_model), format_number(r.w_min), levels,
                   format_number(r.accuracy), format_number(r.mean_spike_time_model_ms),
                   format_number(r.mean_spike_time_circuit_s * 1e6),
                   format_number(r.no_spike_rate)});
    }
    return t;
}

}  // namespace ttfs
