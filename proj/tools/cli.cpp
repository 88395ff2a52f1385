// cli.cpp

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "ttfs/circuit.hpp"
#include "ttfs/dataio.hpp"
#include "ttfs/network.hpp"
#include "ttfs/simulator.hpp"
#include "ttfs/trainer.hpp"

namespace ttfs::cli {

namespace fs = std::filesystem;
using Meta = std::vector<std::pair<std::string, std::string>>;

std::optional<double> parse_optional_number(const std::string& text) {
    if (text == "none" || text.empty()) return std::nullopt;
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("expected a number or 'none', got '" + text + "'");
    }
    if (used != text.size() || !std::isfinite(value))
        throw ConfigError("expected a number or 'none', got '" + text + "'");
    return value;
}

std::vector<bool> parse_layer_flags(const std::string& spec, std::size_t layers) {
    std::vector<bool> flags(layers, false);
    if (spec == "none") return flags;
    if (spec == "all") return std::vector<bool>(layers, true);
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, '+')) {
        if (part == "input") {
            flags[0] = true;
        } else if (part == "output") {
            flags[layers - 1] = true;
        } else if (part == "hidden") {
            for (std::size_t l = 1; l + 1 < layers; ++l) flags[l] = true;
        } else if (part.rfind("layer", 0) == 0 && part.size() > 5) {
            std::size_t l = 0;
            try {
                l = std::stoul(part.substr(5));
            } catch (const std::exception&) {
                throw ConfigError("bad layer name '" + part + "'");
            }
            if (l >= layers) throw ConfigError("layer index out of range in '" + spec + "'");
            flags[l] = true;
        } else {
            throw ConfigError("bad layer flag spec '" + spec +
                              "' (use all, none, input, hidden, output, layerN joined by '+')");
        }
    }
    return flags;
}

namespace {

std::string default_cache_dir() {
    if (const char* home = std::getenv("HOME"); home && *home)
        return (fs::path(home) / ".cache" / "ttfs").string();
    return ".ttfs-cache";
}

struct Common {
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::size_t workers = 1;
    std::string dataset = "mnist";
    std::string data_dir;
    std::string mirror;
    std::string cache_dir = default_cache_dir();
};

// Options that only affect where things go or how fast they run; they are
// left out of embedded configs so outputs compare equal across locations.
const std::set<std::string> kNonSemantic = {"help", "config", "out-dir", "workers", "cache-dir"};

void collect_options(const CLI::App& app, const std::string& prefix, Meta& meta) {
    for (const CLI::Option* opt : app.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || kNonSemantic.count(name)) continue;
        std::string value;
        if (opt->count() > 0 || !opt->results().empty()) {
            const auto& res = opt->results();
            for (std::size_t k = 0; k < res.size(); ++k) value += (k ? "," : "") + res[k];
        } else {
            value = opt->get_default_str();
            // vector defaults print as "[a,b]"
            if (value.size() >= 2 && value.front() == '[' && value.back() == ']')
                value = value.substr(1, value.size() - 2);
            if (value.empty() && opt->get_expected_max() == 0) value = "false";
        }
        meta.emplace_back(prefix + name, value);
    }
}

Meta resolved_config(const CLI::App& root, const CLI::App& sub) {
    Meta meta;
    meta.emplace_back("command", sub.get_name());
    collect_options(root, "", meta);
    collect_options(sub, sub.get_name() + ".", meta);
    return meta;
}

Dataset load_split(const Common& c, Split split) {
    if (!c.data_dir.empty()) return load_dataset(c.data_dir, c.dataset, split);
    auto transport = make_default_transport();
    const std::string mirror = c.mirror.empty() ? default_mirror(c.dataset) : c.mirror;
    return fetch_dataset(c.dataset, split, mirror, c.cache_dir, *transport);
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw ConfigError("split must be 'train' or 'test'");
}

void write_table(const fs::path& dir, const std::string& stem, Table table, const Meta& meta) {
    table.meta = meta;
    write_text_atomic(dir / (stem + ".csv"), to_csv(table));
    write_text_atomic(dir / (stem + ".json"), to_json(table));
}

fs::path prepare_out_dir(const Common& c) {
    fs::path dir(c.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir.string());
    return dir;
}

std::string opt_str(const std::optional<double>& v) {
    return v ? format_number(*v) : std::string("none");
}

// ---------------------------------------------------------------- train

struct TrainOptions {
    std::vector<std::size_t> hidden = {800};
    TrainConfig cfg;
    std::string optimizer = "adam";
    double tau = 5.0;
    double v_th = 1.0;
    double init_std_scale = kDefaultInitStdScale;
    std::size_t limit = 0;
    std::size_t validation_limit = 0;
};

void add_train(CLI::App& app, TrainOptions& o) {
    app.add_option("--hidden", o.hidden, "Hidden layer widths")->delimiter(',');
    app.add_option("--epochs", o.cfg.epochs, "Training epochs");
    app.add_option("--batch-size", o.cfg.batch_size, "Minibatch size");
    app.add_option("--lr", o.cfg.learning_rate, "Learning rate");
    app.add_option("--lr-decay", o.cfg.lr_decay, "Per-epoch learning-rate factor");
    app.add_option("--optimizer", o.optimizer, "adam or sgd")
        ->check(CLI::IsMember({"adam", "sgd"}));
    app.add_option("--beta1", o.cfg.beta1, "Adam beta1");
    app.add_option("--beta2", o.cfg.beta2, "Adam beta2");
    app.add_option("--epsilon", o.cfg.epsilon, "Adam epsilon");
    app.add_option("--gamma", o.cfg.gamma, "Softmax time scale (ms)");
    app.add_option("--jitter", o.cfg.jitter_sigma, "Input spike jitter std (ms)");
    app.add_option("--fan-in-penalty", o.cfg.fan_in_penalty, "Fan-in penalty coefficient");
    app.add_option("--horizon", o.cfg.horizon, "Simulation horizon (ms)");
    app.add_option("--tau", o.tau, "Input coding span (ms)");
    app.add_option("--v-th", o.v_th, "Model firing threshold");
    app.add_option("--init-std-scale", o.init_std_scale, "Init std in units of 1/sqrt(fan-in)");
    app.add_option("--limit", o.limit, "Use only the first N training samples (0: all)");
    app.add_option("--validation-limit", o.validation_limit,
                   "Evaluate the first N test samples after each epoch (0: off)");
}

int cmd_train(const Common& c, TrainOptions& o, const Meta& meta, std::ostream& out,
              std::ostream& err) {
    o.cfg.optimizer = o.optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
    o.cfg.seed = c.seed;
    o.cfg.workers = c.workers;
    o.cfg.validate();
    const fs::path dir = prepare_out_dir(c);

    Dataset data = load_split(c, Split::train);
    if (o.limit) data = data.slice(0, o.limit);
    std::optional<Dataset> validation;
    if (o.validation_limit) validation = load_split(c, Split::test).slice(0, o.validation_limit);

    std::vector<std::size_t> sizes = {data.pixels_per_sample()};
    sizes.insert(sizes.end(), o.hidden.begin(), o.hidden.end());
    sizes.push_back(10);
    const NetworkModel init = init_network(sizes, o.tau, o.v_th, c.seed, o.init_std_scale);

    EncoderConfig enc;
    enc.tau = o.tau;
    enc.jitter_sigma = o.cfg.jitter_sigma;
    enc.seed = c.seed;

    const auto result = train(init, data, o.cfg, enc, validation ? &*validation : nullptr,
                              [&](const EpochStats& s, const NetworkModel&) {
                                  err << "epoch " << s.epoch << " loss "
                                      << format_number(s.train_loss) << " train_acc "
                                      << format_number(s.train_accuracy);
                                  if (s.validation_accuracy)
                                      err << " val_acc " << format_number(*s.validation_accuracy);
                                  err << std::endl;
                              });

    Table history;
    history.columns = {"epoch", "train_loss", "train_accuracy", "validation_accuracy"};
    for (const EpochStats& s : result.history)
        history.add_row({format_number(s.epoch), format_number(s.train_loss),
                         format_number(s.train_accuracy),
                         s.validation_accuracy ? format_number(*s.validation_accuracy) : ""});
    write_table(dir, "history", history, meta);

    ModelArchive archive;
    archive.model = result.model;
    for (const auto& [k, v] : meta) archive.provenance[k] = v;
    archive.provenance["dataset"] = c.dataset;
    archive.provenance["train_samples"] = format_number(data.size());
    const EpochStats& last = result.history.back();
    archive.provenance["final_train_loss"] = format_number(last.train_loss);
    archive.provenance["final_train_accuracy"] = format_number(last.train_accuracy);
    if (last.validation_accuracy)
        archive.provenance["final_validation_accuracy"] = format_number(*last.validation_accuracy);
    save_model(dir / "model.json", archive);
    out << "wrote " << (dir / "model.json").string() << " and history.csv" << std::endl;
    return kExitOk;
}

// ---------------------------------------------------------------- eval

struct CellOptions {
    std::vector<std::string> t_clock = {"none"};
    std::vector<std::string> discretize = {"all"};
    std::vector<std::string> levels = {"none"};
    std::vector<std::string> v_min = {"none"};
    std::vector<std::string> clamp = {"all"};
    std::vector<double> sigma = {0.0};
    double horizon = 15.0;
};

struct Cell {
    std::optional<double> t_clock;
    std::string discretize = "none";
    std::optional<double> levels;
    std::optional<double> v_min;
    std::string clamp = "none";
    double sigma = 0.0;

    // Flags only mean something when their knob is set.
    Cell normalized() const {
        Cell c = *this;
        if (!c.t_clock) c.discretize = "none";
        if (!c.v_min) c.clamp = "none";
        return c;
    }
    std::string key() const {
        return opt_str(t_clock) + "|" + discretize + "|" + opt_str(levels) + "|" +
               opt_str(v_min) + "|" + clamp + "|" + format_number(sigma);
    }
};

void add_cell_options(CLI::App& app, CellOptions& o, bool grid) {
    const char* sep = grid ? " (comma-separated list)" : "";
    auto add_list = [&](const std::string& name, std::vector<std::string>& v, const std::string& what) {
        auto* opt = app.add_option(name, v, what + sep);
        if (grid) opt->delimiter(',');
        else opt->expected(1);
    };
    add_list("--t-clock", o.t_clock, "Model clock T (ms) or none");
    add_list("--discretize", o.discretize, "Discretized layers: all, none, input+hidden+output, layerN");
    add_list("--levels", o.levels, "Weight level count (w_min = max|w|/levels) or none");
    add_list("--v-min", o.v_min, "Membrane floor or none");
    add_list("--clamp", o.clamp, "Clamped layers: all, none, hidden, output, layerN");
    auto* s = app.add_option("--sigma", o.sigma, std::string("Threshold noise std") + sep);
    if (grid) s->delimiter(',');
    else s->expected(1);
    app.add_option("--horizon", o.horizon, "Simulation horizon (ms)");
}

std::vector<Cell> build_cells(const CellOptions& o, const std::string& mode) {
    std::vector<std::optional<double>> ts, ls, vs;
    for (const auto& s : o.t_clock) ts.push_back(parse_optional_number(s));
    for (const auto& s : o.levels) ls.push_back(parse_optional_number(s));
    for (const auto& s : o.v_min) vs.push_back(parse_optional_number(s));
    if (ts.empty() || o.discretize.empty() || ls.empty() || vs.empty() || o.clamp.empty() ||
        o.sigma.empty())
        throw ConfigError("every grid axis needs at least one value");

    std::vector<Cell> cells;
    std::set<std::string> seen;
    auto push = [&](Cell c) {
        c = c.normalized();
        if (seen.insert(c.key()).second) cells.push_back(std::move(c));
    };
    if (mode == "cartesian") {
        for (const auto& t : ts)
            for (const auto& d : o.discretize)
                for (const auto& l : ls)
                    for (const auto& v : vs)
                        for (const auto& cl : o.clamp)
                            for (double s : o.sigma) push({t, d, l, v, cl, s});
    } else {
        const Cell base{ts[0], o.discretize[0], ls[0], vs[0], o.clamp[0], o.sigma[0]};
        push(base);
        for (const auto& t : ts) { Cell c = base; c.t_clock = t; push(c); }
        for (const auto& d : o.discretize) { Cell c = base; c.discretize = d; push(c); }
        for (const auto& l : ls) { Cell c = base; c.levels = l; push(c); }
        for (const auto& v : vs) { Cell c = base; c.v_min = v; push(c); }
        for (const auto& cl : o.clamp) { Cell c = base; c.clamp = cl; push(c); }
        for (double s : o.sigma) { Cell c = base; c.sigma = s; push(c); }
    }
    return cells;
}

ConstraintConfig cell_config(const Cell& cell, const NetworkModel& model, double horizon,
                             std::uint64_t seed) {
    const std::size_t layers = model.num_layers();
    ConstraintConfig cfg;
    cfg.horizon = horizon;
    cfg.seed = seed;
    cfg.sigma_vth = cell.sigma;
    cfg.t_clock_model = cell.t_clock;
    if (cell.t_clock) cfg.discretize = parse_layer_flags(cell.discretize, layers);
    if (cell.levels) cfg.w_min = w_min_for_levels(model, *cell.levels);
    cfg.v_min = cell.v_min;
    if (cell.v_min) {
        cfg.clamp = parse_layer_flags(cell.clamp, layers);
        if (cfg.clamp[0] && cell.clamp != "all")
            throw ConfigError("the input layer has no membrane to clamp");
        cfg.clamp[0] = false;
    }
    validate_config(model, cfg);
    return cfg;
}

struct EvalOptions {
    std::string model;
    std::string split = "test";
    std::size_t limit = 0;
    std::string grid = "cartesian";
    bool potentials = false;
    CellOptions cells;
};

NetworkModel load_archive_model(const std::string& path) {
    if (path.empty()) throw ConfigError("--model is required");
    return load_model(path).model;
}

Dataset load_eval_data(const Common& c, const std::string& split, std::size_t limit,
                       const NetworkModel& model) {
    Dataset data = load_split(c, parse_split(split));
    if (limit) data = data.slice(0, limit);
    if (data.pixels_per_sample() != model.layer_sizes.front())
        throw ConfigError("dataset width does not match the model input layer");
    return data;
}

int cmd_eval(const Common& c, const EvalOptions& o, const Meta& meta, std::ostream& out,
             std::ostream& err) {
    const NetworkModel model = load_archive_model(o.model);
    const std::vector<Cell> cells = build_cells(o.cells, o.grid);
    std::vector<ConstraintConfig> configs;
    for (const Cell& cell : cells) configs.push_back(cell_config(cell, model, o.cells.horizon, c.seed));
    const fs::path dir = prepare_out_dir(c);
    const Dataset data = load_eval_data(c, o.split, o.limit, model);

    EncoderConfig enc;
    enc.tau = model.tau;
    enc.seed = c.seed;

    Table table;
    table.columns = {"cell",       "t_clock_ms",    "discretize",
                     "levels",     "w_min",         "v_min",
                     "clamp",      "sigma_vth",     "samples",
                     "accuracy",   "mean_earliest_output_ms", "mean_earliest_output_tick",
                     "no_spike_rate", "tie_rate"};
    Table minima;
    minima.columns = {"cell", "sample", "v_min_overall", "v_min_pre_earliest"};
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const Cell& cell = cells[k];
        const ConstraintConfig& cfg = configs[k];
        const EvalReport rep = evaluate(model, data, cfg, enc, c.workers);
        table.add_row({format_number(k), opt_str(cell.t_clock), cell.discretize,
                       opt_str(cell.levels), opt_str(cfg.w_min), opt_str(cell.v_min), cell.clamp,
                       format_number(cell.sigma), format_number(rep.samples),
                       format_number(rep.accuracy), format_number(rep.mean_earliest_output_time),
                       rep.mean_earliest_output_tick ? format_number(*rep.mean_earliest_output_tick)
                                                     : "",
                       format_number(rep.no_spike_rate), format_number(rep.tie_rate)});
        err << "cell " << k << " " << cell.key() << " accuracy " << format_number(rep.accuracy)
            << std::endl;
        if (o.potentials) {
            const PotentialStats ps = evaluate_potentials(model, data, cfg, enc, c.workers);
            for (std::size_t s = 0; s < ps.v_min_overall.size(); ++s)
                minima.add_row({format_number(k), format_number(s),
                                format_number(ps.v_min_overall[s]),
                                format_number(ps.v_min_pre_earliest[s])});
        }
    }
    write_table(dir, "eval", table, meta);
    if (o.potentials) write_table(dir, "potentials", minima, meta);
    out << "wrote " << (dir / "eval.csv").string() << " (" << cells.size() << " cells)"
        << std::endl;
    return kExitOk;
}

// ---------------------------------------------------------------- sweep

struct SweepOptions {
    std::string model;
    std::string split = "test";
    std::size_t limit = 0;
    std::vector<double> grid = {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0};
    double floor = 0.98;
    std::string variant = "both";
    std::string v_min = "none";
    double sigma = 0.0;
    double horizon = 15.0;
    CircuitParams circuit;
};

int cmd_sweep(const Common& c, const SweepOptions& o, const Meta& meta, std::ostream& out,
              std::ostream& err) {
    const NetworkModel model = load_archive_model(o.model);
    if (o.grid.empty()) throw ConfigError("empty T_clock grid");
    if (!(o.floor > 0.0)) throw ConfigError("accuracy floor must be positive");
    o.circuit.validate();
    SweepTemplate tmpl;
    tmpl.discretize = o.variant != "quantize";
    tmpl.quantize = o.variant != "discretize";
    tmpl.v_min = parse_optional_number(o.v_min);
    tmpl.sigma_vth = o.sigma;
    tmpl.horizon = o.horizon;
    tmpl.seed = c.seed;
    const fs::path dir = prepare_out_dir(c);
    const Dataset data = load_eval_data(c, o.split, o.limit, model);
    EncoderConfig enc;
    enc.tau = model.tau;
    enc.seed = c.seed;

    const auto rows = sweep(model, data, o.circuit, o.grid, tmpl, enc, c.workers);
    for (const SweepRow& r : rows)
        err << "T_model " << format_number(r.t_clock_model) << " ms accuracy "
            << format_number(r.accuracy) << std::endl;
    write_table(dir, "sweep", sweep_table(rows), meta);

    nlohmann::ordered_json doc;
    nlohmann::ordered_json meta_json = nlohmann::ordered_json::object();
    for (const auto& [k, v] : meta) meta_json[k] = v;
    try {
        const OperatingPoint op = select_operating_point(rows, o.floor);
        doc["t_model_ms"] = op.t_clock_model;
        doc["accuracy"] = op.accuracy;
        doc["floor"] = op.floor;
        doc["meta"] = meta_json;
        write_text_atomic(dir / "operating_point.json", doc.dump(2) + "\n");
        out << "operating point: T_model = " << format_number(op.t_clock_model)
            << " ms, accuracy " << format_number(op.accuracy) << std::endl;
    } catch (const InfeasibleError& e) {
        doc["infeasible"] = true;
        doc["best_accuracy"] = e.best_accuracy();
        doc["floor"] = o.floor;
        doc["meta"] = meta_json;
        write_text_atomic(dir / "operating_point.json", doc.dump(2) + "\n");
        throw;
    }
    return kExitOk;
}

// ---------------------------------------------------------------- export-traces

struct TraceOptions {
    std::string model;
    std::string split = "test";
    std::vector<std::size_t> samples = {0};
    CellOptions cell;
};

int cmd_export_traces(const Common& c, const TraceOptions& o, const Meta& meta,
                      std::ostream& out) {
    NetworkModel model = load_archive_model(o.model);
    const std::vector<Cell> cells = build_cells(o.cell, "cartesian");
    const ConstraintConfig cfg = cell_config(cells.front(), model, o.cell.horizon, c.seed);
    if (cfg.w_min) model = quantize_weights(model, *cfg.w_min).dequantized();
    const fs::path dir = prepare_out_dir(c);
    const Dataset data = load_split(c, parse_split(o.split));
    if (data.pixels_per_sample() != model.layer_sizes.front())
        throw ConfigError("dataset width does not match the model input layer");

    EncoderConfig enc;
    enc.tau = model.tau;
    enc.seed = c.seed;
    Table traces, spikes;
    for (std::size_t s : o.samples) {
        if (s >= data.size()) throw ConfigError("sample index out of range");
        RunOptions opts;
        opts.mode = Mode::constrained;
        opts.traces = TraceLevel::all;
        opts.sample_index = s;
        const auto result = run_network(model, normalize_pixels(data.image(s)), cfg, enc, opts);
        auto prepend = [&](Table& dst, const Table& src) {
            if (dst.columns.empty()) {
                dst.columns = {"sample", "label"};
                dst.columns.insert(dst.columns.end(), src.columns.begin(), src.columns.end());
            }
            for (const auto& row : src.rows) {
                std::vector<std::string> r = {format_number(s), format_number(std::size_t{data.labels[s]})};
                r.insert(r.end(), row.begin(), row.end());
                dst.add_row(std::move(r));
            }
        };
        prepend(traces, trace_table(result));
        prepend(spikes, spike_table(result));
    }
    write_table(dir, "traces", traces, meta);
    write_table(dir, "spikes", spikes, meta);
    out << "wrote traces.csv and spikes.csv for " << o.samples.size() << " samples" << std::endl;
    return kExitOk;
}

// ---------------------------------------------------------------- fetch-data

int cmd_fetch(const Common& c, std::ostream& out) {
    const std::vector<std::string> names =
        c.dataset == "all" ? std::vector<std::string>{"mnist", "fashion-mnist"}
                           : std::vector<std::string>{c.dataset};
    for (const auto& name : names) {
        Common one = c;
        one.dataset = name;
        if (c.dataset == "all") one.mirror.clear();
        const Dataset train = load_split(one, Split::train);
        const Dataset test = load_split(one, Split::test);
        out << name << ": " << train.size() << " train, " << test.size() << " test samples"
            << std::endl;
    }
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Time-to-first-spike SNN training, constraint analysis and circuit mapping", "ttfs"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "INI config file ([train], [eval], ... sections)");

    Common common;
    app.add_option("--seed", common.seed, "Seed for every random stream");
    app.add_option("--out-dir", common.out_dir, "Output directory");
    app.add_option("--workers", common.workers, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--dataset", common.dataset, "mnist or fashion-mnist")
        ->check(CLI::IsMember({"mnist", "fashion-mnist", "all"}));
    app.add_option("--data-dir", common.data_dir, "Read IDX files from this directory");
    app.add_option("--mirror", common.mirror, "Dataset mirror URL (http(s):// or file://)");
    app.add_option("--cache-dir", common.cache_dir, "Dataset cache directory")->envname(kCacheEnv);

    TrainOptions train_o;
    auto* train_cmd = app.add_subcommand("train", "Train a network in ideal mode");
    add_train(*train_cmd, train_o);

    EvalOptions eval_o;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model over a constraint grid");
    eval_cmd->add_option("--model", eval_o.model, "Model archive")->required();
    eval_cmd->add_option("--split", eval_o.split, "train or test");
    eval_cmd->add_option("--limit", eval_o.limit, "Use only the first N samples (0: all)");
    eval_cmd->add_option("--grid", eval_o.grid, "cartesian or per-axis")
        ->check(CLI::IsMember({"cartesian", "per-axis"}));
    eval_cmd->add_flag("--potentials", eval_o.potentials,
                       "Also write per-sample output-layer potential minima");
    add_cell_options(*eval_cmd, eval_o.cells, true);

    SweepOptions sweep_o;
    auto* sweep_cmd = app.add_subcommand("sweep", "Circuit clock sweep and operating point");
    sweep_cmd->add_option("--model", sweep_o.model, "Model archive")->required();
    sweep_cmd->add_option("--split", sweep_o.split, "train or test");
    sweep_cmd->add_option("--limit", sweep_o.limit, "Use only the first N samples (0: all)");
    sweep_cmd->add_option("--grid", sweep_o.grid, "T_model values (ms)")->delimiter(',');
    sweep_cmd->add_option("--floor", sweep_o.floor, "Accuracy floor");
    sweep_cmd->add_option("--variant", sweep_o.variant, "both, discretize or quantize")
        ->check(CLI::IsMember({"both", "discretize", "quantize"}));
    sweep_cmd->add_option("--v-min", sweep_o.v_min, "Membrane floor or none");
    sweep_cmd->add_option("--sigma", sweep_o.sigma, "Threshold noise std");
    sweep_cmd->add_option("--horizon", sweep_o.horizon, "Simulation horizon (ms)");
    sweep_cmd->add_option("--capacitance", sweep_o.circuit.capacitance, "C (F)");
    sweep_cmd->add_option("--i-min", sweep_o.circuit.i_min, "I_min (A)");
    sweep_cmd->add_option("--v-th-circuit", sweep_o.circuit.v_th_circuit, "Circuit threshold (V)");
    sweep_cmd->add_option("--t-clock-circuit", sweep_o.circuit.t_clock_circuit,
                          "Circuit clock (s)");

    TraceOptions trace_o;
    auto* trace_cmd = app.add_subcommand("export-traces", "Membrane traces and spike rasters");
    trace_cmd->add_option("--model", trace_o.model, "Model archive")->required();
    trace_cmd->add_option("--split", trace_o.split, "train or test");
    trace_cmd->add_option("--samples", trace_o.samples, "Sample indices")->delimiter(',');
    add_cell_options(*trace_cmd, trace_o.cell, false);

    auto* fetch_cmd = app.add_subcommand("fetch-data", "Download datasets into the cache");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "ttfs: error: " << e.what() << std::endl;
        return kExitUsage;
    }

    try {
        if (train_cmd->parsed())
            return cmd_train(common, train_o, resolved_config(app, *train_cmd), out, err);
        if (eval_cmd->parsed())
            return cmd_eval(common, eval_o, resolved_config(app, *eval_cmd), out, err);
        if (sweep_cmd->parsed())
            return cmd_sweep(common, sweep_o, resolved_config(app, *sweep_cmd), out, err);
        if (trace_cmd->parsed())
            return cmd_export_traces(common, trace_o, resolved_config(app, *trace_cmd), out);
        if (fetch_cmd->parsed()) return cmd_fetch(common, out);
    } catch (const ConfigError& e) {
        err << "ttfs: error: " << e.what() << std::endl;
        return kExitUsage;
    } catch (const InfeasibleError& e) {
        err << "ttfs: error: " << e.what() << std::endl;
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "ttfs: error: " << e.what() << std::endl;
        return kExitRuntime;
    }
    return kExitUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.push_back("ttfs");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace ttfs::cli
