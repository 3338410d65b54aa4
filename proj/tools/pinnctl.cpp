// Command-line front end: scenario simulation, dataset generation, training,
// controller comparison, architecture sweeps, and generalization-bound
// reports. One JSON config file drives every subcommand; --dump-config echoes
// the effective config in a form that re-parses to the identical run.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pinnctl/analysis.hpp"
#include "pinnctl/csv.hpp"
#include "pinnctl/loop.hpp"
#include "pinnctl/training.hpp"

using nlohmann::json;
using namespace pinnctl;

namespace {

struct BoundInputs {
    std::size_t hypothesis_count = 2492;
    std::size_t sample_count = 14500;
    double delta = 0.05;
    double test_error_pct = 3.03;
    double empirical_error_pct = 1.9;
};

struct CliScenario {
    std::string name = "nominal_r";
    std::string controller = "expert"; // expert | pi | pinn:<checkpoint>
    ScenarioConfig sc;
    std::uint64_t seed = 0;

    CliScenario() {
        sc.plant.load.kind = LoadKind::Impedance;
        sc.plant.load.value = 4.037;
    }
};

struct Config {
    CliScenario scenario;
    DatasetSpec dataset;
    TrainConfig training;
    std::vector<int> sweep_neurons{8, 16, 32, 64};
    std::vector<int> sweep_layers{1, 2, 3};
    BoundInputs bound;
};

// --- json plumbing -----------------------------------------------------

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
    throw ConfigError("config field '" + path + "': " + what);
}

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) field_error(section + "." + key, "unknown key");
    }
}

template <typename T>
void get_field(const json& j, const std::string& section, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        field_error(section + "." + std::string(key), e.what());
    }
}

LoadKind parse_load_kind(const std::string& s, const std::string& path) {
    if (s == "impedance") return LoadKind::Impedance;
    if (s == "constant_power") return LoadKind::ConstantPower;
    field_error(path, "expected 'impedance' or 'constant_power', got '" + s + "'");
}

void load_scenario(const json& j, CliScenario& s) {
    check_keys(j, "scenario",
               {"name", "controller", "load_kind", "load_value", "load_schedule",
                "duration", "y_ref", "T_ctrl", "sim_dt", "V_in", "L_N", "C_N", "L_true",
                "C_true", "seed"});
    get_field(j, "scenario", "name", s.name);
    get_field(j, "scenario", "controller", s.controller);
    if (j.contains("load_kind")) {
        s.sc.plant.load.kind =
            parse_load_kind(j.at("load_kind").get<std::string>(), "scenario.load_kind");
    }
    get_field(j, "scenario", "load_value", s.sc.plant.load.value);
    if (j.contains("load_schedule")) {
        s.sc.plant.load.schedule.clear();
        const json& sched = j.at("load_schedule");
        if (!sched.is_array()) field_error("scenario.load_schedule", "expected an array");
        for (const json& entry : sched) {
            if (!entry.is_array() || entry.size() != 2) {
                field_error("scenario.load_schedule", "entries must be [time, value] pairs");
            }
            s.sc.plant.load.schedule.emplace_back(entry[0].get<double>(),
                                                  entry[1].get<double>());
        }
    }
    get_field(j, "scenario", "duration", s.sc.duration);
    get_field(j, "scenario", "y_ref", s.sc.y_ref);
    get_field(j, "scenario", "T_ctrl", s.sc.T_ctrl);
    get_field(j, "scenario", "sim_dt", s.sc.plant.sim_dt);
    get_field(j, "scenario", "V_in", s.sc.plant.V_in);
    get_field(j, "scenario", "L_N", s.sc.plant.L_N);
    get_field(j, "scenario", "C_N", s.sc.plant.C_N);
    get_field(j, "scenario", "L_true", s.sc.plant.L_true);
    get_field(j, "scenario", "C_true", s.sc.plant.C_true);
    get_field(j, "scenario", "seed", s.seed);
}

void load_dataset(const json& j, DatasetSpec& d) {
    check_keys(j, "dataset",
               {"count", "split_fraction", "seed", "horizon", "variants_per_case",
                "param_spread", "warmup", "duty_dither", "y_ref", "T_ctrl", "sim_dt",
                "V_in", "C_N", "L_N"});
    get_field(j, "dataset", "count", d.count);
    get_field(j, "dataset", "split_fraction", d.split_fraction);
    get_field(j, "dataset", "seed", d.seed);
    get_field(j, "dataset", "horizon", d.horizon);
    get_field(j, "dataset", "variants_per_case", d.variants_per_case);
    get_field(j, "dataset", "param_spread", d.param_spread);
    get_field(j, "dataset", "warmup", d.warmup);
    get_field(j, "dataset", "duty_dither", d.duty_dither);
    get_field(j, "dataset", "y_ref", d.y_ref);
    get_field(j, "dataset", "T_ctrl", d.T_ctrl);
    get_field(j, "dataset", "sim_dt", d.sim_dt);
    get_field(j, "dataset", "V_in", d.V_in);
    get_field(j, "dataset", "C_N", d.C_N);
    get_field(j, "dataset", "L_N", d.L_N);
}

void load_training(const json& j, TrainConfig& t) {
    check_keys(j, "training",
               {"hidden", "iterations", "batch", "learning_rate", "seed", "lambda_phy",
                "lambda_ctrl", "expert_grad", "Q", "R_u"});
    get_field(j, "training", "hidden", t.hidden);
    get_field(j, "training", "iterations", t.iterations);
    get_field(j, "training", "batch", t.batch);
    get_field(j, "training", "learning_rate", t.learning_rate);
    get_field(j, "training", "seed", t.seed);
    get_field(j, "training", "lambda_phy", t.loss_weights.lambda_phy);
    get_field(j, "training", "lambda_ctrl", t.loss_weights.lambda_ctrl);
    if (j.contains("expert_grad")) {
        const auto s = j.at("expert_grad").get<std::string>();
        if (s == "stop") {
            t.expert_grad = ExpertGrad::StopGradient;
        } else if (s == "analytic") {
            t.expert_grad = ExpertGrad::Analytic;
        } else {
            field_error("training.expert_grad", "expected 'stop' or 'analytic'");
        }
    }
    get_field(j, "training", "Q", t.cost_weights.Q);
    get_field(j, "training", "R_u", t.cost_weights.R_u);
}

void load_bound(const json& j, BoundInputs& b) {
    check_keys(j, "bound",
               {"hypothesis_count", "sample_count", "delta", "test_error_pct",
                "empirical_error_pct"});
    get_field(j, "bound", "hypothesis_count", b.hypothesis_count);
    get_field(j, "bound", "sample_count", b.sample_count);
    get_field(j, "bound", "delta", b.delta);
    get_field(j, "bound", "test_error_pct", b.test_error_pct);
    get_field(j, "bound", "empirical_error_pct", b.empirical_error_pct);
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // translate the byte offset into a line number for the diagnostic
        std::size_t line = 1;
        for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') ++line;
        }
        throw ConfigError(path + ":" + std::to_string(line) + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(path + ": top level must be an object");
    check_keys(j, "config", {"scenario", "dataset", "training", "sweep", "bound"});

    Config cfg;
    if (j.contains("scenario")) load_scenario(j.at("scenario"), cfg.scenario);
    if (j.contains("dataset")) load_dataset(j.at("dataset"), cfg.dataset);
    if (j.contains("training")) load_training(j.at("training"), cfg.training);
    if (j.contains("sweep")) {
        check_keys(j.at("sweep"), "sweep", {"neurons", "layers"});
        get_field(j.at("sweep"), "sweep", "neurons", cfg.sweep_neurons);
        get_field(j.at("sweep"), "sweep", "layers", cfg.sweep_layers);
    }
    if (j.contains("bound")) load_bound(j.at("bound"), cfg.bound);
    return cfg;
}

json dump_config(const Config& cfg) {
    json j;
    json& s = j["scenario"];
    s["name"] = cfg.scenario.name;
    s["controller"] = cfg.scenario.controller;
    s["load_kind"] = cfg.scenario.sc.plant.load.kind == LoadKind::Impedance
                         ? "impedance"
                         : "constant_power";
    s["load_value"] = cfg.scenario.sc.plant.load.value;
    json sched = json::array();
    for (const auto& [t, v] : cfg.scenario.sc.plant.load.schedule) {
        sched.push_back(json::array({t, v}));
    }
    s["load_schedule"] = sched;
    s["duration"] = cfg.scenario.sc.duration;
    s["y_ref"] = cfg.scenario.sc.y_ref;
    s["T_ctrl"] = cfg.scenario.sc.T_ctrl;
    s["sim_dt"] = cfg.scenario.sc.plant.sim_dt;
    s["V_in"] = cfg.scenario.sc.plant.V_in;
    s["L_N"] = cfg.scenario.sc.plant.L_N;
    s["C_N"] = cfg.scenario.sc.plant.C_N;
    s["L_true"] = cfg.scenario.sc.plant.L_true;
    s["C_true"] = cfg.scenario.sc.plant.C_true;
    s["seed"] = cfg.scenario.seed;

    json& d = j["dataset"];
    d["count"] = cfg.dataset.count;
    d["split_fraction"] = cfg.dataset.split_fraction;
    d["seed"] = cfg.dataset.seed;
    d["horizon"] = cfg.dataset.horizon;
    d["variants_per_case"] = cfg.dataset.variants_per_case;
    d["param_spread"] = cfg.dataset.param_spread;
    d["warmup"] = cfg.dataset.warmup;
    d["duty_dither"] = cfg.dataset.duty_dither;
    d["y_ref"] = cfg.dataset.y_ref;
    d["T_ctrl"] = cfg.dataset.T_ctrl;
    d["sim_dt"] = cfg.dataset.sim_dt;
    d["V_in"] = cfg.dataset.V_in;
    d["C_N"] = cfg.dataset.C_N;
    d["L_N"] = cfg.dataset.L_N;

    json& t = j["training"];
    t["hidden"] = cfg.training.hidden;
    t["iterations"] = cfg.training.iterations;
    t["batch"] = cfg.training.batch;
    t["learning_rate"] = cfg.training.learning_rate;
    t["seed"] = cfg.training.seed;
    t["lambda_phy"] = cfg.training.loss_weights.lambda_phy;
    t["lambda_ctrl"] = cfg.training.loss_weights.lambda_ctrl;
    t["expert_grad"] =
        cfg.training.expert_grad == ExpertGrad::StopGradient ? "stop" : "analytic";
    t["Q"] = cfg.training.cost_weights.Q;
    t["R_u"] = cfg.training.cost_weights.R_u;

    j["sweep"]["neurons"] = cfg.sweep_neurons;
    j["sweep"]["layers"] = cfg.sweep_layers;

    json& b = j["bound"];
    b["hypothesis_count"] = cfg.bound.hypothesis_count;
    b["sample_count"] = cfg.bound.sample_count;
    b["delta"] = cfg.bound.delta;
    b["test_error_pct"] = cfg.bound.test_error_pct;
    b["empirical_error_pct"] = cfg.bound.empirical_error_pct;
    return j;
}

// --- subcommands --------------------------------------------------------

std::string out_path(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

void print_metrics(const std::string& label, const LoopMetrics& m) {
    std::printf("%-24s settling %.4f s, peak deviation %.3f V, steady-state error "
                "%.4f V, ise %.6f\n",
                label.c_str(), m.settling_time, m.peak_deviation, m.steady_state_error,
                m.ise);
}

/// Parses "expert" | "pi" | "pinn:<checkpoint>"; loads the checkpoint when
/// the controller is the network.
ControllerKind parse_controller(const std::string& spec, NetModel& net) {
    if (spec == "expert") return ControllerKind::Expert;
    if (spec == "pi") return ControllerKind::Pi;
    if (spec.rfind("pinn:", 0) == 0) {
        const std::string path = spec.substr(5);
        if (path.empty()) throw ConfigError("pinn controller needs a checkpoint path");
        net = load_checkpoint(path);
        return ControllerKind::Pinn;
    }
    throw ConfigError("unknown controller '" + spec +
                      "' (expected expert, pi, or pinn:<checkpoint>)");
}

int cmd_simulate(const Config& cfg, const std::string& out_dir) {
    NetModel net;
    const ControllerKind kind = parse_controller(cfg.scenario.controller, net);
    const ScenarioConfig& sc = cfg.scenario.sc;
    sc.validate();

    const LoopResult r = run_closed_loop(sc, kind, kind == ControllerKind::Pinn ? &net : nullptr);

    const std::string traj_path = out_path(out_dir, cfg.scenario.name + "_trajectory.csv");
    write_trajectory_csv(r.traj, traj_path);
    std::printf("scenario %s under %s: %zu control periods\n", cfg.scenario.name.c_str(),
                cfg.scenario.controller.c_str(), r.traj.size() - 1);
    print_metrics("summary:", r.metrics);
    std::printf("trajectory written to %s\n", traj_path.c_str());

    if (kind == ControllerKind::Pinn) {
        const std::string tel_path = out_path(out_dir, cfg.scenario.name + "_telemetry.csv");
        write_telemetry_csv(tel_path, r.telemetry);
        std::printf("telemetry written to %s (%d fault steps)\n", tel_path.c_str(),
                    r.fault_count);
    }
    return 0;
}

int cmd_gen_data(const Config& cfg, const std::string& out_dir) {
    const Dataset ds = generate_dataset(cfg.dataset);
    const std::string path = out_path(out_dir, "dataset.csv");
    write_dataset_csv(ds, path);
    std::printf("generated %zu samples (%zu train / %zu validation) to %s\n",
                ds.samples.size(), ds.train_count, ds.samples.size() - ds.train_count,
                path.c_str());
    return 0;
}

int cmd_train(const Config& cfg, const std::string& out_dir, const std::string& data) {
    const Dataset ds = data.empty() ? generate_dataset(cfg.dataset) : load_dataset_csv(data);
    std::printf("training on %zu samples (%zu train / %zu validation)\n",
                ds.samples.size(), ds.train_count, ds.samples.size() - ds.train_count);

    const TrainResult res = train(cfg.training, ds);
    for (const ConvergenceRow& row : res.log.rows) {
        std::printf("  iteration %8zu  avg loss %12.6f  validation error %.4f%%\n",
                    row.iteration, row.avg_loss, row.pct_error);
    }

    const std::string ckpt = out_path(out_dir, "checkpoint.json");
    const std::string conv = out_path(out_dir, "convergence.csv");
    save_checkpoint(res.net, ckpt);
    write_convergence_csv(res.log, conv);
    std::printf("best validation error %.4f%%\ncheckpoint written to %s\n",
                percentage_error(res.net, ds, ds.train_count < ds.samples.size()), ckpt.c_str());
    std::printf("convergence log written to %s\n", conv.c_str());
    return 0;
}

int cmd_eval(const std::string& out_dir, const std::string& checkpoint) {
    const NetModel net = load_checkpoint(checkpoint);

    CsvWriter csv(out_path(out_dir, "eval.csv"));
    csv.header({"scenario", "controller", "settling_time", "peak_deviation",
                "steady_state_error", "ise", "fault_steps"});

    for (const ScenarioConfig& sc : preset_scenarios()) {
        for (const auto& [kind, label] :
             {std::pair{ControllerKind::Expert, "expert"}, {ControllerKind::Pi, "pi"},
              {ControllerKind::Pinn, "pinn"}}) {
            const LoopResult r = run_closed_loop(
                sc, kind, kind == ControllerKind::Pinn ? &net : nullptr);
            csv.raw_row(sc.name + "," + label + "," + format_double(r.metrics.settling_time) +
                        "," + format_double(r.metrics.peak_deviation) + "," +
                        format_double(r.metrics.steady_state_error) + "," +
                        format_double(r.metrics.ise) + "," + std::to_string(r.fault_count));
            write_trajectory_csv(
                r.traj, out_path(out_dir, "traj_" + sc.name + "_" + label + ".csv"));
            print_metrics(sc.name + "/" + label, r.metrics);
        }
    }
    csv.commit();
    std::printf("comparison table written to %s\n", out_path(out_dir, "eval.csv").c_str());
    return 0;
}

int cmd_sweep(const Config& cfg, const std::string& out_dir, const std::string& data) {
    const Dataset ds = data.empty() ? generate_dataset(cfg.dataset) : load_dataset_csv(data);
    const SweepResult sweep =
        sweep_architecture(cfg.sweep_neurons, cfg.sweep_layers, ds, cfg.training);

    for (std::size_t r = 0; r < sweep.neurons.size(); ++r) {
        std::printf("%4d neurons:", sweep.neurons[r]);
        for (double pct : sweep.pct[r]) std::printf(" %8.4f%%", pct);
        std::printf("\n");
    }
    const std::string path = out_path(out_dir, "sweep.csv");
    write_sweep_csv(sweep, path);
    std::printf("sweep grid written to %s\n", path.c_str());
    return 0;
}

int cmd_bound(const Config& cfg, const std::string& out_dir, bool emit_csv) {
    const BoundInputs& b = cfg.bound;
    const double eps = hoeffding_bound(b.hypothesis_count, b.sample_count, b.delta);
    const GapReport gap =
        gap_audit(b.test_error_pct / 100.0, b.empirical_error_pct / 100.0, eps);

    std::printf("hypotheses %zu, samples %zu, confidence %.2f%%\n", b.hypothesis_count,
                b.sample_count, 100.0 * (1.0 - b.delta));
    std::printf("generalization bound epsilon = %.2f%%\n", 100.0 * eps);
    std::printf("test error %.2f%%, empirical error %.2f%%, gap E_gen = %.2f%%\n",
                100.0 * gap.r_test, 100.0 * gap.r_emp, 100.0 * gap.e_gen);
    std::printf("bound %s: E_gen %s epsilon\n", gap.pass ? "holds" : "violated",
                gap.pass ? "<=" : ">");

    if (emit_csv) {
        CsvWriter csv(out_path(out_dir, "bound.csv"));
        csv.header({"hypothesis_count", "sample_count", "delta", "epsilon_pct",
                    "test_error_pct", "empirical_error_pct", "e_gen_pct", "pass"});
        csv.raw_row(std::to_string(b.hypothesis_count) + "," +
                    std::to_string(b.sample_count) + "," + format_double(b.delta) + "," +
                    format_double(100.0 * eps) + "," + format_double(b.test_error_pct) +
                    "," + format_double(b.empirical_error_pct) + "," +
                    format_double(100.0 * gap.e_gen) + "," + (gap.pass ? "1" : "0"));
        csv.commit();
        std::printf("report written to %s\n", out_path(out_dir, "bound.csv").c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"buck converter control pipeline"};
    app.require_subcommand(0, 1);

    std::string config_path;
    std::string out_dir = ".";
    std::string data_path;
    std::string checkpoint;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool dump = false;
    bool bound_csv = false;

    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", seed, "override dataset and training seeds")
        ->trigger_on_parse()
        ->each([&](const std::string&) { seed_given = true; });
    app.add_option("--out", out_dir, "output directory (default .)");
    app.add_flag("--dump-config", dump, "print the effective config and exit");

    CLI::App* sim = app.add_subcommand("simulate", "run one closed-loop scenario");
    CLI::App* gen = app.add_subcommand("gen-data", "generate the training dataset");
    CLI::App* trn = app.add_subcommand("train", "train the controller network");
    CLI::App* evl = app.add_subcommand("eval", "compare controllers on the preset scenarios");
    CLI::App* swp = app.add_subcommand("sweep", "architecture sweep");
    CLI::App* bnd = app.add_subcommand("bound", "generalization bound report");
    trn->add_option("--data", data_path, "dataset CSV (generated when omitted)");
    swp->add_option("--data", data_path, "dataset CSV (generated when omitted)");
    evl->add_option("--checkpoint", checkpoint, "trained network checkpoint")->required();
    bnd->add_flag("--csv", bound_csv, "also write a machine-readable bound.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        Config cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (seed_given) {
            cfg.dataset.seed = seed;
            cfg.training.seed = seed;
            cfg.scenario.seed = seed;
        }

        if (dump) {
            std::printf("%s\n", dump_config(cfg).dump(2).c_str());
            return 0;
        }
        if (app.get_subcommands().empty()) {
            std::fprintf(stderr, "%s\n", app.help().c_str());
            return 1;
        }

        std::filesystem::create_directories(out_dir);
        if (sim->parsed()) return cmd_simulate(cfg, out_dir);
        if (gen->parsed()) return cmd_gen_data(cfg, out_dir);
        if (trn->parsed()) return cmd_train(cfg, out_dir, data_path);
        if (evl->parsed()) return cmd_eval(out_dir, checkpoint);
        if (swp->parsed()) return cmd_sweep(cfg, out_dir, data_path);
        if (bnd->parsed()) return cmd_bound(cfg, out_dir, bound_csv);
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "runtime fault: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime fault: %s\n", e.what());
        return 2;
    }
}
