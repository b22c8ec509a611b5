#include "memda/cli.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "memda/checkpoint.hpp"
#include "memda/errors.hpp"
#include "memda/plot.hpp"
#include "memda/trainer.hpp"

namespace memda {

namespace {

namespace fs = std::filesystem;

struct ExperimentConfig {
    std::string data_path;                // CSV source; empty when generating
    std::optional<DriftConfig> generate;  // inline synthetic source
    int p = 288;                          // samples/day when loading CSV
    int channels = 1;
    long long train_end = -1;    // -1: derived as 4/5 of drift_time
    double val_fraction = 0.2;
    long long metrics_from = -2;  // -2: drift_time when generating, else all
    ModelConfig model;
    TrainConfig train;
};

DriftConfig desk_drift_defaults() {
    DriftConfig dc;
    dc.drift_kind = DriftKind::sudden;
    dc.base_period = 24;
    dc.n_nodes = 8;
    dc.n_days = 30;
    dc.drift_time = 20 * 24;
    dc.magnitude = 2.0;
    dc.noise_std = 0.1;
    return dc;
}

DriftConfig paper_drift_defaults() {
    DriftConfig dc;
    dc.drift_kind = DriftKind::sudden;
    dc.base_period = 288;
    dc.n_nodes = 8;
    dc.n_days = 30;
    dc.drift_time = 20 * 288;
    dc.magnitude = 2.0;
    dc.noise_std = 0.1;
    return dc;
}

void apply_preset(const std::string& name, ExperimentConfig& ec) {
    if (name.empty()) return;
    if (name == "desk") {
        ec.model.C_e = 64;
        ec.model.hidden = 32;
        ec.model.L = 8;
        ec.model.D = 16;
        ec.p = 24;
        ec.generate = desk_drift_defaults();
        ec.train.batch_size = 32;
        ec.train.max_epochs = 60;
        ec.train.patience = 15;
        ec.train.learning_rate = 0.0015;
        ec.train.drift_augment = 0.3;
        ec.train.drift_augment_scale = 0.5;
    } else if (name == "paper") {
        ec.model.C_e = 256;
        ec.model.hidden = 64;
        ec.model.L = 20;
        ec.model.D = 32;
        ec.p = 288;
        ec.generate = paper_drift_defaults();
        ec.train.batch_size = 32;
        ec.train.max_epochs = 60;
        ec.train.patience = 15;
        ec.train.learning_rate = 0.0015;
        ec.train.drift_augment = 0.3;
        ec.train.drift_augment_scale = 0.5;
    } else {
        throw ConfigError("unknown preset '" + name + "' (known: desk, paper)");
    }
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("'" + path + "': " + e.what());
    }
}

ExperimentConfig experiment_from_json(const nlohmann::json& j, ExperimentConfig base) {
    static const std::vector<std::string> known = {
        "data",        "generate",     "p",     "channels", "train_end",
        "val_fraction", "metrics_from", "model", "train"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("unknown experiment config key '" + it.key() + "'");
    ExperimentConfig ec = std::move(base);
    try {
        if (j.contains("data")) {
            ec.data_path = j.at("data").get<std::string>();
            ec.generate.reset();
        }
        if (j.contains("generate"))
            ec.generate = drift_config_from_json(
                j.at("generate"), ec.generate ? *ec.generate : DriftConfig{});
        if (j.contains("p")) ec.p = j.at("p").get<int>();
        if (j.contains("channels")) ec.channels = j.at("channels").get<int>();
        if (j.contains("train_end")) ec.train_end = j.at("train_end").get<long long>();
        if (j.contains("val_fraction")) ec.val_fraction = j.at("val_fraction").get<double>();
        if (j.contains("metrics_from")) ec.metrics_from = j.at("metrics_from").get<long long>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad experiment config value: ") + e.what());
    }
    if (j.contains("model")) ec.model = model_config_from_json(j.at("model"), ec.model);
    if (j.contains("train")) ec.train = train_config_from_json(j.at("train"), ec.train);
    return ec;
}

nlohmann::json experiment_to_json(const ExperimentConfig& ec) {
    nlohmann::json j{{"p", ec.p},
                     {"channels", ec.channels},
                     {"train_end", ec.train_end},
                     {"val_fraction", ec.val_fraction},
                     {"metrics_from", ec.metrics_from},
                     {"model", model_config_to_json(ec.model)},
                     {"train", train_config_to_json(ec.train)}};
    if (!ec.data_path.empty()) j["data"] = ec.data_path;
    if (ec.generate) j["generate"] = drift_config_to_json(*ec.generate);
    return j;
}

long long resolved_train_end(const ExperimentConfig& ec) {
    if (ec.train_end >= 0) return ec.train_end;
    if (ec.generate) return ec.generate->drift_time * 4 / 5;
    throw ConfigError("train_end is required when loading data from a file");
}

long long resolved_metrics_from(const ExperimentConfig& ec) {
    if (ec.metrics_from != -2) return ec.metrics_from;
    return ec.generate ? ec.generate->drift_time : -1;
}

Dataset load_dataset(const ExperimentConfig& ec) {
    UrbanSeries series = ec.generate ? generate_synthetic_drift(*ec.generate)
                                     : load_csv(ec.data_path, ec.p, ec.channels);
    return prepare_dataset(series, resolved_train_end(ec), ec.val_fraction, ec.model.alpha,
                           ec.model.effective_K());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("write to '" + path + "' failed");
}

std::string out_root() {
    const char* env = std::getenv("MEMDA_OUT_DIR");
    return env && *env ? env : "runs";
}

void refuse_existing(const std::string& path, bool force) {
    if (!force && fs::exists(path))
        throw ConfigError("'" + path + "' exists; pass --force to overwrite");
}

std::string config_echo_path(std::string out) {
    if (out.size() > 4 && out.substr(out.size() - 4) == ".csv") out.resize(out.size() - 4);
    return out + ".config.json";
}

void write_report_files(const std::string& run_dir, const EvalReport& report,
                        const nlohmann::json& config_echo) {
    nlohmann::json j = report.to_json();
    j["config"] = config_echo;
    write_text(run_dir + "/report.json", j.dump(2) + "\n");

    std::ostringstream days;
    days << "day,count,rmse,mae,mape\n";
    for (const DayMetrics& d : report.per_day) {
        char row[160];
        std::snprintf(row, sizeof(row), "%lld,%lld,%.17g,%.17g,%.17g\n", d.day, d.count, d.rmse,
                      d.mae, d.mape);
        days << row;
    }
    write_text(run_dir + "/per_day.csv", days.str());

    std::ostringstream w;
    w << "t";
    const std::size_t n_entries = report.weights.empty() ? 0 : report.weights[0].w.size();
    for (std::size_t i = 0; i < n_entries; ++i) w << ",w" << i;
    w << "\n";
    for (const WeightSample& ws : report.weights) {
        w << ws.anchor_t;
        for (double v : ws.w) {
            char cell[40];
            std::snprintf(cell, sizeof(cell), ",%.17g", v);
            w << cell;
        }
        w << "\n";
    }
    write_text(run_dir + "/weights.csv", w.str());
}

int cmd_generate(const std::string& config_path, const std::string& preset, std::string out,
                 std::optional<std::uint64_t> seed, bool force) {
    ExperimentConfig ec;
    apply_preset(preset, ec);
    if (!config_path.empty()) {
        const nlohmann::json j = load_json_file(config_path);
        if (j.contains("generate") || j.contains("model"))
            ec = experiment_from_json(j, std::move(ec));
        else
            ec.generate = drift_config_from_json(j, ec.generate ? *ec.generate : DriftConfig{});
    }
    if (!ec.generate) throw ConfigError("nothing to generate: pass --preset or a config file");
    if (seed) ec.generate->seed = *seed;
    ec.generate->validate();

    if (out.empty()) out = out_root() + "/synthetic.csv";
    refuse_existing(out, force);
    if (out.find('/') != std::string::npos)
        fs::create_directories(fs::path(out).parent_path());

    const UrbanSeries series = generate_synthetic_drift(*ec.generate);
    save_csv(series, out);
    write_text(config_echo_path(out), drift_config_to_json(*ec.generate).dump(2) + "\n");
    std::printf("wrote %s (%lld rows x %d nodes)\n", out.c_str(), series.T(), series.N());
    return 0;
}

TrainHistory merge_history(TrainHistory base, const TrainHistory& extra) {
    const int offset = base.epochs.empty() ? 0 : base.epochs.back().epoch;
    for (EpochStats e : extra.epochs) {
        e.epoch += offset;
        base.epochs.push_back(e);
    }
    base.best_epoch = extra.best_epoch + offset;
    base.best_mae = extra.best_mae;
    base.warmup_encoder_calls += extra.warmup_encoder_calls;
    base.seconds += extra.seconds;
    return base;
}

TrainHistory history_from_json(const nlohmann::json& j) {
    TrainHistory h;
    for (const auto& e : j.at("epochs")) {
        EpochStats s;
        s.epoch = e.at("epoch").get<int>();
        s.train_mae = e.at("train_mae").get<double>();
        s.val_mae = e.at("val_mae").is_null() ? std::nan("") : e.at("val_mae").get<double>();
        s.embedding_drift = e.at("embedding_drift").is_null()
                                ? std::nan("")
                                : e.at("embedding_drift").get<double>();
        s.encoder_calls = e.at("encoder_calls").get<long long>();
        s.seconds = e.at("seconds").get<double>();
        h.epochs.push_back(s);
    }
    h.best_epoch = j.at("best_epoch").get<int>();
    h.best_mae = j.at("best_mae").get<double>();
    h.warmup_encoder_calls = j.at("warmup_encoder_calls").get<long long>();
    h.seconds = j.at("seconds").get<double>();
    return h;
}

int train_into(const ExperimentConfig& ec, const std::string& run_dir, bool resume) {
    Dataset data = load_dataset(ec);
    TrainHistory prior;
    std::optional<Model> model;
    TrainConfig tc = ec.train;

    const std::string ckpt = run_dir + "/checkpoint.bin";
    const std::string hist = run_dir + "/history.json";
    if (resume) {
        if (!fs::exists(ckpt) || !fs::exists(hist))
            throw ConfigError("--resume needs an existing checkpoint and history in '" + run_dir +
                              "'");
        model.emplace(load_checkpoint(ckpt));
        prior = history_from_json(load_json_file(hist));
        const int done = prior.epochs.empty() ? 0 : prior.epochs.back().epoch;
        if (done >= tc.max_epochs) {
            std::printf("nothing to resume: %d epochs already trained\n", done);
            return 0;
        }
        tc.max_epochs -= done;
    } else {
        model.emplace(ec.model);
    }

    TrainHistory h = train(*model, data, tc);
    if (resume) h = merge_history(std::move(prior), h);
    save_checkpoint(*model, ckpt);
    write_text(hist, h.to_json().dump(2) + "\n");
    write_text(run_dir + "/config.json", experiment_to_json(ec).dump(2) + "\n");
    std::printf("trained %s: %zu epochs, best %.6f at epoch %d -> %s\n",
                to_string(ec.model.variant).c_str(), h.epochs.size(), h.best_mae, h.best_epoch,
                ckpt.c_str());
    return 0;
}

int evaluate_into(const ExperimentConfig& ec, const std::string& run_dir, bool timing) {
    const std::string ckpt = run_dir + "/checkpoint.bin";
    if (!fs::exists(ckpt)) throw Error("missing checkpoint '" + ckpt + "'");
    Model model = load_checkpoint(ckpt);
    ExperimentConfig eval_ec = ec;
    eval_ec.model = model.config();
    Dataset data = load_dataset(eval_ec);

    EvalOptions opts;
    opts.metrics_from = resolved_metrics_from(eval_ec);
    opts.record_timing = timing;
    EvalReport report = evaluate_online(model, data, data.test_anchors, opts);
    write_report_files(run_dir, report, experiment_to_json(eval_ec));
    std::printf("evaluated %s: rmse %.6f mae %.6f mape %.3f%% over %lld anchors\n",
                to_string(model.config().variant).c_str(), report.rmse, report.mae, report.mape,
                report.scored);
    return 0;
}

ExperimentConfig resolve_experiment(const std::string& config_path, const std::string& preset,
                                    const std::string& variant,
                                    std::optional<std::uint64_t> seed, bool timing) {
    ExperimentConfig ec;
    apply_preset(preset, ec);
    if (!config_path.empty()) ec = experiment_from_json(load_json_file(config_path), std::move(ec));
    if (!variant.empty()) ec.model.variant = variant_from_string(variant);
    if (seed) {
        ec.model.seed = *seed;
        ec.train.seed = *seed;
        if (ec.generate) ec.generate->seed = *seed;
    }
    if (timing) ec.train.record_timing = true;
    ec.model.validate();
    ec.train.validate();
    if (ec.generate) ec.generate->validate();
    if (!ec.generate && ec.data_path.empty())
        throw ConfigError("no data source: set \"data\" or \"generate\" (or --preset)");
    // pin derived defaults so the run dir's config echo stands on its own
    ec.train_end = resolved_train_end(ec);
    ec.metrics_from = resolved_metrics_from(ec);
    return ec;
}

int cmd_train(const std::string& config_path, const std::string& preset,
              const std::string& variant, std::optional<std::uint64_t> seed, std::string run_dir,
              bool force, bool resume, bool timing, bool verbose) {
    ExperimentConfig ec = resolve_experiment(config_path, preset, variant, seed, timing);
    if (verbose) ec.train.verbose = true;
    if (run_dir.empty())
        run_dir = out_root() + "/" + to_string(ec.model.variant) + "-seed" +
                  std::to_string(ec.train.seed);
    if (!resume) refuse_existing(run_dir + "/checkpoint.bin", force);
    fs::create_directories(run_dir);
    return train_into(ec, run_dir, resume);
}

int cmd_evaluate(const std::string& run_dir, const std::string& data_override,
                 long long metrics_from_override, bool timing) {
    if (run_dir.empty()) throw ConfigError("--run is required");
    const std::string cfg_path = run_dir + "/config.json";
    if (!fs::exists(cfg_path)) throw ConfigError("missing '" + cfg_path + "'");
    ExperimentConfig ec = experiment_from_json(load_json_file(cfg_path), ExperimentConfig{});
    if (!data_override.empty()) {
        ec.data_path = data_override;
        ec.generate.reset();
    }
    if (metrics_from_override != -2) ec.metrics_from = metrics_from_override;
    return evaluate_into(ec, run_dir, timing);
}

int run_variant_process(const ExperimentConfig& ec, const std::string& dir) {
    const pid_t pid = fork();
    if (pid < 0) throw Error("fork failed");
    if (pid == 0) {
        int rc = 1;
        try {
            rc = train_into(ec, dir, false);
            if (rc == 0) rc = evaluate_into(ec, dir, false);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "%s: %s\n", to_string(ec.model.variant).c_str(), e.what());
        }
        _exit(rc);
    }
    return pid;
}

int cmd_ablate(const std::string& config_path, const std::string& preset,
               std::optional<std::uint64_t> seed, std::string out_dir, bool force, bool parallel) {
    ExperimentConfig base = resolve_experiment(config_path, preset, "", seed, false);
    if (out_dir.empty()) out_dir = out_root() + "/ablation";
    refuse_existing(out_dir + "/ablation.csv", force);
    fs::create_directories(out_dir);

    struct Row {
        std::string variant;
        bool ok = false;
        double rmse = 0, mae = 0, mape = 0;
    };
    std::vector<Row> rows;
    std::vector<std::pair<std::string, pid_t>> children;

    for (const std::string& name : variant_names()) {
        ExperimentConfig ec = base;
        ec.model.variant = variant_from_string(name);
        const std::string dir = out_dir + "/" + name;
        fs::create_directories(dir);
        if (parallel) {
            children.emplace_back(name, run_variant_process(ec, dir));
        } else {
            Row row{name, false, 0, 0, 0};
            try {
                train_into(ec, dir, false);
                evaluate_into(ec, dir, false);
                row.ok = true;
            } catch (const std::exception& e) {
                std::fprintf(stderr, "%s failed: %s\n", name.c_str(), e.what());
            }
            rows.push_back(row);
        }
    }
    for (auto& [name, pid] : children) {
        int status = 0;
        waitpid(pid, &status, 0);
        rows.push_back({name, WIFEXITED(status) && WEXITSTATUS(status) == 0, 0, 0, 0});
    }

    for (Row& row : rows) {
        if (!row.ok) continue;
        try {
            const nlohmann::json r = load_json_file(out_dir + "/" + row.variant + "/report.json");
            row.rmse = r.at("rmse").get<double>();
            row.mae = r.at("mae").get<double>();
            row.mape = r.at("mape").get<double>();
        } catch (const std::exception&) {
            row.ok = false;
        }
    }

    std::ostringstream csv, md;
    csv << "variant,rmse,mae,mape,status\n";
    md << "| variant | RMSE | MAE | MAPE % | status |\n|---|---|---|---|---|\n";
    for (const Row& row : rows) {
        if (row.ok) {
            char line[200];
            std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.4f,ok\n", row.variant.c_str(),
                          row.rmse, row.mae, row.mape);
            csv << line;
            std::snprintf(line, sizeof(line), "| %s | %.4f | %.4f | %.2f | ok |\n",
                          row.variant.c_str(), row.rmse, row.mae, row.mape);
            md << line;
        } else {
            csv << row.variant << ",,,,failed\n";
            md << "| " << row.variant << " | - | - | - | failed |\n";
        }
    }
    write_text(out_dir + "/ablation.csv", csv.str());
    write_text(out_dir + "/ablation.md", md.str());
    std::printf("%s", md.str().c_str());
    bool any_failed = false;
    for (const Row& row : rows) any_failed = any_failed || !row.ok;
    return any_failed ? 1 : 0;
}

Tensor weights_matrix_from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing weight trajectory '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw Error("'" + path + "': empty file");
    std::vector<std::vector<double>> cols;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        if (row.size() < 2) throw Error("'" + path + "': malformed row '" + line + "'");
        row.erase(row.begin());  // anchor timestamp column
        cols.push_back(std::move(row));
    }
    if (cols.empty()) throw Error("'" + path + "': no weight rows to plot");
    const int entries = static_cast<int>(cols[0].size());
    Tensor m({entries, static_cast<int>(cols.size())});
    for (std::size_t t = 0; t < cols.size(); ++t) {
        if (static_cast<int>(cols[t].size()) != entries)
            throw Error("'" + path + "': ragged weight rows");
        for (int e = 0; e < entries; ++e) m.at(e, static_cast<int>(t)) = cols[t][e];
    }
    return m;
}

int cmd_plot_weights(const std::string& run_dir, std::string out, int cell) {
    if (run_dir.empty()) throw ConfigError("--run is required");
    const Tensor m = weights_matrix_from_csv(run_dir + "/weights.csv");
    if (out.empty()) out = run_dir + "/weights.bmp";
    plot_heatmap(m, out, cell, cell * 8);
    std::printf("wrote %s (%d weight entries x %d anchors)\n", out.c_str(), m.dim(0), m.dim(1));
    return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"memda: memory-based drift adaptation for urban time-series forecasting"};
    app.require_subcommand(1);

    std::string config_path, preset, variant, out, run_dir, data_override;
    std::uint64_t seed_value = 0;
    bool force = false, parallel = false, resume = false, timing = false, verbose = false;
    long long metrics_from = -2;
    int cell = 3;

    CLI::App* gen = app.add_subcommand("generate", "write a synthetic drift CSV");
    gen->add_option("--config", config_path, "drift or experiment config JSON");
    gen->add_option("--out", out, "output CSV path");
    gen->add_option("--seed", seed_value, "generator seed override");
    gen->add_option("--preset", preset, "desk or paper defaults");
    gen->add_flag("--force", force, "overwrite existing outputs");

    CLI::App* tr = app.add_subcommand("train", "train a variant into a run directory");
    tr->add_option("--config", config_path, "experiment config JSON");
    tr->add_option("--out", run_dir, "run directory");
    tr->add_option("--seed", seed_value, "seed override (model, batching, generator)");
    tr->add_option("--preset", preset, "desk or paper defaults");
    tr->add_option("--variant", variant, "backbone|rm|rm_pm|meta|memda");
    tr->add_flag("--force", force, "overwrite an existing run");
    tr->add_flag("--resume", resume, "continue from the run's last checkpoint");
    tr->add_flag("--timing", timing, "record wall-clock times in history");
    tr->add_flag("--verbose", verbose, "per-epoch progress on stderr");

    CLI::App* ev = app.add_subcommand("evaluate", "online evaluation of a trained run");
    ev->add_option("--run", run_dir, "run directory with checkpoint + config")->required();
    ev->add_option("--data", data_override, "override the data CSV");
    ev->add_option("--metrics-from", metrics_from, "score only anchors >= this index");
    ev->add_flag("--timing", timing, "record wall-clock time in the report");

    CLI::App* ab = app.add_subcommand("ablate", "train + evaluate all five variants");
    ab->add_option("--config", config_path, "experiment config JSON");
    ab->add_option("--out", out, "ablation output directory");
    ab->add_option("--seed", seed_value, "shared seed for every variant");
    ab->add_option("--preset", preset, "desk or paper defaults");
    ab->add_flag("--force", force, "overwrite existing outputs");
    ab->add_flag("--parallel", parallel, "one process per variant");

    CLI::App* pw = app.add_subcommand("plot-weights", "fusion-weight heatmap from a run");
    pw->add_option("--run", run_dir, "run directory with weights.csv")->required();
    pw->add_option("--out", out, "output BMP path");
    pw->add_option("--cell", cell, "pixels per trajectory step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    std::optional<std::uint64_t> seed;
    if (gen->count("--seed") || tr->count("--seed") || ab->count("--seed")) seed = seed_value;

    try {
        if (app.got_subcommand(gen)) return cmd_generate(config_path, preset, out, seed, force);
        if (app.got_subcommand(tr))
            return cmd_train(config_path, preset, variant, seed, run_dir, force, resume, timing,
                             verbose);
        if (app.got_subcommand(ev))
            return cmd_evaluate(run_dir, data_override, metrics_from, timing);
        if (app.got_subcommand(ab))
            return cmd_ablate(config_path, preset, seed, out, force, parallel);
        if (app.got_subcommand(pw)) return cmd_plot_weights(run_dir, out, cell);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace memda
