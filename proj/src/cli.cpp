#include "coastcast/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "coastcast/report.hpp"
#include "coastcast/training.hpp"

namespace coastcast {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum class SplitMode { Fraction, Dates, Paper };

struct PipelineConfig {
    ModelConfig model;
    TrainConfig train;
    WindowSpec window{10, 12};
    SplitMode split_mode = SplitMode::Fraction;
    double train_frac = 0.7;
    double val_frac = 0.15;
    SplitSpec dates;
};

DateRange parse_date_range(const json& j) {
    DateRange r;
    r.begin = parse_iso_time(j.at("from").get<std::string>());
    r.end = parse_iso_time(j.at("to").get<std::string>());
    return r;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    PipelineConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad config JSON: ") + e.what());
    }
    try {
        if (j.contains("model")) cfg.model = ModelConfig::from_json_string(j.at("model").dump());
        if (j.contains("train")) cfg.train = TrainConfig::from_json_string(j.at("train").dump());
        if (j.contains("window")) {
            cfg.window.lags = j.at("window").value("lags", std::size_t(10));
            cfg.window.horizon = j.at("window").value("horizon", std::size_t(12));
        }
        if (j.contains("split")) {
            const json& s = j.at("split");
            const std::string mode = s.value("mode", "fraction");
            if (mode == "fraction") {
                cfg.split_mode = SplitMode::Fraction;
                cfg.train_frac = s.value("train", 0.7);
                cfg.val_frac = s.value("validation", 0.15);
            } else if (mode == "paper") {
                cfg.split_mode = SplitMode::Paper;
                cfg.dates = SplitSpec::paper_defaults();
            } else if (mode == "dates") {
                cfg.split_mode = SplitMode::Dates;
                cfg.dates.train = parse_date_range(s.at("train"));
                for (std::size_t k = 0; k < 4; ++k) {
                    cfg.dates.validation[k] = parse_date_range(s.at("validation").at(kSeasonNames[k]));
                    cfg.dates.test[k] = parse_date_range(s.at("test").at(kSeasonNames[k]));
                }
            } else {
                throw UsageError("unknown split mode '" + mode + "' (fraction, dates, paper)");
            }
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad config JSON: ") + e.what());
    }
    return cfg;
}

SplitIndices resolve_split(const GridSeries& series, const PipelineConfig& cfg) {
    if (cfg.split_mode == SplitMode::Fraction) {
        return split_by_fractions(series, cfg.train_frac, cfg.val_frac, cfg.window);
    }
    return split_by_dates(series, cfg.dates, cfg.window);
}

// Reads the container and crops to the configured grid when it is larger.
GridSeries load_grid(const std::string& data_path, std::size_t height, std::size_t width) {
    GridSeries series = read_container(data_path);
    if (series.height() < height || series.width() < width) {
        throw ShapeError("dataset grid " + std::to_string(series.height()) + "x" + std::to_string(series.width()) +
                         " is smaller than the configured " + std::to_string(height) + "x" + std::to_string(width));
    }
    if (series.height() > height || series.width() > width) {
        series = crop_spatial(series, height, width);
    }
    return series;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

int cmd_synth(std::uint64_t seed, std::size_t steps, std::size_t height, std::size_t width,
              const std::string& out_path) {
    GridSeries s = synth_generate(seed, steps, height, width);
    write_container(s, out_path);
    std::cout << "wrote " << out_path << " (" << steps << " steps, " << height << "x" << width
              << ", 4 variables)\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path, const std::string& model_name_opt,
              std::int64_t horizon_opt, std::int64_t seed_opt, const std::string& out_dir) {
    PipelineConfig cfg = load_pipeline_config(config_path);
    if (!model_name_opt.empty()) cfg.model.kind = model_kind_from_name(model_name_opt);
    if (horizon_opt > 0) cfg.window.horizon = static_cast<std::size_t>(horizon_opt);
    if (seed_opt >= 0) cfg.train.seed = static_cast<std::uint64_t>(seed_opt);
    cfg.model.lags = cfg.window.lags;
    cfg.model.validate();

    GridSeries series = load_grid(data_path, cfg.model.height, cfg.model.width);
    if (series.vars() != cfg.model.variables) {
        throw ShapeError("dataset has " + std::to_string(series.vars()) + " variables, model expects " +
                         std::to_string(cfg.model.variables));
    }

    SplitIndices split = resolve_split(series, cfg);
    ScalerParams scaler = fit_scaler(series, split.train_steps);
    GridSeries scaled = apply_scale(series, scaler);

    WindowDataset train_set(scaled, cfg.window, split.train_windows);
    WindowDataset val_set(scaled, cfg.window, split.all_validation_windows());

    ModelF model = build_model<float>(cfg.model, cfg.train.seed ^ 0xc0a57ca57ULL);

    json extra;
    extra["scaler"] = json::parse(scaler.to_json_string());
    extra["window"] = {{"lags", cfg.window.lags}, {"horizon", cfg.window.horizon}};
    TrainResult result = train(model, train_set, val_set, cfg.train, extra.dump());

    fs::create_directories(out_dir);
    const std::string ckpt_path = (fs::path(out_dir) / "best.ckpt").string();
    save_checkpoint(result.best, ckpt_path);
    write_text((fs::path(out_dir) / "history.csv").string(), history_csv(result.history));
    std::cout << "trained " << model_name(cfg.model.kind) << " for " << result.history.size()
              << " epochs; best val mse " << result.best.val_mse << "\nwrote " << ckpt_path << "\n";
    return 0;
}

struct LoadedCheckpoint {
    ModelF model;
    ScalerParams scaler;
    WindowSpec window;
};

LoadedCheckpoint load_model_checkpoint(const std::string& ckpt_path) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    LoadedCheckpoint out{model_from_checkpoint(ckpt), {}, {}};
    try {
        json meta = json::parse(ckpt.meta_json);
        if (!meta.contains("scaler")) throw FormatError("checkpoint lacks scaler parameters");
        out.scaler = ScalerParams::from_json_string(meta.at("scaler").dump());
        out.window.lags = meta.at("window").value("lags", std::size_t(10));
        out.window.horizon = meta.at("window").value("horizon", std::size_t(12));
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad checkpoint metadata: ") + e.what());
    }
    return out;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& data_path, const std::string& config_path,
                 bool sea_column, const std::string& out_dir) {
    LoadedCheckpoint lc = load_model_checkpoint(ckpt_path);
    PipelineConfig cfg = load_pipeline_config(config_path);
    cfg.window = lc.window;
    const bool per_season = cfg.split_mode != SplitMode::Fraction;

    GridSeries series = load_grid(data_path, lc.model.config.height, lc.model.config.width);
    if (series.vars() != lc.model.config.variables) {
        throw ShapeError("dataset variables do not match the checkpoint");
    }
    GridSeries scaled = apply_scale(series, lc.scaler);

    SplitIndices split = resolve_split(scaled, cfg);
    EvalReport report = evaluate_model(lc.model, scaled, split.test_windows, cfg.window,
                                       model_name(lc.model.config.kind), 16, per_season);

    fs::create_directories(out_dir);
    const std::string csv_path = (fs::path(out_dir) / "evaluation.csv").string();
    write_text(csv_path, report_csv(report, sea_column));
    std::cout << "wrote " << csv_path << " (" << report.rows.size() << " rows)\n";
    return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& data_path, const std::string& time_text,
                const std::string& out_dir) {
    LoadedCheckpoint lc = load_model_checkpoint(ckpt_path);
    GridSeries series = load_grid(data_path, lc.model.config.height, lc.model.config.width);
    if (series.vars() != lc.model.config.variables) {
        throw ShapeError("dataset variables do not match the checkpoint");
    }

    const std::int64_t when = parse_iso_time(time_text);
    const std::int64_t offset = when - series.start_time;
    if (offset < 0 || offset % series.step_seconds != 0) {
        throw ValueError("timestamp " + time_text + " does not land on a series step");
    }
    const std::size_t t_idx = static_cast<std::size_t>(offset / series.step_seconds);
    const WindowSpec& w = lc.window;
    if (t_idx + 1 < w.lags) throw ValueError("timestamp leaves no room for " + std::to_string(w.lags) + " lags");
    const std::size_t sample = t_idx + 1 - w.lags;
    const std::size_t target_step = window_target_step(sample, w);
    if (target_step >= series.steps()) {
        throw ValueError("timestamp plus horizon " + std::to_string(w.horizon) + " leaves the dataset");
    }

    const std::size_t H = series.height(), W = series.width(), V = series.vars();
    GridSeries scaled = apply_scale(series, lc.scaler);
    TensorF input = window_input(scaled, sample, w);
    input = input.reshaped({1, w.lags, H, W, V});
    TensorF pred_scaled = lc.model.forward(input, Mode::Eval);

    // back to physical units; land pixels render as 0
    GridSeries pred_series;
    pred_series.values = TensorF::zeros({1, H, W, V});
    pred_series.start_time = series.start_time + static_cast<std::int64_t>(target_step) * series.step_seconds;
    pred_series.step_seconds = series.step_seconds;
    pred_series.variable_names = series.variable_names;
    pred_series.mask = series.mask;
    {
        GridSeries tmp = pred_series;
        std::copy(pred_scaled.data.begin(), pred_scaled.data.end(), tmp.values.data.begin());
        pred_series = inverse_scale(tmp, lc.scaler);
    }

    fs::create_directories(out_dir);
    auto panel = [&](std::size_t v, std::size_t step, const GridSeries& src) {
        TensorF img = TensorF::zeros({H, W});
        for (std::size_t r = 0; r < H; ++r)
            for (std::size_t c = 0; c < W; ++c)
                img[r * W + c] = src.is_sea(r, c) ? src.at(step, r, c, v) : 0.0f;
        return img;
    };

    for (std::size_t v = 0; v < V; ++v) {
        const std::string& name = series.variable_names[v];
        const fs::path base = fs::path(out_dir) / name;
        write_pgm_with_sidecar(panel(v, t_idx, series), (base.string() + "_input"));
        write_pgm_with_sidecar(panel(v, target_step, series), (base.string() + "_truth"));
        write_pgm_with_sidecar(panel(v, 0, pred_series), (base.string() + "_prediction"));
        TensorF err = TensorF::zeros({H, W});
        for (std::size_t r = 0; r < H; ++r)
            for (std::size_t c = 0; c < W; ++c) {
                if (!series.is_sea(r, c)) continue;
                err[r * W + c] = std::abs(pred_series.at(0, r, c, v) - series.at(target_step, r, c, v));
            }
        write_pgm_with_sidecar(err, (base.string() + "_abserror"));
    }
    write_container(pred_series, (fs::path(out_dir) / "prediction.cten").string());
    std::cout << "wrote " << V * 4 << " images and prediction.cten to " << out_dir << "\n";
    return 0;
}

int cmd_inspect(const std::string& model_name_opt, const std::string& config_path, const std::string& out_dir) {
    PipelineConfig cfg = load_pipeline_config(config_path);
    std::vector<ModelKind> kinds;
    if (model_name_opt.empty() || model_name_opt == "all") {
        kinds = all_model_kinds();
    } else {
        kinds.push_back(model_kind_from_name(model_name_opt));
    }

    fs::create_directories(out_dir);
    std::vector<std::size_t> totals, convs;
    for (ModelKind kind : kinds) {
        ModelConfig mc = cfg.model;
        mc.kind = kind;
        ModelF model = build_model<float>(mc, 1);
        ParamCountReport r = count_params(model);
        totals.push_back(r.total);
        convs.push_back(r.conv_layers);
        write_text((fs::path(out_dir) / ("summary_" + model_name(kind) + ".csv")).string(), summarize_csv(model));
    }

    // base for the ratio column: the plain model under the same config
    std::size_t base_total = 0;
    {
        ModelConfig mc = cfg.model;
        mc.kind = ModelKind::DDR3;
        base_total = count_params(build_model<float>(mc, 1)).total;
    }

    std::ostringstream os;
    os << "model,params,conv_layers,ratio_vs_base\n";
    char buf[32];
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.4f", static_cast<double>(totals[i]) / static_cast<double>(base_total));
        os << model_name(kinds[i]) << ',' << totals[i] << ',' << convs[i] << ',' << buf << '\n';
    }
    const std::string csv_path = (fs::path(out_dir) / "params.csv").string();
    write_text(csv_path, os.str());
    std::cout << "wrote " << csv_path << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"coastal sea-element forecasting with 3D encoder / time-reduced decoder U-Nets"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic coastal dataset container");
    std::uint64_t seed = 7;
    std::size_t steps = 256, height = 32, width = 32;
    std::string out_path = "synth.cten";
    synth->add_option("--seed", seed, "RNG seed");
    synth->add_option("--steps", steps, "number of hourly steps");
    synth->add_option("--height", height, "grid height");
    synth->add_option("--width", width, "grid width");
    synth->add_option("--out", out_path, "output container path");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model and keep the best-on-validation checkpoint");
    std::string config_path, data_path, model_name_opt, out_dir = "out";
    std::int64_t horizon_opt = -1, seed_opt = -1;
    train_cmd->add_option("--config", config_path, "pipeline config JSON");
    train_cmd->add_option("--data", data_path, "dataset container (.cten)")->required();
    train_cmd->add_option("--model", model_name_opt, "architecture name");
    train_cmd->add_option("--horizon", horizon_opt, "prediction horizon in steps");
    train_cmd->add_option("--seed", seed_opt, "training seed");
    train_cmd->add_option("--out", out_dir, "output directory");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "per-season test MSE report for a checkpoint");
    std::string ckpt_path;
    bool sea_column = false;
    eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", data_path, "dataset container (.cten)")->required();
    eval_cmd->add_option("--config", config_path, "pipeline config JSON (split definition)");
    eval_cmd->add_flag("--sea-mse", sea_column, "append a sea-pixel-only MSE column");
    eval_cmd->add_option("--out", out_dir, "output directory");

    // predict
    auto* pred_cmd = app.add_subcommand("predict", "dump prediction images for one timestamp");
    std::string time_text;
    pred_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    pred_cmd->add_option("--data", data_path, "dataset container (.cten)")->required();
    pred_cmd->add_option("--time", time_text, "ISO-8601 timestamp of the last input lag")->required();
    pred_cmd->add_option("--out", out_dir, "output directory");

    // inspect
    auto* insp_cmd = app.add_subcommand("inspect", "parameter counts and layer summaries");
    insp_cmd->add_option("--model", model_name_opt, "architecture name or 'all'");
    insp_cmd->add_option("--config", config_path, "pipeline config JSON");
    insp_cmd->add_option("--out", out_dir, "output directory");

    std::vector<std::string> argv_copy = args;
    std::vector<char*> argv;
    argv.push_back(const_cast<char*>("coastcast"));
    for (std::string& a : argv_copy) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(seed, steps, height, width, out_path);
        if (train_cmd->parsed()) return cmd_train(config_path, data_path, model_name_opt, horizon_opt, seed_opt, out_dir);
        if (eval_cmd->parsed()) return cmd_evaluate(ckpt_path, data_path, config_path, sea_column, out_dir);
        if (pred_cmd->parsed()) return cmd_predict(ckpt_path, data_path, time_text, out_dir);
        if (insp_cmd->parsed()) return cmd_inspect(model_name_opt, config_path, out_dir);
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace coastcast
