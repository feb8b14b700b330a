// headway_lab: simulate, preprocess, train, evaluate, predict, what-if, serve, export.
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "headway/checkpoint.hpp"
#include "headway/config.hpp"
#include "headway/io.hpp"
#include "headway/pipeline.hpp"
#include "headway/predictor.hpp"
#include "headway/service.hpp"
#include "headway/version.hpp"
#include "headway/whatif.hpp"

namespace fs = std::filesystem;
using namespace headway;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::optional<int> replications;
    std::string horizons = "15,30,45,60";
    std::optional<int> epochs;
    int port = 8080;
    std::string host = "127.0.0.1";
    std::string input;
    std::string data;
    std::string checkpoint;
    int replication = -1;
    int anchor = -1;
    int rounds = 1;
    std::vector<std::string> plans;
    std::size_t baseline = 0;
    std::optional<int> distance_bin;
    std::optional<double> distance_ft;
};

AppConfig resolve_config(const Options& o)
{
    AppConfig c = o.config.empty() ? AppConfig{} : load_config(o.config);
    if (o.seed) {
        c.experiment.seed = *o.seed;
        c.train.seed = *o.seed;
    }
    if (o.replications) c.experiment.replications = *o.replications;
    if (o.epochs) c.train.epochs = *o.epochs;
    c.sync_window();
    c.validate();
    return c;
}

std::vector<int> parse_horizons(const std::string& text)
{
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvariantError(fmt::format("--horizons: '{}' is not an integer", item));
        }
    }
    if (out.empty()) throw InvariantError("--horizons: empty list");
    return out;
}

class Manifest {
public:
    Manifest(std::string command, const AppConfig& config, std::uint64_t seed)
        : start_(std::chrono::steady_clock::now())
    {
        m_.command = std::move(command);
        m_.config = config_to_json(config);
        m_.seed = seed;
        m_.tool_version = kVersion;
    }
    void input(const fs::path& p) { m_.inputs.push_back(p.string()); }
    void output(const fs::path& p) { m_.outputs.push_back(p.string()); }
    void write(const fs::path& dir)
    {
        m_.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        io::write_manifest(dir, m_);
    }

private:
    io::RunManifest m_;
    std::chrono::steady_clock::time_point start_;
};

fs::path require_dir(const std::string& dir, const char* flag)
{
    if (dir.empty()) throw InvariantError(fmt::format("{} is required", flag));
    if (!fs::is_directory(dir)) throw std::runtime_error(fmt::format("{}: no such directory '{}'", flag, dir));
    return dir;
}

fs::path require_file(const std::string& file, const char* flag)
{
    if (file.empty()) throw InvariantError(fmt::format("{} is required", flag));
    if (!fs::is_regular_file(file)) throw std::runtime_error(fmt::format("{}: no such file '{}'", flag, file));
    return file;
}

int cmd_simulate(const Options& o)
{
    const auto c = resolve_config(o);
    Manifest man("simulate", c, c.experiment.seed);
    const fs::path out = o.out;
    fs::create_directories(out);
    const auto logs = sim::generate_dataset(c.line, c.experiment.replications, c.experiment.seed,
                                            c.experiment.even_headway);
    for (const auto& log : logs) {
        const auto path = io::trajectory_file(out, log.replication_id);
        io::write_trajectory_csv(path, std::span(&log, 1));
        man.output(path);
    }
    spdlog::info("wrote {} replications to {}", logs.size(), out.string());
    man.write(out);
    return 0;
}

int cmd_preprocess(const Options& o)
{
    const auto c = resolve_config(o);
    const auto in = require_dir(o.input, "--in");
    Manifest man("preprocess", c, c.experiment.seed);
    std::vector<sim::TrajectoryLog> logs;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(in)) {
        const auto name = e.path().filename().string();
        if (name.starts_with("trajectories_r") && name.ends_with(".csv")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no trajectories_r*.csv files in " + in.string());
    for (const auto& f : files) {
        man.input(f);
        for (auto& log : io::read_trajectory_csv(f)) logs.push_back(std::move(log));
    }
    const auto data = pipeline::build_dataset(logs, c.grid, c.experiment.validation_fraction, c.experiment.seed);
    const fs::path out = o.out;
    pipeline::write_dataset(out, data);
    man.output(out / "split.json");
    spdlog::info("{} replications: {} train, {} validation; scaler [{}, {}] s", data.grids.size(),
                 data.train_ids.size(), data.validation_ids.size(), data.scaler.h_min, data.scaler.h_max);
    man.write(out);
    return 0;
}

int cmd_train(const Options& o)
{
    const auto c = resolve_config(o);
    const auto data_dir = require_dir(o.data, "--data");
    Manifest man("train", c, c.train.seed);
    man.input(data_dir);
    const auto data = pipeline::read_dataset(data_dir);
    if (!(data.spec == c.grid)) throw InvariantError("grid spec in --data differs from the configuration");
    const auto train_set = pipeline::sample_set(data, data.train_ids, c.window, window::Role::train);
    const auto val_set = pipeline::sample_set(data, data.validation_ids, c.window, window::Role::validation);
    spdlog::info("{} training and {} validation samples", train_set.samples.size(), val_set.samples.size());
    const auto result = train::train(train_set, val_set, c.model, c.train, c.train.seed);
    if (result.history.epochs.empty()) throw std::runtime_error("training produced no finite epoch: " + result.diagnostic);

    const fs::path out = o.out;
    fs::create_directories(out);
    Checkpoint ck{result.params, data.scaler, data.spec, c.window, result.history, c.train.seed,
                  result.history.best_epoch};
    save_checkpoint(ck, out / "model.ckpt");
    train::write_history_csv(out / "history.csv", result.history);
    man.output(out / "model.ckpt");
    man.output(out / "history.csv");
    man.write(out);
    if (result.diverged) {
        spdlog::error("training diverged: {}; saved the best finite parameters", result.diagnostic);
        return 2;
    }
    return 0;
}

struct Loaded {
    Checkpoint ck;
    predict::TrainedModel model;
    pipeline::Dataset data;
};

Loaded load_model_and_data(const Options& o, Manifest& man)
{
    const auto ckpt = require_file(o.checkpoint, "--checkpoint");
    const auto data_dir = require_dir(o.data, "--data");
    man.input(ckpt);
    man.input(data_dir);
    Loaded l{load_checkpoint(ckpt), {}, pipeline::read_dataset(data_dir)};
    l.model = predict::TrainedModel::from_checkpoint(l.ck);
    if (!(l.data.spec == l.ck.grid_spec)) throw InvariantError("grid spec in --data differs from the checkpoint");
    return l;
}

int cmd_evaluate(const Options& o)
{
    const auto c = resolve_config(o);
    Manifest man("evaluate", c, c.train.seed);
    const auto l = load_model_and_data(o, man);
    const auto horizons = parse_horizons(o.horizons);
    const auto grids = pipeline::eval_grids(l.data, l.data.validation_ids);
    const auto report = predict::evaluate(l.model, l.model.scaler, grids, horizons);
    const auto base = predict::evaluate_persistence(l.model, grids, horizons);
    const fs::path out = o.out;
    io::write_metrics_csv(out / "metrics.csv", report);
    io::write_metrics_csv(out / "persistence_metrics.csv", base);
    man.output(out / "metrics.csv");
    man.output(out / "persistence_metrics.csv");
    for (const auto& r : report.rows)
        spdlog::info("{} {:3d} min  RMSE {:7.2f} s  R2 {:6.3f}  (persistence RMSE {:7.2f} s)", to_string(r.direction),
                     r.horizon_minutes, r.rmse, r.r_squared, base.at(r.direction, r.horizon_minutes).rmse);
    man.write(out);
    return 0;
}

const grid::HeadwayGrid& pick_grid(const Loaded& l, int replication)
{
    const auto it = l.data.grids.find(replication);
    if (it == l.data.grids.end()) throw InvariantError(fmt::format("--replication {} not found in --data", replication));
    return it->second;
}

Tensor<float> normalized_window(const Loaded& l, const grid::HeadwayGrid& g, int anchor)
{
    const int L = l.model.dims().lookback;
    if (anchor < L || anchor > g.spec.n_time_bins())
        throw InvariantError(fmt::format("--anchor {} outside [{}, {}]", anchor, L, g.spec.n_time_bins()));
    auto x = window::slice_frames(g, anchor - L, L);
    for (auto& v : x.data) v = static_cast<float>(l.model.scaler.normalize(v));
    return x;
}

// Ground-truth terminal headways from `anchor`, padded with the last available value.
std::vector<double> actual_terminal(const Loaded& l, const grid::HeadwayGrid& g, Direction d, int anchor,
                                    std::size_t bins)
{
    const int k = static_cast<int>(index(d));
    const int j = l.model.window_spec.terminal_bin(k);
    std::vector<double> out;
    double last = g.at(anchor - 1, j, k);
    for (std::size_t i = 0; i < bins; ++i) {
        const int t = anchor + static_cast<int>(i);
        if (t < g.spec.n_time_bins()) last = g.at(t, j, k);
        out.push_back(last);
    }
    return out;
}

std::vector<io::HeatmapSection> context_sections(const Loaded& l, const grid::HeadwayGrid& g, int anchor, int bins)
{
    const int L = l.model.dims().lookback;
    std::vector<io::HeatmapSection> s;
    auto observed = [&](int begin, int count) {
        const auto first = g.offset(begin, 0, 0);
        const auto n = static_cast<std::size_t>(count) * static_cast<std::size_t>(g.spec.n_distance_bins * 2);
        return std::vector<std::uint8_t>(g.observed.begin() + static_cast<std::ptrdiff_t>(first),
                                         g.observed.begin() + static_cast<std::ptrdiff_t>(first + n));
    };
    s.push_back({"history", anchor - L, window::slice_frames(g, anchor - L, L), observed(anchor - L, L)});
    const int ahead = std::min(bins, g.spec.n_time_bins() - anchor);
    if (ahead > 0) s.push_back({"actual", anchor, window::slice_frames(g, anchor, ahead), observed(anchor, ahead)});
    return s;
}

int cmd_predict(const Options& o)
{
    const auto c = resolve_config(o);
    Manifest man("predict", c, c.train.seed);
    const auto l = load_model_and_data(o, man);
    const auto& g = pick_grid(l, o.replication);
    if (o.rounds < 1) throw InvariantError("--rounds must be at least 1");
    const auto bins = static_cast<std::size_t>(o.rounds * l.model.dims().horizon);
    std::array<std::vector<double>, 2> plans{actual_terminal(l, g, Direction::NB, o.anchor, bins),
                                             actual_terminal(l, g, Direction::SB, o.anchor, bins)};
    for (const auto& file : o.plans) {
        const auto p = io::read_plan(require_file(file, "--plan"));
        whatif::validate_plan(p, c.whatif.min_safe_headway);
        if (p.headways.size() != bins)
            throw InvariantError(fmt::format("{}: plan has {} entries, {} needed", file, p.headways.size(), bins));
        plans[index(p.direction)] = p.headways;
        man.input(file);
    }
    const auto x = normalized_window(l, g, o.anchor);
    const auto r = predict::predict_recursive(l.model, l.model.scaler, x,
                                              predict::plan_tensor(plans[0], plans[1], l.model.scaler), o.rounds);
    auto sections = context_sections(l, g, o.anchor, static_cast<int>(bins));
    sections.push_back({"predicted", o.anchor, r.y_hat, {}});
    const fs::path out = o.out;
    for (Direction d : {Direction::NB, Direction::SB}) {
        const auto path = out / fmt::format("heatmap_{}.csv", to_string(d));
        io::write_heatmap_csv(path, d, sections);
        man.output(path);
    }
    man.write(out);
    return 0;
}

int cmd_whatif(const Options& o)
{
    const auto c = resolve_config(o);
    Manifest man("whatif", c, c.train.seed);
    const auto l = load_model_and_data(o, man);
    const auto& g = pick_grid(l, o.replication);
    if (o.plans.empty()) throw InvariantError("at least one --plan is required");
    std::vector<whatif::TerminalPlan> plans;
    for (const auto& file : o.plans) {
        plans.push_back(io::read_plan(require_file(file, "--plan")));
        man.input(file);
    }
    whatif::PlanContext ctx;
    ctx.x_window = normalized_window(l, g, o.anchor);
    ctx.anchor_time_bin = o.anchor;
    const auto len = plans.front().headways.size();
    for (Direction d : {Direction::NB, Direction::SB})
        ctx.baseline_terminal[index(d)] = actual_terminal(l, g, d, o.anchor, len);
    const auto report = whatif::compare_plans(l.model, l.model.scaler, ctx, plans, o.baseline, c.whatif.min_safe_headway);

    const fs::path out = o.out;
    std::vector<std::vector<std::string>> files;
    const auto base_sections = context_sections(l, g, o.anchor, static_cast<int>(len));
    for (std::size_t i = 0; i < report.plans.size(); ++i) {
        auto sections = base_sections;
        sections.push_back({"predicted", o.anchor, report.plans[i].predicted, {}});
        std::vector<std::string> names;
        for (Direction d : {Direction::NB, Direction::SB}) {
            const auto name = fmt::format("whatif_plan{}_{}.csv", i, to_string(d));
            io::write_heatmap_csv(out / name, d, sections);
            names.push_back(name);
            man.output(out / name);
        }
        files.push_back(names);
    }
    auto j = io::report_to_json(report, files);
    j["replication"] = o.replication;
    j["anchor_time_bin"] = o.anchor;
    io::write_text_atomic(out / "whatif_report.json", j.dump(2) + "\n");
    man.output(out / "whatif_report.json");
    man.write(out);
    return 0;
}

int cmd_serve(const Options& o)
{
    const auto c = resolve_config(o);
    const auto ckpt = require_file(o.checkpoint, "--checkpoint");
    const auto data_dir = require_dir(o.data, "--data");
    Manifest man("serve", c, c.train.seed);
    man.input(ckpt);
    man.input(data_dir);
    man.write(o.out);
    service::Server server(service::load_session(ckpt, data_dir, c.whatif.min_safe_headway));
    spdlog::info("serving on http://{}:{}", o.host, o.port);
    if (!server.listen(o.host, o.port)) throw std::runtime_error(fmt::format("cannot listen on port {}", o.port));
    return 0;
}

int cmd_export_scatter(const Options& o)
{
    const auto c = resolve_config(o);
    Manifest man("export-scatter", c, c.train.seed);
    const auto l = load_model_and_data(o, man);
    int bin = 0;
    if (o.distance_bin) {
        bin = *o.distance_bin;
    } else if (o.distance_ft) {
        bin = grid::distance_bin(*o.distance_ft, l.model.grid_spec);
    } else {
        throw InvariantError("--distance-bin or --distance-ft is required");
    }
    const auto horizons = parse_horizons(o.horizons);
    const auto grids = pipeline::eval_grids(l.data, l.data.validation_ids);
    const auto scatter = predict::station_scatter(l.model, l.model.scaler, grids, bin, horizons);
    const fs::path out = o.out;
    io::write_scatter_csv(out / "scatter.csv", scatter);
    man.output(out / "scatter.csv");
    for (const auto& m : scatter.summary)
        spdlog::info("bin {} {} {:3d} min  RMSE {:7.2f} s", bin, to_string(m.direction), m.horizon_minutes, m.rmse);
    man.write(out);
    return 0;
}

void configure_logging()
{
    const char* env = std::getenv("HEADWAY_LAB_LOG");
    const std::string level = env ? env : "info";
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::set_level(spdlog::level::info);
    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
}

}  // namespace

int main(int argc, char** argv)
{
    configure_logging();
    CLI::App app{"Headway prediction workbench"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Options o;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Seed override");
        sub->add_option("--out", o.out, "Output directory");
    };
    const auto add_model = [&](CLI::App* sub) {
        sub->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
        sub->add_option("--data", o.data, "Preprocessed data directory")->required();
    };

    auto* simulate = app.add_subcommand("simulate", "Simulate replications to trajectory CSVs");
    add_common(simulate);
    simulate->add_option("--replications", o.replications, "Number of replications")->check(CLI::PositiveNumber);

    auto* preprocess = app.add_subcommand("preprocess", "Trajectory CSVs to grid files, split and scaler");
    add_common(preprocess);
    preprocess->add_option("--in", o.input, "Directory with trajectory CSVs")->required();

    auto* train_cmd = app.add_subcommand("train", "Train on preprocessed grids");
    add_common(train_cmd);
    train_cmd->add_option("--data", o.data, "Preprocessed data directory")->required();
    train_cmd->add_option("--epochs", o.epochs, "Epoch override")->check(CLI::PositiveNumber);

    auto* evaluate = app.add_subcommand("evaluate", "Metrics on the validation replications");
    add_common(evaluate);
    add_model(evaluate);
    evaluate->add_option("--horizons", o.horizons, "Comma-separated horizons in minutes");

    auto* predict_cmd = app.add_subcommand("predict", "Heatmap CSVs for one window");
    add_common(predict_cmd);
    add_model(predict_cmd);
    predict_cmd->add_option("--replication", o.replication, "Replication id")->required();
    predict_cmd->add_option("--anchor", o.anchor, "First predicted time bin")->required();
    predict_cmd->add_option("--rounds", o.rounds, "Recursive rounds");
    predict_cmd->add_option("--plan", o.plans, "Terminal plan JSON overriding ground truth");

    auto* whatif_cmd = app.add_subcommand("whatif", "Compare terminal plans");
    add_common(whatif_cmd);
    add_model(whatif_cmd);
    whatif_cmd->add_option("--replication", o.replication, "Replication id")->required();
    whatif_cmd->add_option("--anchor", o.anchor, "First predicted time bin")->required();
    whatif_cmd->add_option("--plan", o.plans, "Plan JSON files")->required();
    whatif_cmd->add_option("--baseline", o.baseline, "Index of the baseline plan");

    auto* serve = app.add_subcommand("serve", "Start the HTTP service");
    add_common(serve);
    add_model(serve);
    serve->add_option("--port", o.port, "Port")->check(CLI::Range(1, 65535));
    serve->add_option("--host", o.host, "Bind address");

    auto* scatter = app.add_subcommand("export-scatter", "Actual vs predicted pairs at one distance bin");
    add_common(scatter);
    add_model(scatter);
    scatter->add_option("--horizons", o.horizons, "Comma-separated horizons in minutes");
    auto* bin_opt = scatter->add_option("--distance-bin", o.distance_bin, "Distance bin");
    scatter->add_option("--distance-ft", o.distance_ft, "Direction-relative distance in feet")->excludes(bin_opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) return cmd_simulate(o);
        if (*preprocess) return cmd_preprocess(o);
        if (*train_cmd) return cmd_train(o);
        if (*evaluate) return cmd_evaluate(o);
        if (*predict_cmd) return cmd_predict(o);
        if (*whatif_cmd) return cmd_whatif(o);
        if (*serve) return cmd_serve(o);
        if (*scatter) return cmd_export_scatter(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
