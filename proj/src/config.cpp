#include "headway/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

namespace headway {

using nlohmann::json;

namespace {

// Reads fields from one JSON object, remembering which keys were consumed so
// leftovers can be reported as unknown.
class Fields {
public:
    explicit Fields(const json& j) : j_(j)
    {
        if (!j.is_object()) throw InvariantError("expected an object");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            j_.at(key).get_to(out);
        } catch (const json::exception& e) {
            throw InvariantError(fmt::format("{}: {}", key, e.what()));
        } catch (const InvariantError& e) {
            throw InvariantError(fmt::format("{}.{}", key, e.what()));
        }
    }

    template <class T>
    void get(const char* key, std::optional<T>& out)
    {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        if (j_.at(key).is_null()) {
            out.reset();
            return;
        }
        T v{};
        get(key, v);
        out = v;
    }

    void mark(const char* key) { seen_.insert(key); }

    void finish() const
    {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) throw InvariantError(fmt::format("{}: unknown field", item.key()));
    }

private:
    const json& j_;
    std::set<std::string> seen_;
};

}  // namespace

namespace sim {
void to_json(json& j, const LineConfig& c)
{
    j = json{{"line_length_ft", c.line_length},
             {"block_length_ft", c.block_length},
             {"station_positions_ft", c.station_positions},
             {"terminal_nb_position_ft", c.terminal_nb_position},
             {"terminal_sb_position_ft", c.terminal_sb_position},
             {"short_turn_position_ft", c.short_turn_position ? json(*c.short_turn_position) : json(nullptr)},
             {"short_turn_fraction", c.short_turn_fraction},
             {"turnback_time_s", c.turnback_time},
             {"min_separation_s", c.min_separation},
             {"dwell_mean_s", c.dwell_mean},
             {"dwell_sd_s", c.dwell_sd},
             {"dwell_min_s", c.dwell_min},
             {"run_speed_mean_fps", c.run_speed_mean},
             {"run_speed_sd_fps", c.run_speed_sd},
             {"speed_floor_fps", c.speed_floor},
             {"demand_variation", c.demand_variation},
             {"incident_probability", c.incident_probability},
             {"incident_delay_mean_s", c.incident_delay_mean},
             {"dispatch_jitter_s", c.dispatch_jitter},
             {"service_start_s", c.service_start},
             {"service_end_s", c.service_end}};
}
void from_json(const json& j, LineConfig& c)
{
    Fields f(j);
    f.get("line_length_ft", c.line_length);
    f.get("block_length_ft", c.block_length);
    f.get("station_positions_ft", c.station_positions);
    f.get("terminal_nb_position_ft", c.terminal_nb_position);
    f.get("terminal_sb_position_ft", c.terminal_sb_position);
    f.get("short_turn_position_ft", c.short_turn_position);
    f.get("short_turn_fraction", c.short_turn_fraction);
    f.get("turnback_time_s", c.turnback_time);
    f.get("min_separation_s", c.min_separation);
    f.get("dwell_mean_s", c.dwell_mean);
    f.get("dwell_sd_s", c.dwell_sd);
    f.get("dwell_min_s", c.dwell_min);
    f.get("run_speed_mean_fps", c.run_speed_mean);
    f.get("run_speed_sd_fps", c.run_speed_sd);
    f.get("speed_floor_fps", c.speed_floor);
    f.get("demand_variation", c.demand_variation);
    f.get("incident_probability", c.incident_probability);
    f.get("incident_delay_mean_s", c.incident_delay_mean);
    f.get("dispatch_jitter_s", c.dispatch_jitter);
    f.get("service_start_s", c.service_start);
    f.get("service_end_s", c.service_end);
    f.finish();
}
}  // namespace sim

namespace grid {
void to_json(json& j, const GridSpec& s)
{
    j = json{{"t_start_s", s.t_start},       {"t_end_s", s.t_end}, {"delta_t_s", s.delta_t},
             {"n_distance_bins", s.n_distance_bins}, {"d_min_ft", s.d_min}, {"d_max_ft", s.d_max},
             {"n_directions", s.n_directions}};
}
void from_json(const json& j, GridSpec& s)
{
    Fields f(j);
    f.get("t_start_s", s.t_start);
    f.get("t_end_s", s.t_end);
    f.get("delta_t_s", s.delta_t);
    f.get("n_distance_bins", s.n_distance_bins);
    f.get("d_min_ft", s.d_min);
    f.get("d_max_ft", s.d_max);
    f.get("n_directions", s.n_directions);
    f.finish();
}
void to_json(json& j, const Scaler& s)
{
    j = json{{"h_min_s", s.h_min}, {"h_max_s", s.h_max}, {"digest", s.digest()}};
}
void from_json(const json& j, Scaler& s)
{
    Fields f(j);
    f.get("h_min_s", s.h_min);
    f.get("h_max_s", s.h_max);
    std::string digest;
    f.get("digest", digest);
    f.finish();
    if (!digest.empty() && digest != s.digest())
        throw InvariantError(fmt::format("scaler digest {} does not match its values ({})", digest, s.digest()));
}
}  // namespace grid

namespace window {
void to_json(json& j, const WindowSpec& s)
{
    j = json{{"lookback", s.lookback},
             {"horizon", s.horizon},
             {"terminal_bin_nb", s.terminal_bin_nb},
             {"terminal_bin_sb", s.terminal_bin_sb}};
}
void from_json(const json& j, WindowSpec& s)
{
    Fields f(j);
    f.get("lookback", s.lookback);
    f.get("horizon", s.horizon);
    f.get("terminal_bin_nb", s.terminal_bin_nb);
    f.get("terminal_bin_sb", s.terminal_bin_sb);
    f.finish();
}
}  // namespace window

namespace nn {
void to_json(json& j, const ModelDims& d)
{
    j = json{{"n_distance", d.n_distance}, {"n_directions", d.n_directions}, {"filters", d.filters},
             {"kernel", d.kernel},         {"lookback", d.lookback},         {"horizon", d.horizon}};
}
void from_json(const json& j, ModelDims& d)
{
    Fields f(j);
    f.get("n_distance", d.n_distance);
    f.get("n_directions", d.n_directions);
    f.get("filters", d.filters);
    f.get("kernel", d.kernel);
    f.get("lookback", d.lookback);
    f.get("horizon", d.horizon);
    f.finish();
}
}  // namespace nn

namespace train {
void to_json(json& j, const TrainConfig& c)
{
    j = json{{"epochs", c.epochs},
             {"batch_size", c.batch_size},
             {"learning_rate", c.learning_rate},
             {"patience", c.patience},
             {"seed", c.seed},
             {"min_improvement", c.min_improvement}};
}
void from_json(const json& j, TrainConfig& c)
{
    Fields f(j);
    f.get("epochs", c.epochs);
    f.get("batch_size", c.batch_size);
    f.get("learning_rate", c.learning_rate);
    f.get("patience", c.patience);
    f.get("seed", c.seed);
    f.get("min_improvement", c.min_improvement);
    f.finish();
}
void to_json(json& j, const TrainHistory& h)
{
    json rows = json::array();
    for (const auto& e : h.epochs) rows.push_back({e.epoch, e.train_loss, e.val_loss});
    j = json{{"epochs", rows}, {"best_epoch", h.best_epoch}, {"stopped_early", h.stopped_early}};
}
void from_json(const json& j, TrainHistory& h)
{
    h = {};
    for (const auto& r : j.at("epochs"))
        h.epochs.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>()});
    h.best_epoch = j.at("best_epoch").get<int>();
    h.stopped_early = j.at("stopped_early").get<bool>();
}
}  // namespace train

void to_json(json& j, const ExperimentConfig& c)
{
    j = json{{"replications", c.replications},
             {"even_headway_s", c.even_headway},
             {"validation_fraction", c.validation_fraction},
             {"seed", c.seed}};
}
void from_json(const json& j, ExperimentConfig& c)
{
    Fields f(j);
    f.get("replications", c.replications);
    f.get("even_headway_s", c.even_headway);
    f.get("validation_fraction", c.validation_fraction);
    f.get("seed", c.seed);
    f.finish();
}
void to_json(json& j, const WhatIfConfig& c) { j = json{{"min_safe_headway_s", c.min_safe_headway}}; }
void from_json(const json& j, WhatIfConfig& c)
{
    Fields f(j);
    f.get("min_safe_headway_s", c.min_safe_headway);
    f.finish();
}

void AppConfig::sync_window()
{
    window.lookback = model.lookback;
    window.horizon = model.horizon;
    model.n_distance = grid.n_distance_bins;
}

void AppConfig::validate() const
{
    line.validate();
    grid.validate();
    window.validate(grid.n_distance_bins);
    model.validate();
    train.validate();
    if (model.lookback != window.lookback || model.horizon != window.horizon)
        throw InvariantError("model lookback/horizon must match the window spec");
    if (model.n_distance != grid.n_distance_bins)
        throw InvariantError("model n_distance must match grid n_distance_bins");
    if (!(whatif.min_safe_headway > 0.0)) throw InvariantError("whatif.min_safe_headway_s must be positive");
    if (experiment.replications < 1) throw InvariantError("experiment.replications must be positive");
    if (!(experiment.validation_fraction > 0.0 && experiment.validation_fraction < 1.0))
        throw InvariantError("experiment.validation_fraction must be in (0, 1)");
}

AppConfig config_from_json(const json& j, const std::string& origin)
{
    AppConfig c;
    try {
        Fields f(j);
        f.get("line", c.line);
        f.get("grid", c.grid);
        f.get("model", c.model);
        f.get("train", c.train);
        f.get("whatif", c.whatif);
        f.get("experiment", c.experiment);
        // Only terminal bins are configurable; lookback/horizon come from the model section.
        if (j.contains("window")) {
            Fields w(j.at("window"));
            w.get("terminal_bin_nb", c.window.terminal_bin_nb);
            w.get("terminal_bin_sb", c.window.terminal_bin_sb);
            w.finish();
        }
        f.mark("window");
        f.finish();
    } catch (const InvariantError& e) {
        throw InvariantError(fmt::format("{}: {}", origin, e.what()));
    }
    c.sync_window();
    try {
        c.validate();
    } catch (const InvariantError& e) {
        throw InvariantError(fmt::format("{}: {}", origin, e.what()));
    }
    return c;
}

json config_to_json(const AppConfig& c)
{
    return json{{"line", c.line},
                {"grid", c.grid},
                {"window", {{"terminal_bin_nb", c.window.terminal_bin_nb}, {"terminal_bin_sb", c.window.terminal_bin_sb}}},
                {"model", c.model},
                {"train", c.train},
                {"whatif", c.whatif},
                {"experiment", c.experiment}};
}

AppConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvariantError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return config_from_json(j, path.string());
}

}  // namespace headway
