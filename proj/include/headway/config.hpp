#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "headway/grid.hpp"
#include "headway/nn/params.hpp"
#include "headway/sim.hpp"
#include "headway/trainer.hpp"
#include "headway/window.hpp"

namespace headway {

/// Dataset generation knobs that sit outside the line geometry.
struct ExperimentConfig {
    int replications = 50;
    double even_headway = 300.0;
    double validation_fraction = 0.2;
    std::uint64_t seed = 1;
};

struct WhatIfConfig {
    double min_safe_headway = 120.0;
};

/// Everything a command may read from `--config`. Sections absent from the
/// file keep their defaults.
struct AppConfig {
    sim::LineConfig line = sim::LineConfig::default_line();
    grid::GridSpec grid;
    window::WindowSpec window;
    nn::ModelDims model;
    train::TrainConfig train;
    WhatIfConfig whatif;
    ExperimentConfig experiment;

    /// Keeps model lookback/horizon and the window spec in step.
    void sync_window();
    void validate() const;
};

/// Parses a config file. Unknown keys and wrong types raise InvariantError
/// naming the file and the field path.
AppConfig load_config(const std::filesystem::path& path);
AppConfig config_from_json(const nlohmann::json& j, const std::string& origin = "<config>");
nlohmann::json config_to_json(const AppConfig& c);

namespace sim {
void to_json(nlohmann::json& j, const LineConfig& c);
void from_json(const nlohmann::json& j, LineConfig& c);
}  // namespace sim
namespace grid {
void to_json(nlohmann::json& j, const GridSpec& s);
void from_json(const nlohmann::json& j, GridSpec& s);
void to_json(nlohmann::json& j, const Scaler& s);
void from_json(const nlohmann::json& j, Scaler& s);
}  // namespace grid
namespace window {
void to_json(nlohmann::json& j, const WindowSpec& s);
void from_json(const nlohmann::json& j, WindowSpec& s);
}  // namespace window
namespace nn {
void to_json(nlohmann::json& j, const ModelDims& d);
void from_json(const nlohmann::json& j, ModelDims& d);
}  // namespace nn
namespace train {
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const TrainHistory& h);
void from_json(const nlohmann::json& j, TrainHistory& h);
}  // namespace train
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
void to_json(nlohmann::json& j, const WhatIfConfig& c);
void from_json(const nlohmann::json& j, WhatIfConfig& c);

}  // namespace headway
