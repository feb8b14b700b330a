#pragma once

#include <chrono>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "headway/grid.hpp"
#include "headway/predictor.hpp"
#include "headway/sim.hpp"
#include "headway/whatif.hpp"

namespace headway::io {

namespace fs = std::filesystem;

// Trajectories: `replication_id,train_id,direction,block_id,distance_ft,timestamp_s,headway_s`
// with an empty headway for first activations. Numbers use shortest round-trip formatting.
void write_trajectory_csv(const fs::path& path, std::span<const sim::TrajectoryLog> logs);
std::vector<sim::TrajectoryLog> read_trajectory_csv(const fs::path& path);
fs::path trajectory_file(const fs::path& dir, int replication_id);

// Grids: one CSV per (replication, direction) with `time_bin,distance_bin,headway_s,observed`
// plus a JSON sidecar holding the spec, the scaler and the imputation report.
struct GridFile {
    int replication_id = 0;
    grid::HeadwayGrid grid;  // seconds
    grid::ImputationReport imputation;
    grid::Scaler scaler;
};
void write_grid_files(const fs::path& dir, const GridFile& file);
GridFile read_grid_files(const fs::path& dir, int replication_id);
std::vector<int> list_grid_replications(const fs::path& dir);
fs::path grid_csv(const fs::path& dir, int replication_id, Direction d);
fs::path grid_sidecar(const fs::path& dir, int replication_id);

/// `direction,horizon_min,rmse_s,r2,n`
void write_metrics_csv(const fs::path& path, const predict::MetricsReport& report);
/// `direction,horizon_min,actual_s,predicted_s`
void write_scatter_csv(const fs::path& path, const predict::ScatterResult& scatter);

struct HeatmapSection {
    std::string source;  // history, actual or predicted
    int first_time_bin = 0;
    Tensor<float> values;  // seconds [n, N_d, N_dir, 1]
    std::vector<std::uint8_t> observed;  // optional, same layout as values
};
/// Grid-file layout with an extra `source` column, one direction per file.
void write_heatmap_csv(const fs::path& path, Direction d, std::span<const HeatmapSection> sections);

nlohmann::json plan_to_json(const whatif::TerminalPlan& plan);
whatif::TerminalPlan plan_from_json(const nlohmann::json& j);
whatif::TerminalPlan read_plan(const fs::path& path);

/// Per-plan CV/mean tables; `heatmap_files` names each plan's CSVs when given.
nlohmann::json report_to_json(const whatif::ComparisonReport& report,
                              const std::vector<std::vector<std::string>>& heatmap_files = {});

/// Nested [n][N_d][N_dir] array of a [n, N_d, N_dir, 1] tensor.
nlohmann::json grid_to_json(const Tensor<float>& t);

struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::uint64_t seed = 0;
    std::string tool_version;
    double duration_s = 0.0;
};
/// Writes `manifest_<command>.json` into `dir` via a temporary file and rename.
fs::path write_manifest(const fs::path& dir, const RunManifest& m);

/// Write `text` to `path` atomically (temporary file + rename).
void write_text_atomic(const fs::path& path, const std::string& text);

}  // namespace headway::io
