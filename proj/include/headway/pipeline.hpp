#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "headway/grid.hpp"
#include "headway/predictor.hpp"
#include "headway/sim.hpp"
#include "headway/window.hpp"

namespace headway::pipeline {

/// Preprocessed replications with their train/validation split. Grids are in
/// seconds; the scaler is fitted on the training replications only.
struct Dataset {
    grid::GridSpec spec;
    std::map<int, grid::HeadwayGrid> grids;
    std::map<int, grid::ImputationReport> imputation;
    std::vector<int> train_ids;
    std::vector<int> validation_ids;
    grid::Scaler scaler;
};

Dataset build_dataset(std::span<const sim::TrajectoryLog> logs, const grid::GridSpec& spec,
                      double validation_fraction, std::uint64_t split_seed);

/// Normalized samples for the given replications.
window::SampleSet sample_set(const Dataset& data, std::span<const int> ids, const window::WindowSpec& spec,
                             window::Role role);

std::vector<predict::EvalGrid> eval_grids(const Dataset& data, std::span<const int> ids);

/// Grid files per replication plus `split.json` (ids and scaler).
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace headway::pipeline
