#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "headway/nn/batch.hpp"
#include "headway/nn/params.hpp"
#include "headway/window.hpp"

namespace headway::train {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 0.001;
    int patience = 50;
    std::uint64_t seed = 0;
    // An epoch counts as an improvement only if val loss drops by at least this much.
    double min_improvement = 1e-6;
    // Stop as soon as an epoch's validation loss falls below this value.
    std::optional<double> target_val_loss;
    nn::Execution execution = nn::Execution::parallel;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    bool stopped_early = false;

    bool operator==(const TrainHistory& o) const;
};

struct TrainResult {
    nn::ModelParams<float> params;  // parameters of best_epoch
    TrainHistory history;
    bool diverged = false;
    std::string diagnostic;
};

using ProgressFn = std::function<void(const EpochRecord&)>;

/// Sample order for one epoch; a pure function of (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

/// Model dims implied by a sample's tensor shapes plus the given filters/kernel.
nn::ModelDims dims_from_sample(const window::Sample& s, int filters, int kernel);

/// Mini-batch Adam on MSE with per-epoch validation and early stopping.
/// Throws InvariantError on empty sets, ShapeError on heterogeneous shapes.
TrainResult train(const window::SampleSet& train_set, const window::SampleSet& val_set, const nn::ModelDims& dims,
                  const TrainConfig& config, std::uint64_t init_seed, const ProgressFn& progress = {});

/// CSV with header `epoch,train_loss,val_loss`.
void write_history_csv(const std::filesystem::path& path, const TrainHistory& history);

}  // namespace headway::train
