#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "headway/checkpoint.hpp"
#include "headway/grid.hpp"
#include "headway/nn/params.hpp"
#include "headway/tensor.hpp"
#include "headway/window.hpp"

namespace headway::predict {

/// Parameters together with the scaler and specs they were trained with.
struct TrainedModel {
    nn::ModelParams<float> params;
    grid::Scaler scaler;
    grid::GridSpec grid_spec;
    window::WindowSpec window_spec;

    static TrainedModel from_checkpoint(const Checkpoint& ck);
    const nn::ModelDims& dims() const { return params.dims; }
    double minutes_per_bin() const { return grid_spec.delta_t / 60.0; }
};

struct PredictionResult {
    Tensor<float> y_hat;             // seconds, [n_bins, N_d, N_dir, 1]
    Tensor<float> y_hat_normalized;  // same values in scaler units
    int horizon_minutes = 0;
    int anchor_time_bin = -1;
};

/// Called before each recursive round with the normalized window and plan slice it is fed.
using RoundHook = std::function<void(int round, const Tensor<float>& window, const Tensor<float>& plan)>;

/// One forward pass. `x_window` [L, N_d, N_dir, 1] and `plan` [F, N_dir, 1] are
/// normalized with `scaler`, which must be the model's own (digest check).
PredictionResult predict_single(const TrainedModel& model, const grid::Scaler& scaler, const Tensor<float>& x_window,
                                const Tensor<float>& plan);

/// n_rounds chained forward passes. Each round's window drops the oldest F
/// bins and appends the previous round's normalized output; `plan` must hold
/// at least n_rounds * F bins.
PredictionResult predict_recursive(const TrainedModel& model, const grid::Scaler& scaler,
                                   const Tensor<float>& x_window, const Tensor<float>& plan, int n_rounds,
                                   const RoundHook& hook = {});

/// Terminal plan tensor [n, N_dir, 1] in normalized units from per-direction seconds.
Tensor<float> plan_tensor(const std::vector<double>& nb_s, const std::vector<double>& sb_s, const grid::Scaler& s);

struct Metric {
    Direction direction = Direction::NB;
    int horizon_minutes = 0;
    double rmse = 0.0;  // seconds
    double r_squared = 0.0;
    std::size_t n = 0;
};

struct BinMetric {
    Metric metric;
    int distance_bin = 0;
};

struct MetricsReport {
    std::vector<Metric> rows;         // ordered by direction, then horizon
    std::vector<BinMetric> per_bin;   // filled when requested
    std::size_t anchors = 0;

    const Metric& at(Direction d, int horizon_minutes) const;
};

/// Pooled RMSE and R^2 = 1 - SS_res / SS_tot. R^2 is NaN when the actual
/// values are constant.
Metric rmse_r2(std::span<const double> actual, std::span<const double> predicted);

/// A replication's grid in seconds (imputed, not normalized).
struct EvalGrid {
    int replication_id = 0;
    const grid::HeadwayGrid* grid = nullptr;
};

struct EvalOptions {
    std::optional<int> distance_bin;  // restrict scoring to one bin
    bool per_bin = false;
    // Anchor stride in time bins; 1 uses every anchor.
    int anchor_stride = 1;
};

/// Scores recursive predictions fed with ground-truth terminal plans. The
/// metric for horizon h pools the cells of the forecast round ending at h.
/// All horizons share the anchors that support the longest one. Horizons
/// must be multiples of F * delta_t minutes.
MetricsReport evaluate(const TrainedModel& model, const grid::Scaler& scaler, std::span<const EvalGrid> grids,
                       std::span<const int> horizons, const EvalOptions& options = {});

/// Same anchors and cells as evaluate, predicting each round by repeating
/// the last observed frame.
MetricsReport evaluate_persistence(const TrainedModel& model, std::span<const EvalGrid> grids,
                                   std::span<const int> horizons, const EvalOptions& options = {});

struct ScatterPoint {
    Direction direction = Direction::NB;
    int horizon_minutes = 0;
    double actual = 0.0;
    double predicted = 0.0;
};

struct ScatterResult {
    int distance_bin = 0;
    std::vector<ScatterPoint> points;
    std::vector<Metric> summary;
};

/// Actual/predicted pairs for one distance bin, plus per-direction RMSE.
ScatterResult station_scatter(const TrainedModel& model, const grid::Scaler& scaler, std::span<const EvalGrid> grids,
                              int distance_bin, std::span<const int> horizons);

}  // namespace headway::predict
