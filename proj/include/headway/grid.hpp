#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "headway/common.hpp"
#include "headway/sim.hpp"

namespace headway::grid {

/// Discretization of the time x distance x direction plane. Distances are
/// direction-relative: bin 0 is the departure terminal of that direction.
struct GridSpec {
    double t_start = 55800.0;  // 15:30
    double t_end = 64800.0;    // 18:00
    double delta_t = 60.0;
    int n_distance_bins = 64;
    double d_min = 0.0;
    double d_max = 140800.0;
    int n_directions = static_cast<int>(kNumDirections);

    void validate() const;
    int n_time_bins() const;
    std::size_t cell_count() const;
    bool operator==(const GridSpec&) const = default;
};

/// floor((t - t_start) / delta_t) for t in [t_start, t_end); throws std::out_of_range otherwise.
int time_bin(double t, const GridSpec& spec);

/// floor((d - d_min) / bin_width) for d in [d_min, d_max], with d_max clamped
/// into the last bin; throws std::out_of_range otherwise.
int distance_bin(double d, const GridSpec& spec);

/// Fills each event's headway with the gap to the previous activation of the
/// same (block, direction) by a different train. The first activation of a
/// block stays null.
sim::TrajectoryLog compute_headways(sim::TrajectoryLog log);

/// Dense H(t, j, k) with layout [time][distance][direction].
struct HeadwayGrid {
    GridSpec spec;
    std::vector<double> values;
    std::vector<std::uint8_t> observed;
    bool normalized = false;

    HeadwayGrid() = default;
    explicit HeadwayGrid(const GridSpec& s);

    std::size_t offset(int t, int j, int k) const
    {
        return (static_cast<std::size_t>(t) * static_cast<std::size_t>(spec.n_distance_bins) +
                static_cast<std::size_t>(j)) * static_cast<std::size_t>(spec.n_directions) +
               static_cast<std::size_t>(k);
    }
    double& at(int t, int j, int k) { return values[offset(t, j, k)]; }
    double at(int t, int j, int k) const { return values[offset(t, j, k)]; }
    bool is_observed(int t, int j, int k) const { return observed[offset(t, j, k)] != 0; }
};

/// Placeholder for cells with no observation before imputation. Never serialized.
bool is_unobserved_sentinel(double v);

struct RejectedEvent {
    std::size_t event_index;
    std::string reason;
};

struct RasterResult {
    HeadwayGrid grid;
    std::vector<RejectedEvent> rejected;
};

/// Mean headway per cell. Events without a headway or outside the spec's
/// window are reported in `rejected` and do not contribute.
RasterResult rasterize(std::span<const sim::TrajectoryEvent> events, const GridSpec& spec);

struct ImputationReport {
    // (distance bin, direction) columns with no observation at all.
    std::vector<std::pair<int, int>> filled_with_grid_mean;
    double grid_mean = 0.0;
};

/// Forward-fills each (distance, direction) column in time, back-fills the
/// leading gap from the first observation and gives fully empty columns the
/// grid-wide observed mean. Throws InvariantError("no observations") for an
/// empty grid.
HeadwayGrid impute_missing(HeadwayGrid grid, ImputationReport* report = nullptr);

struct Scaler {
    double h_min = 0.0;
    double h_max = 1.0;

    double normalize(double v) const { return (v - h_min) / (h_max - h_min); }
    double denormalize(double v) const { return h_min + v * (h_max - h_min); }
    std::string digest() const;
    bool operator==(const Scaler&) const = default;
};

/// Min-max over every value of every grid. Throws on constant data.
Scaler fit_scaler(std::span<const HeadwayGrid> grids);
HeadwayGrid normalize(HeadwayGrid grid, const Scaler& scaler);
HeadwayGrid denormalize(HeadwayGrid grid, const Scaler& scaler);

/// Headways, window selection, rasterization and imputation for one log.
/// Events outside the spec window are counted in `dropped_out_of_window`.
struct BuildResult {
    HeadwayGrid grid;
    std::size_t dropped_out_of_window = 0;
    std::size_t first_activations = 0;
    ImputationReport imputation;
};
BuildResult build_grid(const sim::TrajectoryLog& log, const GridSpec& spec);

/// build_grid over many logs, parallel across replications.
std::vector<BuildResult> build_grids(std::span<const sim::TrajectoryLog> logs, const GridSpec& spec);

}  // namespace headway::grid
