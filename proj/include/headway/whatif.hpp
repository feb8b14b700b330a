#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "headway/predictor.hpp"

namespace headway::whatif {

inline constexpr double kDefaultMinSafeHeadway = 120.0;

/// Planned departure headways (seconds) at one terminal, one entry per future time bin.
struct TerminalPlan {
    Direction direction = Direction::NB;
    std::vector<double> headways;
    std::string label;
};

/// Plan entries below the minimum safe headway (or non-finite), with their indices.
class PlanError : public InvariantError {
public:
    PlanError(std::string message, std::vector<std::size_t> indices);
    std::vector<std::size_t> indices;
};

void validate_plan(const TerminalPlan& plan, double min_safe = kDefaultMinSafeHeadway);

TerminalPlan plan_even(double target, int horizon_bins, double min_safe = kDefaultMinSafeHeadway,
                       Direction direction = Direction::NB);

/// Projects the observations cyclically over the horizon, then holds each
/// entry up to the projection mean: plan[i] = max(projection[i], mean, min_safe).
/// Holding only delays departures, so every entry dominates its projection.
TerminalPlan plan_holding(std::span<const double> observed, int horizon_bins,
                          double min_safe = kDefaultMinSafeHeadway, Direction direction = Direction::NB);

TerminalPlan plan_custom(std::vector<double> pattern, double min_safe = kDefaultMinSafeHeadway,
                         Direction direction = Direction::NB, std::string label = "custom");

/// Inputs shared by every plan in a comparison.
struct PlanContext {
    Tensor<float> x_window;  // normalized [L, N_d, N_dir, 1]
    // Terminal headways (seconds) used for whichever direction a plan does not set.
    std::array<std::vector<double>, kNumDirections> baseline_terminal;
    int anchor_time_bin = -1;
};

struct PlanOutcome {
    std::string label;
    Direction direction = Direction::NB;
    Tensor<float> predicted;  // seconds [n_bins, N_d, N_dir, 1]
    // [N_d][N_dir] flattened as j * N_dir + k
    std::vector<double> cv;
    std::vector<double> mean;
    std::vector<double> delta_cv;
    std::vector<double> delta_mean;
};

struct ComparisonReport {
    std::vector<PlanOutcome> plans;
    std::size_t baseline_index = 0;
    int n_distance = 0;
    int horizon_bins = 0;
};

/// Per (distance bin, direction) std/mean of a [n, N_d, N_dir, 1] grid over
/// time (population std). Headways are non-negative, so a zero mean means an
/// all-zero column and gets CV 0.
void cv_and_mean(const Tensor<float>& grid, std::vector<double>& cv, std::vector<double>& mean);

/// Predicts every plan from the same window and reports per-bin CV and mean
/// plus deltas against plans[baseline_index]. Plans must share direction
/// and length, and the length must be a multiple of F.
ComparisonReport compare_plans(const predict::TrainedModel& model, const grid::Scaler& scaler,
                               const PlanContext& context, std::span<const TerminalPlan> plans,
                               std::size_t baseline_index, double min_safe = kDefaultMinSafeHeadway);

}  // namespace headway::whatif
