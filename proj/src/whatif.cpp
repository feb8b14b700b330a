#include "headway/whatif.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace headway::whatif {

PlanError::PlanError(std::string message, std::vector<std::size_t> idx)
    : InvariantError(std::move(message)), indices(std::move(idx))
{
}

void validate_plan(const TerminalPlan& plan, double min_safe)
{
    if (plan.headways.empty()) throw PlanError(fmt::format("plan '{}' is empty", plan.label), {});
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < plan.headways.size(); ++i)
        if (!std::isfinite(plan.headways[i]) || plan.headways[i] < min_safe) bad.push_back(i);
    if (!bad.empty())
        throw PlanError(fmt::format("plan '{}': entries at indices [{}] are below the minimum safe headway of {} s",
                                    plan.label, fmt::join(bad, ", "), min_safe),
                        bad);
}

TerminalPlan plan_even(double target, int horizon_bins, double min_safe, Direction direction)
{
    if (horizon_bins < 1) throw InvariantError("horizon_bins must be positive");
    TerminalPlan p{direction, std::vector<double>(static_cast<std::size_t>(horizon_bins), target),
                   fmt::format("even {}s", target)};
    validate_plan(p, min_safe);
    return p;
}

TerminalPlan plan_holding(std::span<const double> observed, int horizon_bins, double min_safe, Direction direction)
{
    if (observed.empty()) throw InvariantError("holding plan needs at least one observed headway");
    if (horizon_bins < 1) throw InvariantError("horizon_bins must be positive");
    std::vector<double> projection(static_cast<std::size_t>(horizon_bins));
    for (std::size_t i = 0; i < projection.size(); ++i) projection[i] = observed[i % observed.size()];
    double mean = 0.0;
    for (double v : projection) mean += v;
    mean /= static_cast<double>(projection.size());
    TerminalPlan p{direction, {}, "holding"};
    p.headways.reserve(projection.size());
    for (double v : projection) p.headways.push_back(std::max({v, mean, min_safe}));
    validate_plan(p, min_safe);
    return p;
}

TerminalPlan plan_custom(std::vector<double> pattern, double min_safe, Direction direction, std::string label)
{
    TerminalPlan p{direction, std::move(pattern), std::move(label)};
    validate_plan(p, min_safe);
    return p;
}

void cv_and_mean(const Tensor<float>& grid, std::vector<double>& cv, std::vector<double>& mean)
{
    if (grid.shape.size() != 4) throw ShapeError("expected a [n, N_d, N_dir, 1] grid");
    const std::size_t n = grid.shape[0];
    const std::size_t cells = grid.shape[1] * grid.shape[2];
    cv.assign(cells, 0.0);
    mean.assign(cells, 0.0);
    for (std::size_t c = 0; c < cells; ++c) {
        double m = 0.0;
        for (std::size_t t = 0; t < n; ++t) m += grid.data[t * cells + c];
        m /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double d = grid.data[t * cells + c] - m;
            var += d * d;
        }
        var /= static_cast<double>(n);
        mean[c] = m;
        cv[c] = m > 0.0 ? std::sqrt(var) / m : 0.0;
    }
}

ComparisonReport compare_plans(const predict::TrainedModel& model, const grid::Scaler& scaler,
                               const PlanContext& context, std::span<const TerminalPlan> plans,
                               std::size_t baseline_index, double min_safe)
{
    if (plans.empty()) throw InvariantError("no plans to compare");
    if (baseline_index >= plans.size())
        throw InvariantError(fmt::format("baseline_index {} out of range for {} plans", baseline_index, plans.size()));
    const std::size_t len = plans.front().headways.size();
    const auto F = static_cast<std::size_t>(model.dims().horizon);
    for (const auto& p : plans) {
        validate_plan(p, min_safe);
        if (p.direction != plans.front().direction) throw InvariantError("plans must share one direction");
        if (p.headways.size() != len) throw InvariantError("plans must have the same length");
    }
    if (len % F != 0)
        throw InvariantError(fmt::format("plan length {} is not a multiple of the {}-bin horizon", len, F));
    const Direction dir = plans.front().direction;
    const Direction other = dir == Direction::NB ? Direction::SB : Direction::NB;
    const auto& fill = context.baseline_terminal[index(other)];
    if (fill.size() < len)
        throw InvariantError(fmt::format("baseline terminal headways for {} cover {} bins, plans need {}",
                                         to_string(other), fill.size(), len));
    const std::vector<double> other_plan(fill.begin(), fill.begin() + static_cast<std::ptrdiff_t>(len));

    ComparisonReport report;
    report.baseline_index = baseline_index;
    report.n_distance = model.dims().n_distance;
    report.horizon_bins = static_cast<int>(len);
    const int rounds = static_cast<int>(len / F);
    for (const auto& p : plans) {
        const auto t = dir == Direction::NB ? predict::plan_tensor(p.headways, other_plan, scaler)
                                            : predict::plan_tensor(other_plan, p.headways, scaler);
        PlanOutcome o;
        o.label = p.label;
        o.direction = dir;
        o.predicted = predict::predict_recursive(model, scaler, context.x_window, t, rounds).y_hat;
        cv_and_mean(o.predicted, o.cv, o.mean);
        report.plans.push_back(std::move(o));
    }
    const auto& base = report.plans[baseline_index];
    for (auto& o : report.plans) {
        o.delta_cv.resize(o.cv.size());
        o.delta_mean.resize(o.mean.size());
        for (std::size_t c = 0; c < o.cv.size(); ++c) {
            o.delta_cv[c] = o.cv[c] - base.cv[c];
            o.delta_mean[c] = o.mean[c] - base.mean[c];
        }
    }
    return report;
}

}  // namespace headway::whatif
