#include "headway/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "headway/hash.hpp"

namespace headway::grid {

void GridSpec::validate() const
{
    auto fail = [](const std::string& what) { throw InvariantError("grid spec: " + what); };
    if (!(t_start < t_end)) fail("t_start must precede t_end");
    if (!(delta_t > 0.0)) fail("delta_t must be positive");
    const double bins = (t_end - t_start) / delta_t;
    if (std::abs(bins - std::round(bins)) > 1e-9 * std::max(1.0, bins))
        fail("(t_end - t_start) must be divisible by delta_t");
    if (n_distance_bins < 1) fail("n_distance_bins must be at least 1");
    if (!(d_min < d_max)) fail("d_min must be below d_max");
    if (n_directions != static_cast<int>(kNumDirections)) fail("n_directions must be 2");
}

int GridSpec::n_time_bins() const
{
    return static_cast<int>(std::lround((t_end - t_start) / delta_t));
}

std::size_t GridSpec::cell_count() const
{
    return static_cast<std::size_t>(n_time_bins()) * static_cast<std::size_t>(n_distance_bins) *
           static_cast<std::size_t>(n_directions);
}

int time_bin(double t, const GridSpec& spec)
{
    if (!(t >= spec.t_start && t < spec.t_end))
        throw std::out_of_range(fmt::format("timestamp {} outside [{}, {})", t, spec.t_start, spec.t_end));
    const int i = static_cast<int>(std::floor((t - spec.t_start) / spec.delta_t));
    return std::min(i, spec.n_time_bins() - 1);
}

int distance_bin(double d, const GridSpec& spec)
{
    if (!(d >= spec.d_min && d <= spec.d_max))
        throw std::out_of_range(fmt::format("distance {} outside [{}, {}]", d, spec.d_min, spec.d_max));
    const double width = (spec.d_max - spec.d_min) / spec.n_distance_bins;
    const int j = static_cast<int>(std::floor((d - spec.d_min) / width));
    return std::min(j, spec.n_distance_bins - 1);
}

sim::TrajectoryLog compute_headways(sim::TrajectoryLog log)
{
    struct Last {
        double time;
        int train;
    };
    std::map<std::pair<int, int>, Last> last;

    // Activations per key must be visited in time order.
    std::vector<std::size_t> order(log.events.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return log.events[a].timestamp < log.events[b].timestamp;
    });

    for (std::size_t i : order) {
        auto& e = log.events[i];
        e.headway.reset();
        const auto key = std::make_pair(e.block_id, static_cast<int>(index(e.direction)));
        auto it = last.find(key);
        if (it != last.end() && it->second.train != e.train_id) {
            const double h = e.timestamp - it->second.time;
            if (h > 0.0) e.headway = h;
        }
        if (it == last.end() || it->second.train != e.train_id)
            last[key] = {e.timestamp, e.train_id};
    }
    return log;
}

HeadwayGrid::HeadwayGrid(const GridSpec& s)
    : spec(s),
      values(s.cell_count(), std::numeric_limits<double>::quiet_NaN()),
      observed(s.cell_count(), 0)
{
}

bool is_unobserved_sentinel(double v) { return std::isnan(v); }

RasterResult rasterize(std::span<const sim::TrajectoryEvent> events, const GridSpec& spec)
{
    spec.validate();
    RasterResult result{HeadwayGrid(spec), {}};
    std::vector<double> sum(spec.cell_count(), 0.0);
    std::vector<std::uint32_t> count(spec.cell_count(), 0);

    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (!e.headway) {
            result.rejected.push_back({i, "missing headway"});
            continue;
        }
        int t = 0;
        int j = 0;
        try {
            t = time_bin(e.timestamp, spec);
            j = distance_bin(e.distance, spec);
        } catch (const std::out_of_range& err) {
            result.rejected.push_back({i, err.what()});
            continue;
        }
        const auto cell = result.grid.offset(t, j, static_cast<int>(index(e.direction)));
        sum[cell] += *e.headway;
        count[cell] += 1;
    }
    for (std::size_t c = 0; c < sum.size(); ++c) {
        if (count[c] > 0) {
            result.grid.values[c] = sum[c] / count[c];
            result.grid.observed[c] = 1;
        }
    }
    return result;
}

HeadwayGrid impute_missing(HeadwayGrid grid, ImputationReport* report)
{
    const auto& s = grid.spec;
    const int nt = s.n_time_bins();
    double total = 0.0;
    std::size_t n_obs = 0;
    for (std::size_t c = 0; c < grid.values.size(); ++c) {
        if (grid.observed[c]) {
            total += grid.values[c];
            ++n_obs;
        }
    }
    if (n_obs == 0) throw InvariantError("no observations");
    const double mean = total / static_cast<double>(n_obs);

    ImputationReport local;
    local.grid_mean = mean;
    for (int k = 0; k < s.n_directions; ++k) {
        for (int j = 0; j < s.n_distance_bins; ++j) {
            int first = -1;
            for (int t = 0; t < nt && first < 0; ++t)
                if (grid.is_observed(t, j, k)) first = t;
            if (first < 0) {
                for (int t = 0; t < nt; ++t) grid.at(t, j, k) = mean;
                local.filled_with_grid_mean.emplace_back(j, k);
                continue;
            }
            const double lead = grid.at(first, j, k);
            for (int t = 0; t < first; ++t) grid.at(t, j, k) = lead;
            double carry = lead;
            for (int t = first; t < nt; ++t) {
                if (grid.is_observed(t, j, k))
                    carry = grid.at(t, j, k);
                else
                    grid.at(t, j, k) = carry;
            }
        }
    }
    if (report) *report = std::move(local);
    return grid;
}

std::string Scaler::digest() const
{
    Fnv1a h;
    h.update(fmt::format("{}|{}", h_min, h_max));
    return h.hex();
}

Scaler fit_scaler(std::span<const HeadwayGrid> grids)
{
    if (grids.empty()) throw InvariantError("fit_scaler needs at least one grid");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& g : grids) {
        for (double v : g.values) {
            if (!std::isfinite(v)) throw InvariantError("fit_scaler requires imputed grids");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(lo < hi)) throw InvariantError(fmt::format("cannot fit scaler on constant data ({} s)", lo));
    return {lo, hi};
}

HeadwayGrid normalize(HeadwayGrid grid, const Scaler& scaler)
{
    if (grid.normalized) throw InvariantError("grid is already normalized");
    for (double& v : grid.values) v = scaler.normalize(v);
    grid.normalized = true;
    return grid;
}

HeadwayGrid denormalize(HeadwayGrid grid, const Scaler& scaler)
{
    if (!grid.normalized) throw InvariantError("grid is not normalized");
    for (double& v : grid.values) v = scaler.denormalize(v);
    grid.normalized = false;
    return grid;
}

BuildResult build_grid(const sim::TrajectoryLog& log, const GridSpec& spec)
{
    spec.validate();
    const auto enriched = compute_headways(log);
    std::vector<sim::TrajectoryEvent> kept;
    kept.reserve(enriched.events.size());
    BuildResult out;
    for (const auto& e : enriched.events) {
        if (!e.headway) {
            ++out.first_activations;
            continue;
        }
        if (!(e.timestamp >= spec.t_start && e.timestamp < spec.t_end)) {
            ++out.dropped_out_of_window;
            continue;
        }
        kept.push_back(e);
    }
    auto raster = rasterize(kept, spec);
    if (!raster.rejected.empty())
        throw InvariantError(fmt::format("replication {}: {} events rejected by rasterization (first: {})",
                                         log.replication_id, raster.rejected.size(), raster.rejected[0].reason));
    out.grid = impute_missing(std::move(raster.grid), &out.imputation);
    return out;
}

std::vector<BuildResult> build_grids(std::span<const sim::TrajectoryLog> logs, const GridSpec& spec)
{
    std::vector<BuildResult> out(logs.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < logs.size(); ++i) {
        try {
            out[i] = build_grid(logs[i], spec);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace headway::grid
