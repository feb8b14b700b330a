#include "doctest.h"

#include <cmath>
#include <map>
#include <tuple>

#include "headway/grid.hpp"
#include "headway/rng.hpp"

using namespace headway;
using namespace headway::grid;
using sim::TrajectoryEvent;

namespace {

GridSpec small_spec(int nt = 10, int nd = 4)
{
    GridSpec s;
    s.t_start = 0.0;
    s.t_end = 60.0 * nt;
    s.delta_t = 60.0;
    s.n_distance_bins = nd;
    s.d_min = 0.0;
    s.d_max = 400.0 * nd;
    return s;
}

TrajectoryEvent ev(int train, Direction dir, int block, double t, double d = 0.0, std::optional<double> h = {})
{
    TrajectoryEvent e;
    e.train_id = train;
    e.direction = dir;
    e.block_id = block;
    e.timestamp = t;
    e.distance = d;
    e.headway = h;
    return e;
}

}  // namespace

TEST_SUITE("grid") {

TEST_CASE("time bins follow the half-open window")
{
    GridSpec s;
    CHECK(time_bin(s.t_start, s) == 0);
    CHECK(time_bin(55920.0, s) == 2);
    CHECK(time_bin(s.t_start + s.delta_t - 1e-6, s) == 0);
    CHECK(time_bin(s.t_end - 1e-6, s) == s.n_time_bins() - 1);
    CHECK_THROWS_AS(time_bin(s.t_end, s), std::out_of_range);
    CHECK_THROWS_AS(time_bin(s.t_start - 1.0, s), std::out_of_range);
    CHECK(s.n_time_bins() == 150);
}

TEST_CASE("distance bins are 2200 ft wide over 64 bins and clamp the far end")
{
    GridSpec s;
    CHECK(distance_bin(0.0, s) == 0);
    CHECK(distance_bin(4400.0, s) == 2);
    CHECK(distance_bin(140800.0, s) == 63);
    CHECK(distance_bin(2199.999, s) == 0);
    CHECK_THROWS_AS(distance_bin(-0.1, s), std::out_of_range);
    CHECK_THROWS_AS(distance_bin(140800.1, s), std::out_of_range);
}

TEST_CASE("bin indices stay in range for random in-range inputs")
{
    GridSpec s;
    Rng rng(4);
    for (int i = 0; i < 10000; ++i) {
        const int t = time_bin(rng.uniform(s.t_start, s.t_end), s);
        const int j = distance_bin(rng.uniform(s.d_min, s.d_max), s);
        REQUIRE(t >= 0);
        REQUIRE(t < s.n_time_bins());
        REQUIRE(j >= 0);
        REQUIRE(j < s.n_distance_bins);
    }
}

TEST_CASE("grid spec validation")
{
    GridSpec s;
    s.t_end = s.t_start + 90.0;
    CHECK_THROWS_AS(s.validate(), InvariantError);
    s = GridSpec{};
    s.d_max = s.d_min;
    CHECK_THROWS_AS(s.validate(), InvariantError);
}

TEST_CASE("headways are gaps between successive trains on the same block")
{
    sim::TrajectoryLog log;
    log.events = {ev(1, Direction::NB, 5, 100.0), ev(2, Direction::NB, 5, 400.0)};
    auto out = compute_headways(log);
    CHECK_FALSE(out.events[0].headway.has_value());
    CHECK(*out.events[1].headway == 300.0);

    log.events = {ev(1, Direction::NB, 1, 0.0), ev(1, Direction::NB, 2, 50.0), ev(1, Direction::NB, 3, 90.0)};
    out = compute_headways(log);
    for (const auto& e : out.events) CHECK_FALSE(e.headway.has_value());

    log.events = {ev(3, Direction::SB, 7, 610.0), ev(1, Direction::SB, 7, 0.0), ev(2, Direction::SB, 7, 250.0),
                  ev(9, Direction::NB, 7, 260.0)};
    out = compute_headways(log);
    CHECK(*out.events[0].headway == 360.0);
    CHECK_FALSE(out.events[1].headway.has_value());
    CHECK(*out.events[2].headway == 250.0);
    CHECK_FALSE(out.events[3].headway.has_value());
}

TEST_CASE("rasterize averages headways per cell")
{
    const auto s = small_spec();
    std::vector<TrajectoryEvent> events{ev(1, Direction::NB, 0, 10.0, 5.0, 300.0),
                                        ev(2, Direction::NB, 0, 50.0, 100.0, 360.0)};
    const auto r = rasterize(events, s);
    CHECK(r.rejected.empty());
    CHECK(r.grid.at(0, 0, 0) == 330.0);
    CHECK(r.grid.is_observed(0, 0, 0));
    CHECK_FALSE(r.grid.is_observed(0, 0, 1));
    CHECK(is_unobserved_sentinel(r.grid.at(0, 0, 1)));
}

TEST_CASE("rasterize with no events observes nothing")
{
    const auto r = rasterize({}, small_spec());
    for (auto m : r.grid.observed) CHECK(m == 0);
}

TEST_CASE("rasterize reports events it cannot place")
{
    const auto s = small_spec();
    std::vector<TrajectoryEvent> events{ev(1, Direction::NB, 0, 10.0, 5.0, 300.0), ev(1, Direction::NB, 0, 10.0, 5.0),
                                        ev(1, Direction::NB, 0, s.t_end, 5.0, 100.0),
                                        ev(1, Direction::SB, 0, 30.0, s.d_max + 1.0, 100.0)};
    const auto r = rasterize(events, s);
    REQUIRE(r.rejected.size() == 3);
    CHECK(r.rejected[0].event_index == 1);
    CHECK(r.rejected[1].event_index == 2);
    CHECK(r.rejected[2].event_index == 3);
}

TEST_CASE("rasterize matches a brute-force group-by mean on 1000 random events")
{
    GridSpec s;
    Rng rng(2024);
    std::vector<TrajectoryEvent> events;
    for (int i = 0; i < 1000; ++i)
        events.push_back(ev(i, rng.uniform() < 0.5 ? Direction::NB : Direction::SB, 0,
                            rng.uniform(s.t_start, s.t_end), rng.uniform(s.d_min, s.d_max), rng.uniform(60.0, 900.0)));
    // Oracle: group events by directly computed cell coordinates, then average.
    std::map<std::tuple<int, int, int>, std::pair<double, int>> groups;
    const double width = (s.d_max - s.d_min) / s.n_distance_bins;
    for (const auto& e : events) {
        const int t = static_cast<int>((e.timestamp - s.t_start) / s.delta_t);
        const int j = std::min(static_cast<int>((e.distance - s.d_min) / width), s.n_distance_bins - 1);
        auto& g = groups[{t, j, static_cast<int>(index(e.direction))}];
        g.first += *e.headway;
        g.second += 1;
    }
    const auto r = rasterize(events, s);
    CHECK(r.rejected.empty());
    std::size_t observed = 0;
    for (auto m : r.grid.observed) observed += m;
    CHECK(observed == groups.size());
    for (const auto& [cell, g] : groups) {
        const auto [t, j, k] = cell;
        REQUIRE(r.grid.is_observed(t, j, k));
        CHECK(std::abs(r.grid.at(t, j, k) - g.first / g.second) < 1e-9);
    }
}

TEST_CASE("imputation leaves a fully observed grid unchanged")
{
    auto g = HeadwayGrid(small_spec(3, 2));
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        g.values[i] = 100.0 + static_cast<double>(i);
        g.observed[i] = 1;
    }
    const auto out = impute_missing(g);
    CHECK(out.values == g.values);
}

TEST_CASE("imputation forward-fills and back-fills columns")
{
    auto g = HeadwayGrid(small_spec(10, 2));
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
            g.at(3, j, k) = 420.0;
            g.observed[g.offset(3, j, k)] = 1;
            g.at(7, j, k) = 360.0;
            g.observed[g.offset(7, j, k)] = 1;
        }
    ImputationReport report;
    const auto out = impute_missing(g, &report);
    for (int t = 0; t <= 6; ++t) CHECK(out.at(t, 1, 0) == 420.0);
    for (int t = 7; t < 10; ++t) CHECK(out.at(t, 1, 0) == 360.0);
    CHECK(report.filled_with_grid_mean.empty());
}

TEST_CASE("empty columns take the grid mean and are reported")
{
    auto g = HeadwayGrid(small_spec(4, 2));
    g.at(0, 0, 0) = 200.0;
    g.observed[g.offset(0, 0, 0)] = 1;
    g.at(1, 1, 1) = 400.0;
    g.observed[g.offset(1, 1, 1)] = 1;
    ImputationReport report;
    const auto out = impute_missing(g, &report);
    CHECK(report.filled_with_grid_mean.size() == 2);
    CHECK(out.at(2, 1, 0) == 300.0);
    CHECK(out.at(3, 0, 1) == 300.0);
    CHECK(out.at(3, 0, 0) == 200.0);
}

TEST_CASE("imputation of an empty grid fails")
{
    CHECK_THROWS_WITH_AS(impute_missing(HeadwayGrid(small_spec())), "no observations", InvariantError);
}

TEST_CASE("imputation never alters observed cells and leaves no sentinels")
{
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        auto g = HeadwayGrid(small_spec(12, 5));
        for (std::size_t i = 0; i < g.values.size(); ++i)
            if (rng.uniform() < 0.3) {
                g.values[i] = rng.uniform(60.0, 900.0);
                g.observed[i] = 1;
            }
        g.values[0] = 100.0;
        g.observed[0] = 1;
        const auto out = impute_missing(g);
        for (std::size_t i = 0; i < g.values.size(); ++i) {
            REQUIRE(std::isfinite(out.values[i]));
            REQUIRE(out.values[i] > 0.0);
            if (g.observed[i]) REQUIRE(out.values[i] == g.values[i]);
        }
    }
}

TEST_CASE("min-max scaling")
{
    const Scaler s{120.0, 720.0};
    CHECK(s.normalize(420.0) == 0.5);
    CHECK(s.normalize(120.0) == 0.0);
    CHECK(s.normalize(720.0) == 1.0);

    auto g = HeadwayGrid(small_spec(3, 2));
    Rng rng(3);
    for (auto& v : g.values) v = rng.uniform(90.0, 900.0);
    std::vector<HeadwayGrid> train{g};
    const auto fitted = fit_scaler(train);
    const auto n = normalize(g, fitted);
    const auto back = denormalize(n, fitted);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        CHECK(n.values[i] >= 0.0);
        CHECK(n.values[i] <= 1.0);
        CHECK(std::abs(back.values[i] - g.values[i]) < 1e-9);
    }
    for (double a = 0.0; a < 1000.0; a += 37.0) CHECK(fitted.normalize(a) < fitted.normalize(a + 1e-3));
}

TEST_CASE("validation values may leave [0, 1]")
{
    auto train = HeadwayGrid(small_spec(2, 1));
    for (std::size_t i = 0; i < train.values.size(); ++i) train.values[i] = 120.0 + 100.0 * static_cast<double>(i);
    std::vector<HeadwayGrid> grids{train};
    const auto s = fit_scaler(grids);
    auto val = train;
    val.values[0] = s.h_max + 300.0;
    const auto n = normalize(val, s);
    CHECK(n.values[0] > 1.0);
}

TEST_CASE("fitting on constant data fails")
{
    auto g = HeadwayGrid(small_spec(2, 1));
    for (auto& v : g.values) v = 300.0;
    std::vector<HeadwayGrid> grids{g};
    CHECK_THROWS_AS(fit_scaler(grids), InvariantError);
}

TEST_CASE("a simulated replication yields a complete grid")
{
    const auto c = sim::LineConfig::default_line();
    const auto logs = sim::generate_dataset(c, 1, 5, 300.0);
    const auto built = build_grid(logs[0], GridSpec{});
    CHECK(built.dropped_out_of_window > 0);
    for (double v : built.grid.values) {
        REQUIRE(std::isfinite(v));
        REQUIRE(v > 0.0);
    }
    std::size_t observed = 0;
    for (auto m : built.grid.observed) observed += m;
    CHECK(observed > built.grid.values.size() / 4);
}

}
