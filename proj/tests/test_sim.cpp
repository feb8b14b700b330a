#include "doctest.h"

#include <algorithm>
#include <map>
#include <set>

#include "headway/rng.hpp"
#include "headway/sim.hpp"

using namespace headway;
using namespace headway::sim;

namespace {

std::pair<DispatchSchedule, DispatchSchedule> even_schedules(const LineConfig& c, int n_nb, int n_sb, double gap)
{
    DispatchSchedule nb{Direction::NB, {}};
    DispatchSchedule sb{Direction::SB, {}};
    for (int i = 0; i < n_nb; ++i) nb.departure_times.push_back(c.service_start + i * gap);
    for (int i = 0; i < n_sb; ++i) sb.departure_times.push_back(c.service_start + 30.0 + i * gap);
    return {nb, sb};
}

void check_log_invariants(const LineConfig& c, const TrajectoryLog& log, std::size_t n_nb, std::size_t n_sb)
{
    std::map<std::pair<int, int>, std::vector<double>> per_block;
    std::map<int, std::vector<const TrajectoryEvent*>> per_train;
    for (const auto& e : log.events) {
        REQUIRE(e.distance >= 0.0);
        REQUIRE(e.distance <= c.line_length);
        REQUIRE(e.timestamp >= c.service_start);
        REQUIRE(e.timestamp <= c.service_end);
        per_block[{e.block_id, static_cast<int>(index(e.direction))}].push_back(e.timestamp);
        per_train[e.train_id].push_back(&e);
    }
    for (auto& [key, times] : per_block) {
        std::sort(times.begin(), times.end());
        for (std::size_t i = 1; i < times.size(); ++i) REQUIRE(times[i] - times[i - 1] >= c.min_separation - 1e-9);
    }
    std::size_t nb_entries = 0;
    std::size_t short_turned = 0;
    for (const auto& [id, events] : per_train) {
        for (std::size_t i = 1; i < events.size(); ++i) {
            REQUIRE(events[i]->timestamp > events[i - 1]->timestamp);
            if (events[i]->direction == events[i - 1]->direction)
                REQUIRE(events[i]->distance >= events[i - 1]->distance);
        }
        if (events.front()->direction == Direction::NB) ++nb_entries;
        const bool has_sb = std::any_of(events.begin(), events.end(),
                                        [](auto* e) { return e->direction == Direction::SB; });
        const bool has_nb = std::any_of(events.begin(), events.end(),
                                        [](auto* e) { return e->direction == Direction::NB; });
        if (has_sb && has_nb) {
            ++short_turned;
            ++nb_entries;
        }
        // A train that stops emitting well before the end of service must
        // have finished its run at a terminal.
        const auto* last = events.back();
        if (last->timestamp < c.service_end - 1200.0) {
            const int end_block = last->direction == Direction::NB ? static_cast<int>(c.block_count()) - 1 : 0;
            CHECK(last->block_id == end_block);
        }
    }
    // Every dispatched train appears; NB service = NB dispatches + short turns.
    CHECK(per_train.size() <= n_nb + n_sb);
    CHECK(nb_entries <= n_nb + short_turned);
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("default config is valid and has the expected geometry")
{
    const auto c = LineConfig::default_line();
    CHECK_NOTHROW(c.validate());
    CHECK(c.block_count() == 128);
    CHECK(c.station_positions.size() == 32);
    CHECK(std::find(c.station_positions.begin(), c.station_positions.end(), 46200.0) != c.station_positions.end());
}

TEST_CASE("invalid configs are rejected before simulation")
{
    auto c = LineConfig::default_line();
    SUBCASE("block length") { c.block_length = 0.0; }
    SUBCASE("stations not increasing") { c.station_positions = {100.0, 100.0}; }
    SUBCASE("station outside line") { c.station_positions = {-5.0}; }
    SUBCASE("fraction") { c.short_turn_fraction = 1.5; }
    SUBCASE("separation") { c.min_separation = 0.0; }
    SUBCASE("window") { c.service_end = c.service_start; }
    SUBCASE("short turn off boundary") { c.short_turn_position = 46250.0; }
    CHECK_THROWS_AS(simulate_replication(c, even_schedules(LineConfig::default_line(), 1, 1, 300), 1),
                    InvariantError);
}

TEST_CASE("infeasible schedules name the offending departures")
{
    const auto c = LineConfig::default_line();
    auto s = even_schedules(c, 3, 3, 300);
    s.second.departure_times[2] = s.second.departure_times[1] + 30.0;
    try {
        simulate_replication(c, s, 1);
        FAIL("expected InfeasibleScheduleError");
    } catch (const InfeasibleScheduleError& e) {
        CHECK(e.direction == Direction::SB);
        CHECK(e.index == 1);
        CHECK(e.second - e.first == doctest::Approx(30.0));
    }
}

TEST_CASE("no short turns: every SB train traverses every block")
{
    auto c = LineConfig::default_line();
    c.short_turn_fraction = 0.0;
    const auto log = simulate_replication(c, even_schedules(c, 0, 3, 300), 11);
    std::map<int, std::set<int>> sb_blocks;
    for (const auto& e : log.events) {
        CHECK(e.direction == Direction::SB);
        sb_blocks[e.train_id].insert(e.block_id);
    }
    CHECK(sb_blocks.size() == 3);
    for (const auto& [id, blocks] : sb_blocks) CHECK(blocks.size() == c.block_count());
}

TEST_CASE("identical inputs and seed give identical logs")
{
    const auto c = LineConfig::default_line();
    const auto s = jittered_schedules(c, 300.0, 5);
    const auto a = simulate_replication(c, s, 77);
    const auto b = simulate_replication(c, s, 77);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].train_id == b.events[i].train_id);
        CHECK(a.events[i].timestamp == b.events[i].timestamp);
        CHECK(a.events[i].block_id == b.events[i].block_id);
    }
    const auto other = simulate_replication(c, s, 78);
    CHECK(other.events.size() > 0);
}

TEST_CASE("half of ten SB trains short-turn into NB service at the turn point")
{
    auto c = LineConfig::default_line();
    c.short_turn_fraction = 0.5;
    const auto log = simulate_replication(c, even_schedules(c, 0, 10, 300), 3);
    std::map<int, const TrajectoryEvent*> first_nb;
    for (const auto& e : log.events)
        if (e.direction == Direction::NB && !first_nb.count(e.train_id)) first_nb[e.train_id] = &e;
    int at_turn = 0;
    for (const auto& [id, e] : first_nb)
        if (e->distance == *c.short_turn_position) ++at_turn;
    CHECK(first_nb.size() == 5);
    CHECK(at_turn == 5);
    check_log_invariants(c, log, 0, 10);
}

TEST_CASE("short-turn selection is an even round robin")
{
    int count = 0;
    for (std::size_t i = 0; i < 10; ++i) count += is_short_turner(i, 0.3) ? 1 : 0;
    CHECK(count == 3);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK_FALSE(is_short_turner(i, 0.0));
        CHECK(is_short_turner(i, 1.0));
    }
}

TEST_CASE("generated replications satisfy the log invariants")
{
    const auto c = LineConfig::default_line();
    const auto logs = generate_dataset(c, 3, 100, 300.0);
    REQUIRE(logs.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(logs[static_cast<std::size_t>(i)].replication_id == i);
        const auto s = jittered_schedules(c, 300.0, derive_seed(100 + static_cast<std::uint64_t>(i), 1));
        check_log_invariants(c, logs[static_cast<std::size_t>(i)], s.first.departure_times.size(),
                             s.second.departure_times.size());
    }
}

TEST_CASE("a batch of one equals a direct replication")
{
    const auto c = LineConfig::default_line();
    const auto batch = generate_dataset(c, 1, 9, 300.0);
    const auto direct = simulate_replication(c, jittered_schedules(c, 300.0, derive_seed(9, 1)), 9);
    REQUIRE(batch[0].events.size() == direct.events.size());
    for (std::size_t i = 0; i < direct.events.size(); ++i)
        CHECK(batch[0].events[i].timestamp == direct.events[i].timestamp);
}

TEST_CASE("fifty replications carry ids 0..49")
{
    auto c = LineConfig::default_line();
    const auto logs = generate_dataset(c, 50, 1, 300.0);
    std::set<int> ids;
    for (const auto& l : logs) ids.insert(l.replication_id);
    CHECK(ids.size() == 50);
    CHECK(*ids.begin() == 0);
    CHECK(*ids.rbegin() == 49);
}

TEST_CASE("zero jitter gives identical departures across replications")
{
    auto c = LineConfig::default_line();
    c.dispatch_jitter = 0.0;
    const auto a = jittered_schedules(c, 300.0, derive_seed(1, 1));
    const auto b = jittered_schedules(c, 300.0, derive_seed(2, 1));
    CHECK(a.first.departure_times == b.first.departure_times);
    CHECK(a.second.departure_times == b.second.departure_times);
    CHECK_THROWS_AS(jittered_schedules(c, 60.0, 1), InvariantError);
}

}
