#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "headway/common.hpp"

namespace headway::sim {

/// Geometry and stochastic parameters of a two-direction metro line.
///
/// Positions are absolute feet measured from the NB departure end of the
/// track. NB trains run from `terminal_nb_position` up to
/// `terminal_sb_position`; SB trains run the other way. Terminals and the
/// short-turn point must sit on block boundaries.
struct LineConfig {
    double line_length = 140800.0;
    double block_length = 1100.0;
    std::vector<double> station_positions;
    double terminal_nb_position = 0.0;
    double terminal_sb_position = 140800.0;
    std::optional<double> short_turn_position = 46200.0;
    double short_turn_fraction = 0.5;
    double turnback_time = 180.0;
    double min_separation = 90.0;
    double dwell_mean = 30.0;
    double dwell_sd = 10.0;
    double dwell_min = 10.0;
    double run_speed_mean = 50.0;
    double run_speed_sd = 6.0;
    double speed_floor = 15.0;
    // Per-replication multiplicative spread on dwell means, U(1-v, 1+v).
    double demand_variation = 0.2;
    // Chance that a station stop picks up an extra exponential delay.
    double incident_probability = 0.02;
    double incident_delay_mean = 90.0;
    // Half-width of the uniform jitter applied to generated departures.
    double dispatch_jitter = 90.0;
    double service_start = 50400.0;  // 14:00
    double service_end = 66600.0;    // 18:30

    /// Stations every 4400 ft starting at 2200 ft, one of which coincides
    /// with the default short-turn point.
    static LineConfig default_line();

    /// Throws InvariantError naming the offending field.
    void validate() const;
    std::size_t block_count() const;
    std::string digest() const;
};

struct DispatchSchedule {
    Direction direction = Direction::NB;
    std::vector<double> departure_times;
};

/// Departures closer than the minimum separation.
class InfeasibleScheduleError : public InvariantError {
public:
    InfeasibleScheduleError(Direction dir, std::size_t index, double first, double second, double min_sep);
    Direction direction;
    std::size_t index;  // departures index and index + 1 conflict
    double first;
    double second;
};

struct TrajectoryEvent {
    int replication_id = 0;
    int train_id = 0;
    Direction direction = Direction::NB;
    int block_id = 0;
    double distance = 0.0;  // feet from this direction's departure terminal
    double timestamp = 0.0;
    std::optional<double> headway;
};

struct TrajectoryLog {
    int replication_id = 0;
    std::vector<TrajectoryEvent> events;
    std::string config_digest;
};

void validate_schedule(const LineConfig& config, const DispatchSchedule& schedule);

/// Runs one replication. `schedules` are {NB, SB} in that order.
TrajectoryLog simulate_replication(const LineConfig& config,
                                   const std::pair<DispatchSchedule, DispatchSchedule>& schedules,
                                   std::uint64_t seed, int replication_id = 0);

/// Even departures every `even_headway` seconds with uniform jitter of
/// +-config.dispatch_jitter; SB is offset by half a headway.
std::pair<DispatchSchedule, DispatchSchedule> jittered_schedules(const LineConfig& config,
                                                                 double even_headway,
                                                                 std::uint64_t seed);

/// Replication i uses seed base_seed + i and replication_id i. Replications
/// run in parallel; the result does not depend on the thread count.
std::vector<TrajectoryLog> generate_dataset(const LineConfig& config, int n_replications,
                                            std::uint64_t base_seed, double even_headway);

/// Whether the SB train with dispatch index i short-turns: an even
/// round-robin that selects exactly floor(n * fraction) of the first n.
bool is_short_turner(std::size_t sb_index, double fraction);

}  // namespace headway::sim
