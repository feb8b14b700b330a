#include "headway/sim.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <fmt/format.h>

#include "headway/hash.hpp"
#include "headway/rng.hpp"

namespace headway::sim {
namespace {

bool aligned(double position, double block_length)
{
    const double q = position / block_length;
    return std::abs(q - std::round(q)) < 1e-9;
}

int block_of(double position, double block_length)
{
    return static_cast<int>(std::lround(position / block_length));
}

double truncated_normal(Rng& rng, double mean, double sd, double lo)
{
    for (int attempt = 0; attempt < 64; ++attempt) {
        const double v = rng.normal(mean, sd);
        if (v >= lo) return v;
    }
    return lo;
}

struct BlockState {
    int occupant = -1;
    double last_entry = -1e300;
    std::vector<int> waiters;
};

struct Train {
    int id = 0;
    Direction direction = Direction::NB;
    bool short_turner = false;
    int next_block = 0;
    int current_block = -1;
    bool finished = false;
};

struct Request {
    double time;
    std::uint64_t seq;
    int train;       // -1 for a release
    Direction direction;
    int block;       // block to release
    bool operator>(const Request& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

}  // namespace

LineConfig LineConfig::default_line()
{
    LineConfig c;
    for (double p = 2200.0; p < c.line_length; p += 4400.0) c.station_positions.push_back(p);
    return c;
}

std::size_t LineConfig::block_count() const
{
    return static_cast<std::size_t>(std::ceil(line_length / block_length - 1e-9));
}

void LineConfig::validate() const
{
    auto fail = [](const std::string& what) { throw InvariantError("line config: " + what); };
    if (!(line_length > 0.0)) fail("line_length must be positive");
    if (!(block_length > 0.0 && block_length <= line_length)) fail("block_length must be in (0, line_length]");
    for (std::size_t i = 0; i < station_positions.size(); ++i) {
        const double p = station_positions[i];
        if (!(p >= 0.0 && p <= line_length)) fail(fmt::format("station_positions[{}] = {} outside [0, line_length]", i, p));
        if (i > 0 && !(p > station_positions[i - 1])) fail(fmt::format("station_positions[{}] not strictly increasing", i));
    }
    if (!(terminal_nb_position >= 0.0 && terminal_nb_position < terminal_sb_position &&
          terminal_sb_position <= line_length))
        fail("terminals must satisfy 0 <= terminal_nb_position < terminal_sb_position <= line_length");
    if (!aligned(terminal_nb_position, block_length)) fail("terminal_nb_position must lie on a block boundary");
    if (!aligned(terminal_sb_position, block_length) && terminal_sb_position != line_length)
        fail("terminal_sb_position must lie on a block boundary or at line_length");
    if (short_turn_position) {
        const double s = *short_turn_position;
        if (!(s > terminal_nb_position && s < terminal_sb_position))
            fail("short_turn_position must lie strictly between the terminals");
        if (!aligned(s, block_length)) fail("short_turn_position must lie on a block boundary");
    }
    if (!(short_turn_fraction >= 0.0 && short_turn_fraction <= 1.0)) fail("short_turn_fraction must be in [0, 1]");
    if (!(min_separation > 0.0)) fail("min_separation must be positive");
    if (!(turnback_time >= 0.0)) fail("turnback_time must be non-negative");
    if (!(dwell_mean >= 0.0 && dwell_sd >= 0.0 && dwell_min >= 0.0)) fail("dwell parameters must be non-negative");
    if (!(run_speed_mean > 0.0 && run_speed_sd >= 0.0 && speed_floor > 0.0)) fail("speed parameters must be positive");
    if (!(demand_variation >= 0.0 && demand_variation < 1.0)) fail("demand_variation must be in [0, 1)");
    if (!(incident_probability >= 0.0 && incident_probability <= 1.0)) fail("incident_probability must be in [0, 1]");
    if (!(incident_delay_mean >= 0.0)) fail("incident_delay_mean must be non-negative");
    if (!(dispatch_jitter >= 0.0)) fail("dispatch_jitter must be non-negative");
    if (!(service_start < service_end)) fail("service_start must precede service_end");
}

std::string LineConfig::digest() const
{
    Fnv1a h;
    h.update(fmt::format("{}|{}|{}|{}|", line_length, block_length, terminal_nb_position, terminal_sb_position));
    for (double p : station_positions) h.update(fmt::format("{},", p));
    h.update(fmt::format("|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}", short_turn_position.value_or(-1.0),
                         short_turn_fraction, turnback_time, min_separation, dwell_mean, dwell_sd, dwell_min,
                         run_speed_mean, run_speed_sd, speed_floor, demand_variation, incident_probability,
                         incident_delay_mean, dispatch_jitter, service_start, service_end, 1));
    return h.hex();
}

InfeasibleScheduleError::InfeasibleScheduleError(Direction dir, std::size_t idx, double a, double b, double min_sep)
    : InvariantError(fmt::format("{} departures {} ({} s) and {} ({} s) are {} s apart, below min_separation {} s",
                                 to_string(dir), idx, a, idx + 1, b, b - a, min_sep)),
      direction(dir), index(idx), first(a), second(b)
{
}

void validate_schedule(const LineConfig& config, const DispatchSchedule& schedule)
{
    const auto& t = schedule.departure_times;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t[i] >= config.service_start && t[i] < config.service_end))
            throw InvariantError(fmt::format("{} departure {} at {} s lies outside the service window",
                                             to_string(schedule.direction), i, t[i]));
        if (i > 0 && !(t[i] - t[i - 1] >= config.min_separation))
            throw InfeasibleScheduleError(schedule.direction, i - 1, t[i - 1], t[i], config.min_separation);
    }
}

bool is_short_turner(std::size_t sb_index, double fraction)
{
    const auto i = static_cast<double>(sb_index);
    return std::floor((i + 1.0) * fraction) > std::floor(i * fraction);
}

TrajectoryLog simulate_replication(const LineConfig& config,
                                   const std::pair<DispatchSchedule, DispatchSchedule>& schedules,
                                   std::uint64_t seed, int replication_id)
{
    config.validate();
    if (schedules.first.direction != Direction::NB || schedules.second.direction != Direction::SB)
        throw InvariantError("schedules must be ordered {NB, SB}");
    validate_schedule(config, schedules.first);
    validate_schedule(config, schedules.second);

    Rng rng(seed);
    const double dwell_scale = rng.uniform(1.0 - config.demand_variation, 1.0 + config.demand_variation);

    const double bl = config.block_length;
    const int n_blocks = static_cast<int>(config.block_count());
    const int nb_first = block_of(config.terminal_nb_position, bl);
    const int nb_last = static_cast<int>(std::ceil(config.terminal_sb_position / bl - 1e-9)) - 1;
    const int turn_block = config.short_turn_position ? block_of(*config.short_turn_position, bl) : -1;
    const bool turning = turn_block >= 0 && config.short_turn_fraction > 0.0;

    std::vector<char> has_station(static_cast<std::size_t>(n_blocks), 0);
    for (double p : config.station_positions)
        has_station[static_cast<std::size_t>(std::min(static_cast<int>(p / bl), n_blocks - 1))] = 1;

    auto block_start = [&](int b) { return b * bl; };
    auto block_end = [&](int b) { return std::min((b + 1) * bl, config.line_length); };

    std::vector<Train> trains;
    std::priority_queue<Request, std::vector<Request>, std::greater<>> queue;
    std::uint64_t seq = 0;
    auto push_request = [&](double time, int train) {
        queue.push({time, seq++, train, trains[static_cast<std::size_t>(train)].direction, 0});
    };

    for (double dep : schedules.first.departure_times) {
        trains.push_back({static_cast<int>(trains.size()), Direction::NB, false, nb_first, -1, false});
        push_request(dep, trains.back().id);
    }
    std::size_t sb_index = 0;
    for (double dep : schedules.second.departure_times) {
        const bool turner = turning && is_short_turner(sb_index++, config.short_turn_fraction);
        trains.push_back({static_cast<int>(trains.size()), Direction::SB, turner, nb_last, -1, false});
        push_request(dep, trains.back().id);
    }

    std::vector<BlockState> blocks[kNumDirections];
    for (auto& v : blocks) v.resize(static_cast<std::size_t>(n_blocks));

    TrajectoryLog log;
    log.replication_id = replication_id;
    log.config_digest = config.digest();

    auto release = [&](Direction dir, int b, double time) {
        auto& bs = blocks[index(dir)][static_cast<std::size_t>(b)];
        bs.occupant = -1;
        for (int w : bs.waiters) push_request(time, w);
        bs.waiters.clear();
    };

    while (!queue.empty()) {
        const Request req = queue.top();
        queue.pop();
        if (req.time > config.service_end) break;

        if (req.train < 0) {
            release(req.direction, req.block, req.time);
            continue;
        }
        Train& train = trains[static_cast<std::size_t>(req.train)];
        if (train.finished) continue;
        const Direction dir = train.direction;
        const int b = train.next_block;
        auto& bs = blocks[index(dir)][static_cast<std::size_t>(b)];

        if (bs.occupant >= 0) {
            bs.waiters.push_back(train.id);
            continue;
        }
        const double earliest = bs.last_entry + config.min_separation;
        if (req.time < earliest) {
            push_request(earliest, train.id);
            continue;
        }

        // Enter block b.
        const double now = req.time;
        const double distance = dir == Direction::NB ? block_start(b) - config.terminal_nb_position
                                                     : config.terminal_sb_position - block_end(b);
        log.events.push_back({replication_id, train.id, dir, b, distance, now, std::nullopt});
        if (train.current_block >= 0) release(dir, train.current_block, now);
        bs.occupant = train.id;
        bs.last_entry = now;
        train.current_block = b;

        const double speed = std::max(rng.normal(config.run_speed_mean, config.run_speed_sd), config.speed_floor);
        double occupancy = (block_end(b) - block_start(b)) / speed;
        if (has_station[static_cast<std::size_t>(b)]) {
            occupancy += truncated_normal(rng, config.dwell_mean * dwell_scale, config.dwell_sd, config.dwell_min);
            if (config.incident_probability > 0.0 && rng.uniform() < config.incident_probability)
                occupancy += -config.incident_delay_mean * std::log(1.0 - rng.uniform());
        }
        const double leave = now + occupancy;

        const bool end_nb = dir == Direction::NB && b == nb_last;
        const bool end_sb = dir == Direction::SB && (train.short_turner ? b == turn_block : b == nb_first);
        if (end_nb || end_sb) {
            queue.push({leave, seq++, -1, dir, b});
            train.current_block = -1;
            if (end_sb && train.short_turner) {
                train.direction = Direction::NB;
                train.short_turner = false;
                train.next_block = turn_block;
                push_request(leave + config.turnback_time, train.id);
            } else {
                train.finished = true;
            }
            continue;
        }
        train.next_block = dir == Direction::NB ? b + 1 : b - 1;
        push_request(leave, train.id);
    }
    return log;
}

std::pair<DispatchSchedule, DispatchSchedule> jittered_schedules(const LineConfig& config, double even_headway,
                                                                 std::uint64_t seed)
{
    if (!(even_headway >= config.min_separation))
        throw InvariantError(fmt::format("even_headway {} s is below min_separation {} s", even_headway,
                                         config.min_separation));
    Rng rng(seed);
    const double jitter = config.dispatch_jitter;
    auto build = [&](Direction dir, double offset) {
        DispatchSchedule s{dir, {}};
        for (double base = config.service_start + jitter + offset; base + jitter < config.service_end;
             base += even_headway) {
            const double t = base + (jitter > 0.0 ? rng.uniform(-jitter, jitter) : 0.0);
            s.departure_times.push_back(t);
        }
        return s;
    };
    auto nb = build(Direction::NB, 0.0);
    auto sb = build(Direction::SB, 0.5 * even_headway);
    return {std::move(nb), std::move(sb)};
}

std::vector<TrajectoryLog> generate_dataset(const LineConfig& config, int n_replications, std::uint64_t base_seed,
                                            double even_headway)
{
    if (n_replications < 1) throw InvariantError("n_replications must be at least 1");
    config.validate();
    std::vector<TrajectoryLog> logs(static_cast<std::size_t>(n_replications));
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n_replications; ++i) {
        try {
            const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
            const auto schedules = jittered_schedules(config, even_headway, derive_seed(seed, 1));
            logs[static_cast<std::size_t>(i)] = simulate_replication(config, schedules, seed, i);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return logs;
}

}  // namespace headway::sim
