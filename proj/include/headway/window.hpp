#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "headway/grid.hpp"
#include "headway/tensor.hpp"

namespace headway::window {

struct WindowSpec {
    int lookback = 30;
    int horizon = 15;
    int terminal_bin_nb = 0;
    int terminal_bin_sb = 0;

    void validate(int n_distance_bins) const;
    int terminal_bin(int direction) const { return direction == 0 ? terminal_bin_nb : terminal_bin_sb; }
    bool operator==(const WindowSpec&) const = default;
};

/// One training example in normalized units.
///   x        [L, N_d, N_dir, 1]  history ending just before the anchor
///   t_future [F, N_dir, 1]       terminal headways from the anchor on
///   y        [F, N_d, N_dir, 1]  targets from the anchor on
struct Sample {
    Tensor<float> x;
    Tensor<float> t_future;
    Tensor<float> y;
    int replication_id = 0;
    int anchor_time_bin = 0;
};

enum class Role { train, validation };

struct SampleSet {
    std::vector<Sample> samples;
    Role role = Role::train;
};

/// Copies time bins [begin, begin + count) of a grid as [count, N_d, N_dir, 1].
Tensor<float> slice_frames(const grid::HeadwayGrid& grid, int begin, int count);
/// Terminal-bin values of time bins [begin, begin + count) as [count, N_dir, 1].
Tensor<float> slice_terminal(const grid::HeadwayGrid& grid, const WindowSpec& spec, int begin, int count);

struct ExtractResult {
    std::vector<Sample> samples;
    std::vector<std::string> warnings;
};

/// One sample per anchor t in [L, n_time_bins - F], stride 1.
ExtractResult extract_samples(const grid::HeadwayGrid& grid, const WindowSpec& spec, int replication_id);

/// Holds out the last ceil(fraction * R) of the seed-shuffled replications.
std::pair<SampleSet, SampleSet> split_by_replication(std::vector<Sample> samples, double validation_fraction,
                                                     std::uint64_t seed);

/// The replication ids chosen for validation by split_by_replication.
std::vector<int> validation_replications(std::vector<int> replication_ids, double validation_fraction,
                                         std::uint64_t seed);

/// JSON-lines manifest plus a flat little-endian float32 payload.
void write_samples(const std::filesystem::path& manifest, const std::filesystem::path& payload,
                   std::span<const Sample> samples);
std::vector<Sample> read_samples(const std::filesystem::path& manifest, const std::filesystem::path& payload);

}  // namespace headway::window
