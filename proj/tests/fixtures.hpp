#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "headway/grid.hpp"
#include "headway/nn/params.hpp"
#include "headway/predictor.hpp"
#include "headway/rng.hpp"

namespace fixtures {

using namespace headway;

inline grid::GridSpec small_spec(int n_time = 40, int n_distance = 8)
{
    grid::GridSpec s;
    s.t_start = 0.0;
    s.delta_t = 60.0;
    s.t_end = 60.0 * n_time;
    s.n_distance_bins = n_distance;
    s.d_min = 0.0;
    s.d_max = 1100.0 * n_distance;
    return s;
}

/// Smooth-ish random headways in seconds with every cell observed.
inline grid::HeadwayGrid random_grid(const grid::GridSpec& spec, std::uint64_t seed)
{
    grid::HeadwayGrid g(spec);
    Rng rng(seed);
    for (int t = 0; t < spec.n_time_bins(); ++t)
        for (int j = 0; j < spec.n_distance_bins; ++j)
            for (int k = 0; k < 2; ++k) {
                g.at(t, j, k) = 300.0 + 120.0 * std::sin(0.2 * t + 0.5 * j + k) + rng.uniform(-40.0, 40.0);
                g.observed[g.offset(t, j, k)] = 1;
            }
    return g;
}

inline predict::TrainedModel tiny_model(const grid::GridSpec& spec, int lookback = 5, int horizon = 3,
                                        std::uint64_t seed = 3)
{
    nn::ModelDims d;
    d.n_distance = spec.n_distance_bins;
    d.lookback = lookback;
    d.horizon = horizon;
    d.filters = 4;
    predict::TrainedModel m;
    m.params = nn::init_params<float>(d, seed);
    // Lift the head so outputs sit away from the ReLU floor.
    auto hb = m.params.block(nn::Block::head_b);
    hb[0] = hb[1] = 0.4f;
    m.scaler = {60.0, 660.0};
    m.grid_spec = spec;
    m.window_spec.lookback = lookback;
    m.window_spec.horizon = horizon;
    return m;
}

inline Tensor<float> normalized_slice(const grid::HeadwayGrid& g, const grid::Scaler& s, int begin, int count)
{
    auto x = window::slice_frames(g, begin, count);
    for (auto& v : x.data) v = static_cast<float>(s.normalize(v));
    return x;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name)
{
    const auto p = std::filesystem::temp_directory_path() / ("headway_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace fixtures
