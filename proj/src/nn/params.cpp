#include "headway/nn/params.hpp"

#include <cmath>

#include <fmt/format.h>

#include "headway/rng.hpp"

namespace headway::nn {

void ModelDims::validate() const
{
    auto fail = [](const std::string& what) { throw InvariantError("model dims: " + what); };
    if (n_distance < 1) fail("n_distance must be at least 1");
    if (n_directions != static_cast<int>(kNumDirections)) fail("n_directions must be 2");
    if (filters < 1) fail("filters must be at least 1");
    if (kernel < 1 || kernel % 2 == 0) fail("kernel must be odd and positive");
    if (lookback < 1 || horizon < 1) fail("lookback and horizon must be at least 1");
}

std::string_view block_name(Block b)
{
    switch (b) {
    case Block::encoder_w_x: return "encoder.w_x";
    case Block::encoder_w_h: return "encoder.w_h";
    case Block::encoder_b: return "encoder.b";
    case Block::decoder_w_x: return "decoder.w_x";
    case Block::decoder_w_h: return "decoder.w_h";
    case Block::decoder_b: return "decoder.b";
    case Block::head_w: return "head.w";
    case Block::head_b: return "head.b";
    }
    return "?";
}

ParamLayout ParamLayout::of(const ModelDims& d)
{
    const auto g = static_cast<std::size_t>(4 * d.filters);
    const auto f = static_cast<std::size_t>(d.filters);
    const auto k = static_cast<std::size_t>(d.kernel);
    const auto dir = static_cast<std::size_t>(d.n_directions);
    const std::array<std::vector<std::size_t>, kBlockCount> shapes{{
        {g, dir, k},
        {g, f, k},
        {g},
        {g, f + dir, k},
        {g, f, k},
        {g},
        {dir, f},
        {dir},
    }};
    ParamLayout layout;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < kBlockCount; ++i) {
        std::size_t count = 1;
        for (auto s : shapes[i]) count *= s;
        layout.blocks[i] = {static_cast<Block>(i), shapes[i], offset, count};
        offset += count;
    }
    layout.total = offset;
    return layout;
}

double glorot_bound(const ModelDims& d, Block b)
{
    const double k = d.kernel;
    const double gates = 4.0 * d.filters;
    switch (b) {
    case Block::encoder_w_x: return std::sqrt(6.0 / (d.n_directions * k + gates * k));
    case Block::encoder_w_h:
    case Block::decoder_w_h: return std::sqrt(6.0 / (d.filters * k + gates * k));
    case Block::decoder_w_x: return std::sqrt(6.0 / ((d.filters + d.n_directions) * k + gates * k));
    case Block::head_w: return std::sqrt(6.0 / (d.filters + d.n_directions));
    default: return 0.0;
    }
}

template <class T>
ModelParams<T> init_params(const ModelDims& dims, std::uint64_t seed)
{
    dims.validate();
    ModelParams<T> p(dims);
    Rng rng(seed);
    const auto layout = ParamLayout::of(dims);
    for (const auto& info : layout.blocks) {
        const double bound = glorot_bound(dims, info.block);
        auto values = p.block(info.block);
        if (bound > 0.0) {
            for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
        }
    }
    for (Block b : {Block::encoder_b, Block::decoder_b}) {
        auto bias = p.block(b);
        const auto f = static_cast<std::size_t>(dims.filters);
        for (std::size_t i = f; i < 2 * f; ++i) bias[i] = T{1};
    }
    return p;
}

template ModelParams<float> init_params<float>(const ModelDims&, std::uint64_t);
template ModelParams<double> init_params<double>(const ModelDims&, std::uint64_t);

}  // namespace headway::nn
