#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "headway/common.hpp"

namespace headway::nn {

/// Sizes of the encoder-decoder ConvLSTM. Directions are channels over a
/// [n_distance x 1] spatial grid, and the kernel runs along distance only.
struct ModelDims {
    int n_distance = 64;
    int n_directions = static_cast<int>(kNumDirections);
    int filters = 32;
    int kernel = 3;
    int lookback = 30;
    int horizon = 15;

    void validate() const;
    bool operator==(const ModelDims&) const = default;
};

/// Parameter blocks, in checkpoint order.
enum class Block : int {
    encoder_w_x = 0,  // [4F, N_dir, K]
    encoder_w_h,      // [4F, F, K]
    encoder_b,        // [4F]
    decoder_w_x,      // [4F, F + N_dir, K]; first F input channels are the encoder state
    decoder_w_h,      // [4F, F, K]
    decoder_b,        // [4F]
    head_w,           // [N_dir, F]
    head_b,           // [N_dir]
};
inline constexpr std::size_t kBlockCount = 8;

// Gate rows inside every 4F block: input, forget, output, candidate.
enum class Gate : int { input = 0, forget = 1, output = 2, candidate = 3 };

std::string_view block_name(Block b);

struct BlockInfo {
    Block block = Block::encoder_w_x;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t count = 0;
};

struct ParamLayout {
    std::array<BlockInfo, kBlockCount> blocks;
    std::size_t total = 0;

    static ParamLayout of(const ModelDims& dims);
    const BlockInfo& operator[](Block b) const { return blocks[static_cast<std::size_t>(b)]; }
};

/// All trainable values as one flat array so optimizers, checkpoints and
/// gradient checks can treat them uniformly.
template <class T>
struct ModelParams {
    ModelDims dims;
    std::vector<T> data;

    ModelParams() = default;
    explicit ModelParams(const ModelDims& d) : dims(d), data(ParamLayout::of(d).total, T{}) {}

    std::span<T> block(Block b)
    {
        const BlockInfo info = ParamLayout::of(dims)[b];
        return std::span<T>(data).subspan(info.offset, info.count);
    }
    std::span<const T> block(Block b) const
    {
        const BlockInfo info = ParamLayout::of(dims)[b];
        return std::span<const T>(data).subspan(info.offset, info.count);
    }

    template <class U>
    ModelParams<U> cast() const
    {
        ModelParams<U> out;
        out.dims = dims;
        out.data.assign(data.begin(), data.end());
        return out;
    }
};

/// Glorot-uniform kernels, zero biases except forget-gate bias = 1.
template <class T>
ModelParams<T> init_params(const ModelDims& dims, std::uint64_t seed);

/// sqrt(6 / (fan_in + fan_out)) for a kernel block; 0 for bias blocks.
double glorot_bound(const ModelDims& dims, Block b);

}  // namespace headway::nn
