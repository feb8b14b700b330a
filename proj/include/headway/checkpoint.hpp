#pragma once

#include <cstdint>
#include <filesystem>

#include "headway/grid.hpp"
#include "headway/nn/params.hpp"
#include "headway/trainer.hpp"
#include "headway/window.hpp"

namespace headway {

/// A trained model plus everything needed to feed it and read its output.
struct Checkpoint {
    nn::ModelParams<float> params;
    grid::Scaler scaler;
    grid::GridSpec grid_spec;
    window::WindowSpec window_spec;
    train::TrainHistory history;
    std::uint64_t seed = 0;
    int epoch = 0;
};

inline constexpr int kCheckpointVersion = 1;

/// Layout: 8-byte magic "HWCKPT01", u64 LE header length, JSON header
/// (version, dims, scaler, specs, seed, epoch, history, per-block offsets and
/// shapes, payload size and FNV-1a digest), then the float32 LE payload in
/// block order.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws CorruptFileError on truncation, bad magic, version or digest
/// mismatch, or header shapes that disagree with the payload.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Digest of the parameter payload, as stored in the header.
std::string params_digest(const nn::ModelParams<float>& params);

}  // namespace headway
