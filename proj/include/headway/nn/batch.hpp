#pragma once

#include <span>
#include <vector>

#include "headway/nn/params.hpp"
#include "headway/window.hpp"

namespace headway::nn {

enum class Execution { serial, parallel };

struct BatchGradient {
    double loss = 0.0;  // mean per-sample MSE
    ModelParams<float> grads;
};

/// Mean loss and gradient over `batch`. Per-sample gradients are summed in
/// batch order in both modes, so the parallel result is bit-identical to the
/// serial one for any thread count.
BatchGradient batch_gradient(const ModelParams<float>& params, std::span<const window::Sample* const> batch,
                             Execution exec = Execution::parallel);

/// Mean per-sample MSE with teacher-forced terminal inputs, forward only.
double dataset_loss(const ModelParams<float>& params, std::span<const window::Sample> samples,
                    Execution exec = Execution::parallel);

}  // namespace headway::nn
