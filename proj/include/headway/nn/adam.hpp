#pragma once

#include <cstdint>
#include <vector>

#include "headway/nn/params.hpp"

namespace headway::nn {

template <class T>
struct AdamState {
    std::vector<T> first_moment;
    std::vector<T> second_moment;
    std::int64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    AdamState() = default;
    explicit AdamState(const ModelParams<T>& like)
        : first_moment(like.data.size(), T{}), second_moment(like.data.size(), T{})
    {
    }
};

/// Thrown before any parameter changes when a gradient entry is NaN or inf.
class NonFiniteGradientError : public std::runtime_error {
public:
    NonFiniteGradientError(std::string block, std::size_t index);
    std::string block;
    std::size_t index;
};

/// Bias-corrected Adam update in place.
template <class T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state, double learning_rate);

}  // namespace headway::nn
