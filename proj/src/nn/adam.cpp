#include "headway/nn/adam.hpp"

#include <cmath>

#include <fmt/format.h>

namespace headway::nn {

NonFiniteGradientError::NonFiniteGradientError(std::string b, std::size_t i)
    : std::runtime_error(fmt::format("non-finite gradient in block '{}' at element {}", b, i)),
      block(std::move(b)), index(i)
{
}

template <class T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state, double lr)
{
    const std::size_t n = params.data.size();
    if (grads.data.size() != n || state.first_moment.size() != n || state.second_moment.size() != n)
        throw ShapeError("adam_step: parameter, gradient and state sizes differ");
    for (const auto& info : ParamLayout::of(params.dims).blocks) {
        for (std::size_t i = 0; i < info.count; ++i)
            if (!std::isfinite(grads.data[info.offset + i]))
                throw NonFiniteGradientError(std::string(block_name(info.block)), i);
    }

    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    const T b1 = static_cast<T>(state.beta1);
    const T b2 = static_cast<T>(state.beta2);
    const T step = static_cast<T>(lr / bc1);
    const T inv_bc2 = static_cast<T>(1.0 / bc2);
    const T eps = static_cast<T>(state.epsilon);
    for (std::size_t i = 0; i < n; ++i) {
        const T g = grads.data[i];
        T& m = state.first_moment[i];
        T& v = state.second_moment[i];
        m = b1 * m + (T(1) - b1) * g;
        v = b2 * v + (T(1) - b2) * g * g;
        params.data[i] -= step * m / (std::sqrt(v * inv_bc2) + eps);
    }
}

template void adam_step<float>(ModelParams<float>&, const ModelParams<float>&, AdamState<float>&, double);
template void adam_step<double>(ModelParams<double>&, const ModelParams<double>&, AdamState<double>&, double);

}  // namespace headway::nn
