#include "headway/nn/batch.hpp"

#include "headway/nn/convlstm.hpp"

namespace headway::nn {
namespace {

double sample_gradient(const ModelParams<float>& params, const window::Sample& s, ModelParams<float>& grads)
{
    ForwardCache<float> cache;
    const auto y_hat = model_forward(s.x, s.t_future, params, &cache);
    auto [loss, d_y_hat] = mse_loss(s.y, y_hat);
    grads = model_backward(cache, d_y_hat, params);
    return loss;
}

double sample_loss(const ModelParams<float>& params, const window::Sample& s)
{
    return mse_loss(s.y, model_forward(s.x, s.t_future, params)).first;
}

}  // namespace

BatchGradient batch_gradient(const ModelParams<float>& params, std::span<const window::Sample* const> batch,
                             Execution exec)
{
    BatchGradient out{0.0, ModelParams<float>(params.dims)};
    if (batch.empty()) return out;
    const auto n = static_cast<std::ptrdiff_t>(batch.size());
    std::vector<double> losses(batch.size());

    if (exec == Execution::serial) {
        ModelParams<float> g;
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            losses[static_cast<std::size_t>(i)] = sample_gradient(params, *batch[static_cast<std::size_t>(i)], g);
            for (std::size_t j = 0; j < g.data.size(); ++j) out.grads.data[j] += g.data[j];
        }
    } else {
        std::vector<ModelParams<float>> per_sample(batch.size());
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const auto u = static_cast<std::size_t>(i);
            losses[u] = sample_gradient(params, *batch[u], per_sample[u]);
        }
        for (const auto& g : per_sample)
            for (std::size_t j = 0; j < g.data.size(); ++j) out.grads.data[j] += g.data[j];
    }

    const float inv = 1.0f / static_cast<float>(batch.size());
    for (auto& v : out.grads.data) v *= inv;
    for (double l : losses) out.loss += l;
    out.loss /= static_cast<double>(batch.size());
    return out;
}

double dataset_loss(const ModelParams<float>& params, std::span<const window::Sample> samples, Execution exec)
{
    if (samples.empty()) return 0.0;
    const auto n = static_cast<std::ptrdiff_t>(samples.size());
    std::vector<double> losses(samples.size());
    if (exec == Execution::serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i)
            losses[static_cast<std::size_t>(i)] = sample_loss(params, samples[static_cast<std::size_t>(i)]);
    } else {
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < n; ++i)
            losses[static_cast<std::size_t>(i)] = sample_loss(params, samples[static_cast<std::size_t>(i)]);
    }
    double total = 0.0;
    for (double l : losses) total += l;
    return total / static_cast<double>(samples.size());
}

}  // namespace headway::nn
