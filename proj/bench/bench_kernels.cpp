// Serial reference kernels against the optimized/parallel routes.
#include <benchmark/benchmark.h>

#include "headway/nn/batch.hpp"
#include "headway/nn/convlstm.hpp"
#include "headway/rng.hpp"

using namespace headway;
using namespace headway::nn;

namespace {

Mat<float> random_mat(int rows, int cols, std::uint64_t seed)
{
    Rng rng(seed);
    Mat<float> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform(-1, 1));
    return m;
}

std::vector<float> random_vec(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    return v;
}

// Decoder-sized convolution: 34 input channels, 128 gate rows, 64 positions.
void BM_ConvReference(benchmark::State& state)
{
    const auto in = random_mat(34, 64, 1);
    const auto w = random_vec(128 * 34 * 3, 2);
    Mat<float> out;
    for (auto _ : state) {
        conv1d_reference<float>(in, w, 128, 3, out);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_ConvReference);

void BM_ConvGemm(benchmark::State& state)
{
    const auto in = random_mat(34, 64, 1);
    const auto w = random_vec(128 * 34 * 3, 2);
    Mat<float> out;
    for (auto _ : state) {
        conv1d_gemm<float>(in, w, 128, 3, out);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_ConvGemm);

void BM_ForwardReference(benchmark::State& state)
{
    const ModelDims d;
    const auto p = init_params<float>(d, 1);
    Tensor<float> x({30, 64, 2, 1});
    Tensor<float> t({15, 2, 1});
    x.data = random_vec(x.size(), 3);
    t.data = random_vec(t.size(), 4);
    for (auto _ : state) benchmark::DoNotOptimize(model_forward<float>(x, t, p, nullptr, ConvRoute::reference));
}
BENCHMARK(BM_ForwardReference)->Unit(benchmark::kMillisecond);

void BM_ForwardGemm(benchmark::State& state)
{
    const ModelDims d;
    const auto p = init_params<float>(d, 1);
    Tensor<float> x({30, 64, 2, 1});
    Tensor<float> t({15, 2, 1});
    x.data = random_vec(x.size(), 3);
    t.data = random_vec(t.size(), 4);
    for (auto _ : state) benchmark::DoNotOptimize(model_forward<float>(x, t, p, nullptr, ConvRoute::gemm));
}
BENCHMARK(BM_ForwardGemm)->Unit(benchmark::kMillisecond);

void batch_bench(benchmark::State& state, Execution exec)
{
    const ModelDims d;
    const auto p = init_params<float>(d, 1);
    std::vector<window::Sample> samples(32);
    std::uint64_t seed = 10;
    for (auto& s : samples) {
        s.x = Tensor<float>({30, 64, 2, 1});
        s.t_future = Tensor<float>({15, 2, 1});
        s.y = Tensor<float>({15, 64, 2, 1});
        s.x.data = random_vec(s.x.size(), seed++);
        s.t_future.data = random_vec(s.t_future.size(), seed++);
        s.y.data = random_vec(s.y.size(), seed++);
    }
    std::vector<const window::Sample*> batch;
    for (const auto& s : samples) batch.push_back(&s);
    for (auto _ : state) benchmark::DoNotOptimize(batch_gradient(p, batch, exec).loss);
}

void BM_BatchGradientSerial(benchmark::State& state) { batch_bench(state, Execution::serial); }
void BM_BatchGradientParallel(benchmark::State& state) { batch_bench(state, Execution::parallel); }
BENCHMARK(BM_BatchGradientSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
