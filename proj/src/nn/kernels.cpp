#include "headway/nn/kernels.hpp"

#include <cassert>

namespace headway::nn {

template <class T>
void conv1d_reference(const Mat<T>& in, std::span<const T> w, int out_channels, int kernel, Mat<T>& out)
{
    const auto channels = static_cast<int>(in.rows());
    const auto positions = static_cast<int>(in.cols());
    const int half = kernel / 2;
    assert(w.size() == static_cast<std::size_t>(out_channels * channels * kernel));
    out.setZero(out_channels, positions);
    for (int o = 0; o < out_channels; ++o) {
        for (int p = 0; p < positions; ++p) {
            T acc{0};
            for (int c = 0; c < channels; ++c) {
                for (int k = 0; k < kernel; ++k) {
                    const int q = p + k - half;
                    if (q < 0 || q >= positions) continue;
                    acc += w[static_cast<std::size_t>((o * channels + c) * kernel + k)] * in(c, q);
                }
            }
            out(o, p) = acc;
        }
    }
}

template <class T>
void im2col(const Mat<T>& in, int kernel, Mat<T>& cols)
{
    const auto channels = in.rows();
    const auto positions = in.cols();
    const int half = kernel / 2;
    cols.setZero(channels * kernel, positions);
    for (Eigen::Index c = 0; c < channels; ++c) {
        for (int k = 0; k < kernel; ++k) {
            const int shift = k - half;
            const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
            const Eigen::Index hi = std::min<Eigen::Index>(positions, positions - shift);
            if (hi > lo) cols.row(c * kernel + k).segment(lo, hi - lo) = in.row(c).segment(lo + shift, hi - lo);
        }
    }
}

template <class T>
void col2im_add(const Mat<T>& dcols, int kernel, Mat<T>& din)
{
    const auto channels = din.rows();
    const auto positions = din.cols();
    const int half = kernel / 2;
    for (Eigen::Index c = 0; c < channels; ++c) {
        for (int k = 0; k < kernel; ++k) {
            const int shift = k - half;
            const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
            const Eigen::Index hi = std::min<Eigen::Index>(positions, positions - shift);
            if (hi > lo) din.row(c).segment(lo + shift, hi - lo) += dcols.row(c * kernel + k).segment(lo, hi - lo);
        }
    }
}

template <class T>
void conv1d_gemm(const Mat<T>& in, std::span<const T> w, int out_channels, int kernel, Mat<T>& out)
{
    Mat<T> cols;
    im2col(in, kernel, cols);
    const ConstMatMap<T> weights(w.data(), out_channels, in.rows() * kernel);
    out.noalias() = weights * cols;
}

#define HEADWAY_INSTANTIATE(T)                                                                  \
    template void conv1d_reference<T>(const Mat<T>&, std::span<const T>, int, int, Mat<T>&); \
    template void im2col<T>(const Mat<T>&, int, Mat<T>&);                                    \
    template void col2im_add<T>(const Mat<T>&, int, Mat<T>&);                                \
    template void conv1d_gemm<T>(const Mat<T>&, std::span<const T>, int, int, Mat<T>&);
HEADWAY_INSTANTIATE(float)
HEADWAY_INSTANTIATE(double)
#undef HEADWAY_INSTANTIATE

}  // namespace headway::nn
