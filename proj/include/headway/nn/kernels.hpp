#pragma once

#include <span>

#include <Eigen/Core>

namespace headway::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ConstMatMap = Eigen::Map<const Mat<T>>;

// Feature maps are [channels x positions] with positions along distance.
// Convolutions use zero padding of kernel/2 on both ends so the output keeps
// the input length.

/// Direct summation: out[o][p] = sum_c sum_k w[o][c][k] * in[c][p + k - K/2].
/// Serial reference kept for testing and benchmarking.
template <class T>
void conv1d_reference(const Mat<T>& in, std::span<const T> weights, int out_channels, int kernel, Mat<T>& out);

/// Unfolds [C x P] into [(C*K) x P] so the convolution becomes one GEMM.
template <class T>
void im2col(const Mat<T>& in, int kernel, Mat<T>& cols);

/// Adds the folded-back [(C*K) x P] gradient into [C x P].
template <class T>
void col2im_add(const Mat<T>& dcols, int kernel, Mat<T>& din);

/// GEMM route: out = W * im2col(in), with W viewed as [O x (C*K)].
template <class T>
void conv1d_gemm(const Mat<T>& in, std::span<const T> weights, int out_channels, int kernel, Mat<T>& out);

}  // namespace headway::nn
