#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "headway/nn/kernels.hpp"
#include "headway/nn/params.hpp"
#include "headway/tensor.hpp"

namespace headway::nn {

/// Read-only view of one ConvLSTM layer inside a ModelParams block set.
template <class T>
struct LayerView {
    const T* w_x;  // [4F, C_in, K]
    const T* w_h;  // [4F, F, K]
    const T* b;    // [4F]
    int in_channels;
    int filters;
    int kernel;
};

template <class T>
LayerView<T> encoder_view(const ModelParams<T>& p);
template <class T>
LayerView<T> decoder_view(const ModelParams<T>& p);

enum class ConvRoute { gemm, reference };

/// One ConvLSTM step on [C_in x N_d] input and [F x N_d] state:
///   i, f, o = sigmoid(.), g = tanh(.), c = f*c_prev + i*g, h = o*tanh(c).
template <class T>
std::pair<Mat<T>, Mat<T>> cell_forward(const Mat<T>& x, const Mat<T>& h_prev, const Mat<T>& c_prev,
                                       const LayerView<T>& layer, ConvRoute route = ConvRoute::gemm);

/// Intermediates of one recurrent step, kept for the backward pass.
template <class T>
struct StepCache {
    Mat<T> cols_x;  // unfolded layer input (the T channels only, for the decoder)
    Mat<T> cols_h;  // unfolded previous hidden state
    Mat<T> gates;   // post-activation [4F x N_d], rows ordered i, f, o, g
    Mat<T> c;
    Mat<T> tanh_c;
    Mat<T> h;
};

template <class T>
struct ForwardCache {
    ModelDims dims;
    std::vector<StepCache<T>> encoder;
    std::vector<StepCache<T>> decoder;
    Mat<T> cols_context;   // unfolded final encoder hidden state
    std::vector<Mat<T>> head_pre;  // [N_dir x N_d] per decoder step
    bool valid = false;
};

/// Encoder over L frames, decoder over F steps fed [h_enc ; T broadcast], and
/// a 1x1 convolution + ReLU head. Shapes:
///   x        [L, N_d, N_dir, 1]
///   t_future [F, N_dir, 1]
///   result   [F, N_d, N_dir, 1]
/// The cache is filled when non-null.
template <class T>
Tensor<T> model_forward(const Tensor<T>& x, const Tensor<T>& t_future, const ModelParams<T>& params,
                        ForwardCache<T>* cache = nullptr, ConvRoute route = ConvRoute::gemm);

/// Mean squared error and its gradient with respect to y_hat.
template <class T>
std::pair<double, Tensor<T>> mse_loss(const Tensor<T>& y, const Tensor<T>& y_hat);

/// Backpropagation through the decoder and encoder recursions. Throws
/// std::logic_error when the cache is missing or belongs to other dims.
template <class T>
ModelParams<T> model_backward(const ForwardCache<T>& cache, const Tensor<T>& d_y_hat, const ModelParams<T>& params);

}  // namespace headway::nn
