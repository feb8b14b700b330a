#include "headway/nn/convlstm.hpp"

#include <cmath>
#include <stdexcept>

namespace headway::nn {
namespace {

template <class T>
using MatMap = Eigen::Map<Mat<T>>;

template <class T>
const T* block_ptr(const ModelParams<T>& p, const ParamLayout& layout, Block b)
{
    return p.data.data() + layout[b].offset;
}

template <class T>
T* block_ptr(ModelParams<T>& p, const ParamLayout& layout, Block b)
{
    return p.data.data() + layout[b].offset;
}

// Applies bias and gate nonlinearities to the pre-activations in `a`
// (consumed) and advances the cell state.
template <class T>
void finish_step(Mat<T>& a, const T* bias, const Mat<T>& c_prev, int filters, StepCache<T>& s)
{
    const Eigen::Index f = filters;
    const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias, 4 * f);
    a.colwise() += b;
    auto sig = a.topRows(3 * f).array();
    sig = T(1) / (T(1) + (-sig).exp());
    a.bottomRows(f).array() = a.bottomRows(f).array().tanh();

    const auto i = a.topRows(f).array();
    const auto fg = a.middleRows(f, f).array();
    const auto o = a.middleRows(2 * f, f).array();
    const auto g = a.bottomRows(f).array();
    s.c = (fg * c_prev.array() + i * g).matrix();
    s.tanh_c = s.c.array().tanh().matrix();
    s.h = (o * s.tanh_c.array()).matrix();
    s.gates = std::move(a);
}

// dh: gradient reaching h of this step. dc: in = gradient from the next
// step's cell, out = gradient for c_prev. Writes gate pre-activation grads.
template <class T>
void gate_backward(const StepCache<T>& s, const Mat<T>& c_prev, const Mat<T>& dh, Mat<T>& dc, Mat<T>& da,
                   int filters)
{
    const Eigen::Index f = filters;
    const auto i = s.gates.topRows(f).array();
    const auto fg = s.gates.middleRows(f, f).array();
    const auto o = s.gates.middleRows(2 * f, f).array();
    const auto g = s.gates.bottomRows(f).array();
    const auto tc = s.tanh_c.array();

    const Mat<T> dct = (dc.array() + dh.array() * o * (T(1) - tc * tc)).matrix();
    da.resize(4 * f, s.gates.cols());
    da.topRows(f) = (dct.array() * g * i * (T(1) - i)).matrix();
    da.middleRows(f, f) = (dct.array() * c_prev.array() * fg * (T(1) - fg)).matrix();
    da.middleRows(2 * f, f) = (dh.array() * tc * o * (T(1) - o)).matrix();
    da.bottomRows(f) = (dct.array() * i * (T(1) - g * g)).matrix();
    dc = (dct.array() * fg).matrix();
}

template <class T>
void check_cache(const ForwardCache<T>& cache, const ModelParams<T>& params)
{
    if (!cache.valid) throw std::logic_error("model_backward: cache is missing or stale");
    if (!(cache.dims == params.dims)) throw std::logic_error("model_backward: cache belongs to different model dims");
    if (static_cast<int>(cache.encoder.size()) != params.dims.lookback ||
        static_cast<int>(cache.decoder.size()) != params.dims.horizon)
        throw std::logic_error("model_backward: cache has the wrong number of steps");
}

}  // namespace

template <class T>
LayerView<T> encoder_view(const ModelParams<T>& p)
{
    const auto layout = ParamLayout::of(p.dims);
    return {block_ptr(p, layout, Block::encoder_w_x), block_ptr(p, layout, Block::encoder_w_h),
            block_ptr(p, layout, Block::encoder_b), p.dims.n_directions, p.dims.filters, p.dims.kernel};
}

template <class T>
LayerView<T> decoder_view(const ModelParams<T>& p)
{
    const auto layout = ParamLayout::of(p.dims);
    return {block_ptr(p, layout, Block::decoder_w_x), block_ptr(p, layout, Block::decoder_w_h),
            block_ptr(p, layout, Block::decoder_b), p.dims.filters + p.dims.n_directions, p.dims.filters,
            p.dims.kernel};
}

template <class T>
std::pair<Mat<T>, Mat<T>> cell_forward(const Mat<T>& x, const Mat<T>& h_prev, const Mat<T>& c_prev,
                                       const LayerView<T>& layer, ConvRoute route)
{
    const int g = 4 * layer.filters;
    if (x.rows() != layer.in_channels || h_prev.rows() != layer.filters || c_prev.rows() != layer.filters ||
        h_prev.cols() != x.cols() || c_prev.cols() != x.cols())
        throw ShapeError("cell_forward: input/state shapes do not match the layer");
    const std::size_t nx = static_cast<std::size_t>(g * layer.in_channels * layer.kernel);
    const std::size_t nh = static_cast<std::size_t>(g * layer.filters * layer.kernel);
    Mat<T> a;
    Mat<T> tmp;
    if (route == ConvRoute::reference) {
        conv1d_reference<T>(x, {layer.w_x, nx}, g, layer.kernel, a);
        conv1d_reference<T>(h_prev, {layer.w_h, nh}, g, layer.kernel, tmp);
    } else {
        conv1d_gemm<T>(x, {layer.w_x, nx}, g, layer.kernel, a);
        conv1d_gemm<T>(h_prev, {layer.w_h, nh}, g, layer.kernel, tmp);
    }
    a += tmp;
    StepCache<T> s;
    finish_step(a, layer.b, c_prev, layer.filters, s);
    return {std::move(s.h), std::move(s.c)};
}

template <class T>
Tensor<T> model_forward(const Tensor<T>& x, const Tensor<T>& t_future, const ModelParams<T>& params,
                        ForwardCache<T>* cache, ConvRoute route)
{
    const auto& d = params.dims;
    const auto nd = static_cast<std::size_t>(d.n_distance);
    const auto ndir = static_cast<std::size_t>(d.n_directions);
    x.check({static_cast<std::size_t>(d.lookback), nd, ndir, 1}, "model_forward x");
    t_future.check({static_cast<std::size_t>(d.horizon), ndir, 1}, "model_forward t_future");
    if (params.data.size() != ParamLayout::of(d).total) throw ShapeError("model_forward: parameter count mismatch");

    const auto layout = ParamLayout::of(d);
    const int fl = d.filters;
    const int g = 4 * fl;
    const int k = d.kernel;
    const auto p = static_cast<Eigen::Index>(nd);
    const auto dirs = static_cast<Eigen::Index>(ndir);

    const ConstMatMap<T> enc_wx(block_ptr(params, layout, Block::encoder_w_x), g, dirs * k);
    const ConstMatMap<T> enc_wh(block_ptr(params, layout, Block::encoder_w_h), g, fl * k);
    const ConstMatMap<T> dec_wx(block_ptr(params, layout, Block::decoder_w_x), g, (fl + dirs) * k);
    const ConstMatMap<T> dec_wh(block_ptr(params, layout, Block::decoder_w_h), g, fl * k);
    const ConstMatMap<T> head_w(block_ptr(params, layout, Block::head_w), dirs, fl);
    const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> head_b(block_ptr(params, layout, Block::head_b), dirs);
    const std::span<const T> enc_wx_s(block_ptr(params, layout, Block::encoder_w_x), layout[Block::encoder_w_x].count);
    const std::span<const T> enc_wh_s(block_ptr(params, layout, Block::encoder_w_h), layout[Block::encoder_w_h].count);
    const std::span<const T> dec_wx_s(block_ptr(params, layout, Block::decoder_w_x), layout[Block::decoder_w_x].count);
    const std::span<const T> dec_wh_s(block_ptr(params, layout, Block::decoder_w_h), layout[Block::decoder_w_h].count);

    if (cache) {
        cache->dims = d;
        cache->encoder.clear();
        cache->decoder.clear();
        cache->head_pre.clear();
        cache->valid = false;
    }

    Mat<T> h = Mat<T>::Zero(fl, p);
    Mat<T> c = Mat<T>::Zero(fl, p);
    Mat<T> in(dirs, p);
    Mat<T> a;
    Mat<T> tmp;

    for (int l = 0; l < d.lookback; ++l) {
        for (Eigen::Index j = 0; j < p; ++j)
            for (Eigen::Index kd = 0; kd < dirs; ++kd)
                in(kd, j) = x.data[(static_cast<std::size_t>(l) * nd + static_cast<std::size_t>(j)) * ndir +
                                   static_cast<std::size_t>(kd)];
        StepCache<T> s;
        if (route == ConvRoute::gemm) {
            im2col(in, k, s.cols_x);
            im2col(h, k, s.cols_h);
            a.noalias() = enc_wx * s.cols_x;
            a.noalias() += enc_wh * s.cols_h;
        } else {
            conv1d_reference<T>(in, enc_wx_s, g, k, a);
            conv1d_reference<T>(h, enc_wh_s, g, k, tmp);
            a += tmp;
            if (cache) {
                im2col(in, k, s.cols_x);
                im2col(h, k, s.cols_h);
            }
        }
        finish_step(a, block_ptr(params, layout, Block::encoder_b), c, fl, s);
        h = s.h;
        c = s.c;
        if (cache) cache->encoder.push_back(std::move(s));
    }

    // The encoder state enters every decoder step unchanged, so its share of
    // the decoder input convolution is computed once.
    Mat<T> cols_context;
    im2col(h, k, cols_context);
    Mat<T> context_term;
    if (route == ConvRoute::gemm) context_term.noalias() = dec_wx.leftCols(fl * k) * cols_context;

    Tensor<T> out({static_cast<std::size_t>(d.horizon), nd, ndir, 1});
    Mat<T> in_t(dirs, p);
    Mat<T> full_in(fl + dirs, p);
    const Mat<T> context = h;
    for (int f = 0; f < d.horizon; ++f) {
        for (Eigen::Index kd = 0; kd < dirs; ++kd)
            in_t.row(kd).setConstant(t_future.data[static_cast<std::size_t>(f) * ndir + static_cast<std::size_t>(kd)]);
        StepCache<T> s;
        if (route == ConvRoute::gemm) {
            im2col(in_t, k, s.cols_x);
            im2col(h, k, s.cols_h);
            a = context_term;
            a.noalias() += dec_wx.rightCols(dirs * k) * s.cols_x;
            a.noalias() += dec_wh * s.cols_h;
        } else {
            full_in.topRows(fl) = context;
            full_in.bottomRows(dirs) = in_t;
            conv1d_reference<T>(full_in, dec_wx_s, g, k, a);
            conv1d_reference<T>(h, dec_wh_s, g, k, tmp);
            a += tmp;
            if (cache) {
                im2col(in_t, k, s.cols_x);
                im2col(h, k, s.cols_h);
            }
        }
        finish_step(a, block_ptr(params, layout, Block::decoder_b), c, fl, s);
        h = s.h;
        c = s.c;

        Mat<T> pre = head_w * h;
        pre.colwise() += head_b;
        for (Eigen::Index j = 0; j < p; ++j)
            for (Eigen::Index kd = 0; kd < dirs; ++kd)
                out.data[(static_cast<std::size_t>(f) * nd + static_cast<std::size_t>(j)) * ndir +
                         static_cast<std::size_t>(kd)] = std::max(pre(kd, j), T(0));
        if (cache) {
            cache->decoder.push_back(std::move(s));
            cache->head_pre.push_back(std::move(pre));
        }
    }
    if (cache) {
        cache->cols_context = std::move(cols_context);
        cache->valid = true;
    }
    return out;
}

template <class T>
std::pair<double, Tensor<T>> mse_loss(const Tensor<T>& y, const Tensor<T>& y_hat)
{
    if (y.shape != y_hat.shape || y.size() != y_hat.size()) throw ShapeError("mse_loss: shape mismatch");
    if (y.size() == 0) throw ShapeError("mse_loss: empty tensors");
    Tensor<T> grad(y.shape);
    const double n = static_cast<double>(y.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double diff = static_cast<double>(y_hat.data[i]) - static_cast<double>(y.data[i]);
        sum += diff * diff;
        grad.data[i] = static_cast<T>(2.0 * diff / n);
    }
    return {sum / n, std::move(grad)};
}

template <class T>
ModelParams<T> model_backward(const ForwardCache<T>& cache, const Tensor<T>& d_y_hat, const ModelParams<T>& params)
{
    check_cache(cache, params);
    const auto& d = params.dims;
    const auto nd = static_cast<std::size_t>(d.n_distance);
    const auto ndir = static_cast<std::size_t>(d.n_directions);
    d_y_hat.check({static_cast<std::size_t>(d.horizon), nd, ndir, 1}, "model_backward d_y_hat");

    const auto layout = ParamLayout::of(d);
    const int fl = d.filters;
    const int g = 4 * fl;
    const int k = d.kernel;
    const auto p = static_cast<Eigen::Index>(nd);
    const auto dirs = static_cast<Eigen::Index>(ndir);

    const ConstMatMap<T> enc_wh(block_ptr(params, layout, Block::encoder_w_h), g, fl * k);
    const ConstMatMap<T> dec_wx(block_ptr(params, layout, Block::decoder_w_x), g, (fl + dirs) * k);
    const ConstMatMap<T> dec_wh(block_ptr(params, layout, Block::decoder_w_h), g, fl * k);
    const ConstMatMap<T> head_w(block_ptr(params, layout, Block::head_w), dirs, fl);

    ModelParams<T> grads(d);
    MatMap<T> d_enc_wx(block_ptr(grads, layout, Block::encoder_w_x), g, dirs * k);
    MatMap<T> d_enc_wh(block_ptr(grads, layout, Block::encoder_w_h), g, fl * k);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> d_enc_b(block_ptr(grads, layout, Block::encoder_b), g);
    MatMap<T> d_dec_wx(block_ptr(grads, layout, Block::decoder_w_x), g, (fl + dirs) * k);
    MatMap<T> d_dec_wh(block_ptr(grads, layout, Block::decoder_w_h), g, fl * k);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> d_dec_b(block_ptr(grads, layout, Block::decoder_b), g);
    MatMap<T> d_head_w(block_ptr(grads, layout, Block::head_w), dirs, fl);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> d_head_b(block_ptr(grads, layout, Block::head_b), dirs);

    Mat<T> dh_next = Mat<T>::Zero(fl, p);
    Mat<T> dc = Mat<T>::Zero(fl, p);
    Mat<T> dz_sum = Mat<T>::Zero(g, p);
    Mat<T> dy(dirs, p);
    Mat<T> dh;
    Mat<T> da;
    Mat<T> dcols;

    for (int f = d.horizon - 1; f >= 0; --f) {
        const auto& s = cache.decoder[static_cast<std::size_t>(f)];
        const auto& pre = cache.head_pre[static_cast<std::size_t>(f)];
        for (Eigen::Index j = 0; j < p; ++j)
            for (Eigen::Index kd = 0; kd < dirs; ++kd) {
                const T grad = d_y_hat.data[(static_cast<std::size_t>(f) * nd + static_cast<std::size_t>(j)) * ndir +
                                            static_cast<std::size_t>(kd)];
                dy(kd, j) = pre(kd, j) > T(0) ? grad : T(0);
            }
        d_head_w.noalias() += dy * s.h.transpose();
        d_head_b += dy.rowwise().sum();
        dh = head_w.transpose() * dy;
        dh += dh_next;

        const Mat<T>& c_prev = f == 0 ? cache.encoder.back().c : cache.decoder[static_cast<std::size_t>(f - 1)].c;
        gate_backward(s, c_prev, dh, dc, da, fl);

        d_dec_wh.noalias() += da * s.cols_h.transpose();
        d_dec_wx.rightCols(dirs * k).noalias() += da * s.cols_x.transpose();
        d_dec_b += da.rowwise().sum();
        dz_sum += da;

        dcols.noalias() = dec_wh.transpose() * da;
        dh_next.setZero();
        col2im_add(dcols, k, dh_next);
    }

    // Encoder final state feeds the decoder both as its initial state and as
    // the constant context channels.
    d_dec_wx.leftCols(fl * k).noalias() += dz_sum * cache.cols_context.transpose();
    dcols.noalias() = dec_wx.leftCols(fl * k).transpose() * dz_sum;
    col2im_add(dcols, k, dh_next);

    const Mat<T> zero = Mat<T>::Zero(fl, p);
    for (int l = d.lookback - 1; l >= 0; --l) {
        const auto& s = cache.encoder[static_cast<std::size_t>(l)];
        const Mat<T>& c_prev = l == 0 ? zero : cache.encoder[static_cast<std::size_t>(l - 1)].c;
        dh = dh_next;
        gate_backward(s, c_prev, dh, dc, da, fl);
        d_enc_wx.noalias() += da * s.cols_x.transpose();
        d_enc_wh.noalias() += da * s.cols_h.transpose();
        d_enc_b += da.rowwise().sum();
        if (l > 0) {
            dcols.noalias() = enc_wh.transpose() * da;
            dh_next.setZero();
            col2im_add(dcols, k, dh_next);
        }
    }
    return grads;
}

#define HEADWAY_INSTANTIATE(T)                                                                                 \
    template LayerView<T> encoder_view<T>(const ModelParams<T>&);                                            \
    template LayerView<T> decoder_view<T>(const ModelParams<T>&);                                            \
    template std::pair<Mat<T>, Mat<T>> cell_forward<T>(const Mat<T>&, const Mat<T>&, const Mat<T>&,          \
                                                       const LayerView<T>&, ConvRoute);                     \
    template Tensor<T> model_forward<T>(const Tensor<T>&, const Tensor<T>&, const ModelParams<T>&,           \
                                        ForwardCache<T>*, ConvRoute);                                       \
    template std::pair<double, Tensor<T>> mse_loss<T>(const Tensor<T>&, const Tensor<T>&);                   \
    template ModelParams<T> model_backward<T>(const ForwardCache<T>&, const Tensor<T>&, const ModelParams<T>&);
HEADWAY_INSTANTIATE(float)
HEADWAY_INSTANTIATE(double)
#undef HEADWAY_INSTANTIATE

}  // namespace headway::nn
