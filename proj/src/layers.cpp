#include "coastcast/layers.hpp"

#include <cmath>

namespace coastcast {

template <typename S>
LayerParams<S> he_init(const ConvSpec& spec, std::uint64_t seed) {
    if (spec.in_channels == 0 || spec.out_channels == 0) {
        throw ValueError("he_init needs positive channel counts");
    }
    std::mt19937_64 rng(seed);
    const double bound = std::sqrt(6.0 / static_cast<double>(spec.fan_in()));
    LayerParams<S> p;
    p.weights = Tensor<S>::zeros({spec.kt, spec.kh, spec.kw, spec.in_channels, spec.out_channels});
    for (std::size_t i = 0; i < p.weights.numel(); ++i) {
        p.weights[i] = static_cast<S>((2.0 * detail::unit_uniform(rng) - 1.0) * bound);
    }
    if (spec.use_bias) p.bias = Tensor<S>::zeros({spec.out_channels});
    return p;
}

template <typename S>
Tensor<S> conv3d(const Tensor<S>& input, const ConvSpec& spec, const LayerParams<S>& params) {
    const Shape& ws = params.weights.shape;
    if (ws.size() != 5 || ws[0] != spec.kt || ws[1] != spec.kh || ws[2] != spec.kw ||
        ws[3] != spec.in_channels || ws[4] != spec.out_channels) {
        throw ShapeError("conv3d params do not match spec: weights " + shape_str(ws));
    }
    const Tensor<S>* bias = spec.use_bias ? &params.bias : nullptr;
    if (spec.use_bias && params.bias.numel() != spec.out_channels) {
        throw ShapeError("conv3d bias length mismatch");
    }
    return detail::conv3d_forward(input, params.weights, bias, spec.padding);
}

template <typename S>
Tensor<S> time_reduce_conv(const Tensor<S>& input, const LayerParams<S>& params) {
    const auto d = detail::dims5(input.shape, "time_reduce_conv");
    const Shape& ws = params.weights.shape;
    if (ws.size() != 5 || ws[1] != 1 || ws[2] != 1) {
        throw ShapeError("time_reduce_conv weights must be (L,1,1,Cin,Cout), got " + shape_str(ws));
    }
    if (ws[0] != d.t) {
        throw ShapeError("time_reduce_conv kernel temporal extent " + std::to_string(ws[0]) +
                         " must equal input lags " + std::to_string(d.t));
    }
    const Tensor<S>* bias = params.bias.numel() > 0 ? &params.bias : nullptr;
    return detail::conv3d_forward(input, params.weights, bias, Padding::Valid);
}

template <typename S>
Tensor<S> maxpool(const Tensor<S>& input) {
    return detail::maxpool_forward(input, nullptr);
}

template <typename S>
Tensor<S> upsample_nearest(const Tensor<S>& input) {
    return detail::upsample_forward(input);
}

template <typename S>
Tensor<S> batchnorm(const Tensor<S>& input, BatchNormState<S>& state, Mode mode) {
    detail::BnSaved<S> saved;
    return detail::batchnorm_forward(input, state.gamma, state.beta, state.running_mean,
                                     state.running_var, state.momentum, state.eps, mode, saved);
}

template <typename S>
Tensor<S> dropout(const Tensor<S>& input, const DropoutSpec& spec, Mode mode) {
    if (mode == Mode::Eval || spec.rate == 0.0) {
        if (spec.rate < 0.0 || spec.rate >= 1.0) throw ValueError("dropout rate must be in [0,1)");
        return input;
    }
    std::mt19937_64 rng(spec.seed);
    std::vector<std::uint8_t> mask;
    return detail::dropout_forward(input, spec.rate, rng, mask);
}

template <typename S>
Tensor<S> relu(const Tensor<S>& input) {
    Tensor<S> y = input;
    for (std::size_t i = 0; i < y.numel(); ++i) {
        if (y[i] < S(0)) y[i] = S(0);
    }
    return y;
}

#define COASTCAST_INSTANTIATE_LAYERS(S)                                                       \
    template LayerParams<S> he_init<S>(const ConvSpec&, std::uint64_t);                       \
    template Tensor<S> conv3d<S>(const Tensor<S>&, const ConvSpec&, const LayerParams<S>&);   \
    template Tensor<S> time_reduce_conv<S>(const Tensor<S>&, const LayerParams<S>&);          \
    template Tensor<S> maxpool<S>(const Tensor<S>&);                                          \
    template Tensor<S> upsample_nearest<S>(const Tensor<S>&);                                 \
    template Tensor<S> batchnorm<S>(const Tensor<S>&, BatchNormState<S>&, Mode);              \
    template Tensor<S> dropout<S>(const Tensor<S>&, const DropoutSpec&, Mode);                \
    template Tensor<S> relu<S>(const Tensor<S>&);

COASTCAST_INSTANTIATE_LAYERS(float)
COASTCAST_INSTANTIATE_LAYERS(double)

#undef COASTCAST_INSTANTIATE_LAYERS

}  // namespace coastcast
