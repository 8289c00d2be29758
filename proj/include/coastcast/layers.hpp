#pragma once

#include <cstdint>
#include <random>

#include "coastcast/detail/kernels.hpp"
#include "coastcast/tensor.hpp"

namespace coastcast {

struct ConvSpec {
    std::size_t kt = 3, kh = 3, kw = 3;
    std::size_t in_channels = 0, out_channels = 0;
    Padding padding = Padding::Same;
    bool use_bias = true;

    std::size_t param_count() const {
        return kt * kh * kw * in_channels * out_channels + (use_bias ? out_channels : 0);
    }
    std::size_t fan_in() const { return kt * kh * kw * in_channels; }
};

template <typename S>
struct LayerParams {
    Tensor<S> weights;  // (kt,kh,kw,Cin,Cout)
    Tensor<S> bias;     // (Cout), empty when bias-free
};

// Weights ~ Uniform(-b, b) with b = sqrt(6 / fan_in); bias zeros.
// Deterministic per seed.
template <typename S>
LayerParams<S> he_init(const ConvSpec& spec, std::uint64_t seed);

template <typename S>
struct BatchNormState {
    Tensor<S> gamma, beta;
    Tensor<S> running_mean, running_var;
    double momentum = 0.99;
    double eps = 1e-5;

    static BatchNormState make(std::size_t channels) {
        BatchNormState s;
        s.gamma = Tensor<S>::full({channels}, S(1));
        s.beta = Tensor<S>::zeros({channels});
        s.running_mean = Tensor<S>::zeros({channels});
        s.running_var = Tensor<S>::full({channels}, S(1));
        return s;
    }
};

struct DropoutSpec {
    double rate = 0.5;
    std::uint64_t seed = 0;
};

// Functional (forward-only) layer API over (B,T,H,W,C) tensors. The same
// kernels back the Tape ops, which add the gradients.
template <typename S>
Tensor<S> conv3d(const Tensor<S>& input, const ConvSpec& spec, const LayerParams<S>& params);

// L x 1 x 1 valid convolution collapsing the temporal extent to 1;
// a learned weighted average over lags.
template <typename S>
Tensor<S> time_reduce_conv(const Tensor<S>& input, const LayerParams<S>& params);

template <typename S>
Tensor<S> maxpool(const Tensor<S>& input);

template <typename S>
Tensor<S> upsample_nearest(const Tensor<S>& input);

template <typename S>
Tensor<S> batchnorm(const Tensor<S>& input, BatchNormState<S>& state, Mode mode);

template <typename S>
Tensor<S> dropout(const Tensor<S>& input, const DropoutSpec& spec, Mode mode);

template <typename S>
Tensor<S> relu(const Tensor<S>& input);

}  // namespace coastcast
