#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "coastcast/tensor.hpp"

// Raw forward/backward kernels over (B,T,H,W,C) row-major tensors.
// Single-threaded with a fixed reduction order, so results are
// deterministic for a fixed input.

namespace coastcast {

enum class Padding { Same, Valid };
enum class Mode { Train, Eval };

namespace detail {

struct Dims5 {
    std::size_t b, t, h, w, c;
};

Dims5 dims5(const Shape& shape, const char* what);

// Output extent for one axis. Same preserves; Valid reduces by k-1.
std::size_t conv_out_extent(std::size_t in, std::size_t k, Padding pad, const char* axis);

template <typename S>
Tensor<S> conv3d_forward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>* bias, Padding pad);

// Accumulates into dx/dw/db (pass nullptr to skip one).
template <typename S>
void conv3d_backward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& dy, Padding pad,
                     Tensor<S>* dx, Tensor<S>* dw, Tensor<S>* db);

template <typename S>
Tensor<S> maxpool_forward(const Tensor<S>& x, std::vector<std::uint32_t>* argmax);

template <typename S>
void maxpool_backward(const Shape& x_shape, const std::vector<std::uint32_t>& argmax,
                      const Tensor<S>& dy, Tensor<S>& dx);

template <typename S>
Tensor<S> upsample_forward(const Tensor<S>& x);

template <typename S>
void upsample_backward(const Tensor<S>& dy, Tensor<S>& dx);

// Per-channel batch statistics saved for the backward pass.
template <typename S>
struct BnSaved {
    std::vector<double> mean;    // batch mean (Train) or running mean (Eval)
    std::vector<double> invstd;  // 1/sqrt(var + eps)
};

template <typename S>
Tensor<S> batchnorm_forward(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                            Tensor<S>& running_mean, Tensor<S>& running_var,
                            double momentum, double eps, Mode mode, BnSaved<S>& saved);

template <typename S>
void batchnorm_backward(const Tensor<S>& x, const Tensor<S>& gamma, const BnSaved<S>& saved,
                        Mode mode, const Tensor<S>& dy,
                        Tensor<S>* dx, Tensor<S>* dgamma, Tensor<S>* dbeta);

// Inverted dropout; mask bytes are 1 for survivors.
template <typename S>
Tensor<S> dropout_forward(const Tensor<S>& x, double rate, std::mt19937_64& rng, std::vector<std::uint8_t>& mask);

// Uniform double in [0,1) from the top 53 bits; identical across platforms.
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail
}  // namespace coastcast
