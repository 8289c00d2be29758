#pragma once

#include <functional>
#include <random>
#include <vector>

#include "coastcast/detail/kernels.hpp"
#include "coastcast/tensor.hpp"

namespace coastcast {

// Handle to a recorded value. Only meaningful for the tape that issued it.
template <typename S>
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Define-by-run gradient tape. Nodes are appended in execution order, so
// inputs always precede their consumers; backward() is a single reverse
// sweep. A tape belongs to one forward/backward pass of one thread.
template <typename S>
class Tape {
public:
    // needs_grad=false marks constants (e.g. the input batch) whose gradient
    // nobody reads; expensive ops skip computing it.
    Var<S> leaf(Tensor<S> value, bool needs_grad = true);

    const Tensor<S>& value(Var<S> v) const;
    // Gradient of the last backward() root w.r.t. v; zeros if v was unreachable.
    Tensor<S> grad(Var<S> v) const;
    std::size_t size() const { return nodes_.size(); }

    // Reverse-mode sweep from a scalar root. Clears previous gradients first,
    // so repeated calls on the same tape yield identical results.
    void backward(Var<S> root);

    Var<S> add(Var<S> a, Var<S> b);
    Var<S> mul(Var<S> a, Var<S> b);
    Var<S> scale(Var<S> a, double c);
    Var<S> relu(Var<S> a);
    Var<S> sum(Var<S> a);
    Var<S> mean(Var<S> a);
    // Mean squared error against a constant target; scalar output.
    Var<S> mse_against(Var<S> pred, const Tensor<S>& target);
    Var<S> concat_channels(const std::vector<Var<S>>& xs);
    Var<S> crop(Var<S> x, const std::vector<AxisRange>& ranges);

    // bias may be an invalid Var for bias-free convolutions.
    Var<S> conv3d(Var<S> x, Var<S> w, Var<S> bias, Padding pad);
    Var<S> maxpool_1x2x2(Var<S> x);
    Var<S> upsample_1x2x2(Var<S> x);
    Var<S> batchnorm(Var<S> x, Var<S> gamma, Var<S> beta,
                     Tensor<S>& running_mean, Tensor<S>& running_var,
                     double momentum, double eps, Mode mode);
    Var<S> dropout(Var<S> x, double rate, Mode mode, std::mt19937_64& rng);

private:
    struct Node {
        Tensor<S> value;
        // Accumulates input gradients given this node's output gradient.
        std::function<void(Tape&, const Tensor<S>&)> backprop;
        bool needs_grad = true;
    };

    std::vector<Node> nodes_;
    std::vector<Tensor<S>> grads_;  // lazily allocated; empty means zero

    Var<S> push(Tensor<S> value, std::function<void(Tape&, const Tensor<S>&)> backprop, bool needs_grad = true);
    const Tensor<S>& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    Tensor<S>& grad_buf(int id);
    void check(Var<S> v, const char* what) const;
};

using VarF = Var<float>;
using VarD = Var<double>;
using TapeF = Tape<float>;
using TapeD = Tape<double>;

}  // namespace coastcast
