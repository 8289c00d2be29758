#pragma once

#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "coastcast/layers.hpp"
#include "coastcast/tape.hpp"

namespace coastcast {

enum class BlockKind { Plain, Residual, InceptionResidual, AsymmInceptionResidual };

// Named parameter registry for one model. Trainable entries become tape
// leaves during forward; non-trainable entries (batch-norm running stats)
// are read and updated in place.
template <typename S>
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor<S> value;
        bool trainable = true;
    };

    int add(std::string name, Tensor<S> value, bool trainable = true) {
        entries_.push_back(Entry{std::move(name), std::move(value), trainable});
        return static_cast<int>(entries_.size()) - 1;
    }
    std::size_t size() const { return entries_.size(); }
    Entry& operator[](int i) { return entries_[static_cast<std::size_t>(i)]; }
    const Entry& operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }
    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    int find(const std::string& name) const {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].name == name) return static_cast<int>(i);
        }
        return -1;
    }

private:
    std::vector<Entry> entries_;
};

// Layer descriptions hold store indices, never the tensors themselves.
struct ConvNode {
    ConvSpec spec;
    int w = -1;
    int b = -1;
};

struct BatchNormNode {
    int gamma = -1, beta = -1, run_mean = -1, run_var = -1;
    std::size_t channels = 0;
    double momentum = 0.99;
    double eps = 1e-5;
};

struct PlainBlock {
    ConvNode c1, c2;
};

struct ResidualBlock {
    ConvNode c1, c2, c3;
    BatchNormNode bn;
    std::optional<ConvNode> proj;
};

struct InceptionResBlock {
    ConvNode red_a, red_b, red_c;  // leading 1x1x1 reducers
    ConvNode br_a;                 // 1x1x1 branch
    ConvNode br_b;                 // 3x3x3 branch
    ConvNode br_c1, br_c2;         // two 3x3x3 = the 5x5x5 approximation
    ConvNode combiner;
    BatchNormNode bn;
    std::optional<ConvNode> proj;
};

// k x 1 x 1, then 1 x k x 1, then 1 x 1 x k.
struct AsymmChain {
    ConvNode along_t, along_h, along_w;
};

struct AsymmInceptionResBlock {
    std::vector<AsymmChain> branches;
    ConvNode combiner;
    BatchNormNode bn;
    std::optional<ConvNode> proj;
};

using AnyBlock = std::variant<PlainBlock, ResidualBlock, InceptionResBlock, AsymmInceptionResBlock>;

// Per-branch output widths: floor split with every branch at least 1 channel
// and the remainder assigned to the first branch.
std::vector<std::size_t> branch_widths(std::size_t out_channels, std::size_t num_branches);
std::size_t reducer_channels(std::size_t in_channels);  // max(1, in/2)

struct BlockBuild {
    BlockKind kind;
    std::size_t in_channels = 0, out_channels = 0;
    std::vector<std::size_t> asymm_kernel_sizes = {1, 3, 5, 7, 9};
};

template <typename S>
AnyBlock make_block(const BlockBuild& build, const std::string& prefix, ParamStore<S>& store, std::mt19937_64& rng);

template <typename S>
struct ForwardCtx {
    Tape<S>& tape;
    const std::vector<Var<S>>& leaves;  // store index -> leaf var (invalid for non-trainable)
    ParamStore<S>& store;
    Mode mode = Mode::Eval;
    std::mt19937_64* dropout_rng = nullptr;
};

template <typename S>
Var<S> conv_forward(const ConvNode& node, ForwardCtx<S>& ctx, Var<S> x);

template <typename S>
Var<S> block_forward(const AnyBlock& block, ForwardCtx<S>& ctx, Var<S> x);

// Three consecutive 1D convolutions with explicit kernels; the linear chain
// equals a full 3D convolution when the kernel is rank-1 separable.
template <typename S>
Tensor<S> asymm_conv_chain(const Tensor<S>& x, const Tensor<S>& k_t, const Tensor<S>& k_h, const Tensor<S>& k_w);

std::size_t block_param_count(const BlockBuild& build);
std::size_t block_conv_count(const BlockBuild& build);

}  // namespace coastcast
