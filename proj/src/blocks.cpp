#include "coastcast/blocks.hpp"

#include <algorithm>
namespace coastcast {

std::vector<std::size_t> branch_widths(std::size_t out_channels, std::size_t num_branches) {
    if (num_branches == 0) throw ValueError("a block needs at least one branch");
    const std::size_t base = out_channels / num_branches;
    if (base == 0) return std::vector<std::size_t>(num_branches, 1);
    std::vector<std::size_t> widths(num_branches, base);
    widths[0] += out_channels - base * num_branches;
    return widths;
}

std::size_t reducer_channels(std::size_t in_channels) {
    return std::max<std::size_t>(1, in_channels / 2);
}

namespace {

template <typename S>
ConvNode add_conv(ParamStore<S>& store, std::mt19937_64& rng, const std::string& name,
                  std::size_t kt, std::size_t kh, std::size_t kw,
                  std::size_t cin, std::size_t cout, Padding pad = Padding::Same) {
    ConvNode node;
    node.spec = ConvSpec{kt, kh, kw, cin, cout, pad, true};
    LayerParams<S> p = he_init<S>(node.spec, rng());
    node.w = store.add(name + ".weight", std::move(p.weights));
    node.b = store.add(name + ".bias", std::move(p.bias));
    return node;
}

template <typename S>
BatchNormNode add_bn(ParamStore<S>& store, const std::string& name, std::size_t channels) {
    BatchNormNode node;
    node.channels = channels;
    node.gamma = store.add(name + ".gamma", Tensor<S>::full({channels}, S(1)));
    node.beta = store.add(name + ".beta", Tensor<S>::zeros({channels}));
    node.run_mean = store.add(name + ".running_mean", Tensor<S>::zeros({channels}), false);
    node.run_var = store.add(name + ".running_var", Tensor<S>::full({channels}, S(1)), false);
    return node;
}

template <typename S>
std::optional<ConvNode> add_proj(ParamStore<S>& store, std::mt19937_64& rng, const std::string& prefix,
                                 std::size_t cin, std::size_t cout) {
    if (cin == cout) return std::nullopt;
    return add_conv(store, rng, prefix + ".proj", 1, 1, 1, cin, cout);
}

template <typename S>
Var<S> bn_forward(const BatchNormNode& node, ForwardCtx<S>& ctx, Var<S> x) {
    return ctx.tape.batchnorm(x, ctx.leaves[static_cast<std::size_t>(node.gamma)],
                              ctx.leaves[static_cast<std::size_t>(node.beta)],
                              ctx.store[node.run_mean].value, ctx.store[node.run_var].value,
                              node.momentum, node.eps, ctx.mode);
}

template <typename S>
Var<S> skip_path(const std::optional<ConvNode>& proj, ForwardCtx<S>& ctx, Var<S> x) {
    if (proj) return conv_forward(*proj, ctx, x);
    return x;
}

}  // namespace

template <typename S>
AnyBlock make_block(const BlockBuild& build, const std::string& prefix, ParamStore<S>& store, std::mt19937_64& rng) {
    const std::size_t cin = build.in_channels, cout = build.out_channels;
    if (cin == 0 || cout == 0) throw ValueError("block channels must be positive");

    switch (build.kind) {
        case BlockKind::Plain: {
            PlainBlock b;
            b.c1 = add_conv(store, rng, prefix + ".conv1", 3, 3, 3, cin, cout);
            b.c2 = add_conv(store, rng, prefix + ".conv2", 3, 3, 3, cout, cout);
            return b;
        }
        case BlockKind::Residual: {
            ResidualBlock b;
            b.c1 = add_conv(store, rng, prefix + ".conv1", 3, 3, 3, cin, cout);
            b.c2 = add_conv(store, rng, prefix + ".conv2", 3, 3, 3, cout, cout);
            b.c3 = add_conv(store, rng, prefix + ".conv3", 3, 3, 3, cout, cout);
            b.bn = add_bn(store, prefix + ".bn", cout);
            b.proj = add_proj(store, rng, prefix, cin, cout);
            return b;
        }
        case BlockKind::InceptionResidual: {
            InceptionResBlock b;
            const std::size_t r = reducer_channels(cin);
            const std::vector<std::size_t> bw = branch_widths(cout, 3);
            b.red_a = add_conv(store, rng, prefix + ".a.reduce", 1, 1, 1, cin, r);
            b.red_b = add_conv(store, rng, prefix + ".b.reduce", 1, 1, 1, cin, r);
            b.red_c = add_conv(store, rng, prefix + ".c.reduce", 1, 1, 1, cin, r);
            b.br_a = add_conv(store, rng, prefix + ".a.conv", 1, 1, 1, r, bw[0]);
            b.br_b = add_conv(store, rng, prefix + ".b.conv", 3, 3, 3, r, bw[1]);
            b.br_c1 = add_conv(store, rng, prefix + ".c.conv1", 3, 3, 3, r, bw[2]);
            b.br_c2 = add_conv(store, rng, prefix + ".c.conv2", 3, 3, 3, bw[2], bw[2]);
            b.combiner = add_conv(store, rng, prefix + ".combine", 1, 1, 1, bw[0] + bw[1] + bw[2], cout);
            b.bn = add_bn(store, prefix + ".bn", cout);
            b.proj = add_proj(store, rng, prefix, cin, cout);
            return b;
        }
        case BlockKind::AsymmInceptionResidual: {
            AsymmInceptionResBlock b;
            const auto& ks = build.asymm_kernel_sizes;
            if (ks.empty()) throw ValueError("asymmetric block needs at least one branch kernel size");
            for (std::size_t k : ks) {
                if (k % 2 == 0) throw ValueError("asymmetric branch kernel sizes must be odd, got " + std::to_string(k));
            }
            const std::vector<std::size_t> bw = branch_widths(cout, ks.size());
            std::size_t concat_ch = 0;
            for (std::size_t i = 0; i < ks.size(); ++i) {
                const std::string bp = prefix + ".k" + std::to_string(ks[i]);
                AsymmChain chain;
                chain.along_t = add_conv(store, rng, bp + ".t", ks[i], 1, 1, cin, bw[i]);
                chain.along_h = add_conv(store, rng, bp + ".h", 1, ks[i], 1, bw[i], bw[i]);
                chain.along_w = add_conv(store, rng, bp + ".w", 1, 1, ks[i], bw[i], bw[i]);
                b.branches.push_back(chain);
                concat_ch += bw[i];
            }
            b.combiner = add_conv(store, rng, prefix + ".combine", 1, 1, 1, concat_ch, cout);
            b.bn = add_bn(store, prefix + ".bn", cout);
            b.proj = add_proj(store, rng, prefix, cin, cout);
            return b;
        }
    }
    throw ValueError("unknown block kind");
}

template <typename S>
Var<S> conv_forward(const ConvNode& node, ForwardCtx<S>& ctx, Var<S> x) {
    Var<S> w = ctx.leaves[static_cast<std::size_t>(node.w)];
    Var<S> b;
    if (node.b >= 0) b = ctx.leaves[static_cast<std::size_t>(node.b)];
    return ctx.tape.conv3d(x, w, b, node.spec.padding);
}

template <typename S>
Var<S> block_forward(const AnyBlock& block, ForwardCtx<S>& ctx, Var<S> x) {
    Tape<S>& t = ctx.tape;

    if (const auto* p = std::get_if<PlainBlock>(&block)) {
        Var<S> h = t.relu(conv_forward(p->c1, ctx, x));
        return t.relu(conv_forward(p->c2, ctx, h));
    }

    if (const auto* p = std::get_if<ResidualBlock>(&block)) {
        // conv -> relu -> conv -> relu -> conv -> BN, then add skip, final relu
        Var<S> h = t.relu(conv_forward(p->c1, ctx, x));
        h = t.relu(conv_forward(p->c2, ctx, h));
        h = conv_forward(p->c3, ctx, h);
        h = bn_forward(p->bn, ctx, h);
        Var<S> s = skip_path(p->proj, ctx, x);
        return t.relu(t.add(h, s));
    }

    if (const auto* p = std::get_if<InceptionResBlock>(&block)) {
        Var<S> a = t.relu(conv_forward(p->red_a, ctx, x));
        a = t.relu(conv_forward(p->br_a, ctx, a));
        Var<S> b = t.relu(conv_forward(p->red_b, ctx, x));
        b = t.relu(conv_forward(p->br_b, ctx, b));
        Var<S> c = t.relu(conv_forward(p->red_c, ctx, x));
        c = t.relu(conv_forward(p->br_c1, ctx, c));
        c = t.relu(conv_forward(p->br_c2, ctx, c));
        Var<S> merged = conv_forward(p->combiner, ctx, t.concat_channels({a, b, c}));
        merged = bn_forward(p->bn, ctx, merged);
        Var<S> s = skip_path(p->proj, ctx, x);
        return t.relu(t.add(merged, s));
    }

    const auto& p = std::get<AsymmInceptionResBlock>(block);
    std::vector<Var<S>> outs;
    outs.reserve(p.branches.size());
    for (const AsymmChain& chain : p.branches) {
        // the chain itself is linear; one activation per branch output
        Var<S> h = conv_forward(chain.along_t, ctx, x);
        h = conv_forward(chain.along_h, ctx, h);
        h = conv_forward(chain.along_w, ctx, h);
        outs.push_back(t.relu(h));
    }
    Var<S> merged = conv_forward(p.combiner, ctx, t.concat_channels(outs));
    merged = bn_forward(p.bn, ctx, merged);
    Var<S> s = skip_path(p.proj, ctx, x);
    return t.relu(t.add(merged, s));
}

template <typename S>
Tensor<S> asymm_conv_chain(const Tensor<S>& x, const Tensor<S>& k_t, const Tensor<S>& k_h, const Tensor<S>& k_w) {
    Tensor<S> h = detail::conv3d_forward(x, k_t, static_cast<const Tensor<S>*>(nullptr), Padding::Same);
    h = detail::conv3d_forward(h, k_h, static_cast<const Tensor<S>*>(nullptr), Padding::Same);
    return detail::conv3d_forward(h, k_w, static_cast<const Tensor<S>*>(nullptr), Padding::Same);
}

std::size_t block_param_count(const BlockBuild& build) {
    const std::size_t cin = build.in_channels, cout = build.out_channels;
    auto conv = [](std::size_t kt, std::size_t kh, std::size_t kw, std::size_t ci, std::size_t co) {
        return kt * kh * kw * ci * co + co;
    };
    const std::size_t proj = (cin != cout) ? conv(1, 1, 1, cin, cout) : 0;

    switch (build.kind) {
        case BlockKind::Plain:
            return conv(3, 3, 3, cin, cout) + conv(3, 3, 3, cout, cout);
        case BlockKind::Residual:
            return conv(3, 3, 3, cin, cout) + 2 * conv(3, 3, 3, cout, cout) + 2 * cout + proj;
        case BlockKind::InceptionResidual: {
            const std::size_t r = reducer_channels(cin);
            const auto bw = branch_widths(cout, 3);
            std::size_t p = 3 * conv(1, 1, 1, cin, r);
            p += conv(1, 1, 1, r, bw[0]);
            p += conv(3, 3, 3, r, bw[1]);
            p += conv(3, 3, 3, r, bw[2]) + conv(3, 3, 3, bw[2], bw[2]);
            p += conv(1, 1, 1, bw[0] + bw[1] + bw[2], cout) + 2 * cout + proj;
            return p;
        }
        case BlockKind::AsymmInceptionResidual: {
            const auto& ks = build.asymm_kernel_sizes;
            const auto bw = branch_widths(cout, ks.size());
            std::size_t p = 0, concat_ch = 0;
            for (std::size_t i = 0; i < ks.size(); ++i) {
                p += conv(ks[i], 1, 1, cin, bw[i]) + conv(1, ks[i], 1, bw[i], bw[i]) + conv(1, 1, ks[i], bw[i], bw[i]);
                concat_ch += bw[i];
            }
            p += conv(1, 1, 1, concat_ch, cout) + 2 * cout + proj;
            return p;
        }
    }
    throw ValueError("unknown block kind");
}

std::size_t block_conv_count(const BlockBuild& build) {
    const std::size_t proj = (build.in_channels != build.out_channels) ? 1 : 0;
    switch (build.kind) {
        case BlockKind::Plain:
            return 2;
        case BlockKind::Residual:
            return 3 + proj;
        case BlockKind::InceptionResidual:
            return 8 + proj;  // 3 reducers + 1 + 1 + 2 + combiner
        case BlockKind::AsymmInceptionResidual:
            return 3 * build.asymm_kernel_sizes.size() + 1 + proj;
    }
    throw ValueError("unknown block kind");
}

#define COASTCAST_INSTANTIATE_BLOCKS(S)                                                                     \
    template class ParamStore<S>;                                                                           \
    template AnyBlock make_block<S>(const BlockBuild&, const std::string&, ParamStore<S>&, std::mt19937_64&); \
    template Var<S> conv_forward<S>(const ConvNode&, ForwardCtx<S>&, Var<S>);                               \
    template Var<S> block_forward<S>(const AnyBlock&, ForwardCtx<S>&, Var<S>);                              \
    template Tensor<S> asymm_conv_chain<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);

COASTCAST_INSTANTIATE_BLOCKS(float)
COASTCAST_INSTANTIATE_BLOCKS(double)

#undef COASTCAST_INSTANTIATE_BLOCKS

}  // namespace coastcast
