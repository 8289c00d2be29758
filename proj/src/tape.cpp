#include "coastcast/tape.hpp"

#include <cmath>
#include <cstring>
#include <utility>

namespace coastcast {

template <typename S>
void Tape<S>::check(Var<S> v, const char* what) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
        throw ValueError(std::string(what) + ": variable does not belong to this tape");
    }
}

template <typename S>
Var<S> Tape<S>::push(Tensor<S> value, std::function<void(Tape&, const Tensor<S>&)> backprop, bool needs_grad) {
    nodes_.push_back(Node{std::move(value), std::move(backprop), needs_grad});
    return Var<S>{static_cast<int>(nodes_.size()) - 1};
}

template <typename S>
Tensor<S>& Tape<S>::grad_buf(int id) {
    if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
    Tensor<S>& g = grads_[static_cast<std::size_t>(id)];
    if (g.numel() == 0) g = Tensor<S>::zeros(val(id).shape);
    return g;
}

template <typename S>
Var<S> Tape<S>::leaf(Tensor<S> value, bool needs_grad) {
    return push(std::move(value), nullptr, needs_grad);
}

template <typename S>
const Tensor<S>& Tape<S>::value(Var<S> v) const {
    check(v, "value");
    return val(v.id);
}

template <typename S>
Tensor<S> Tape<S>::grad(Var<S> v) const {
    check(v, "grad");
    if (static_cast<std::size_t>(v.id) < grads_.size() && grads_[static_cast<std::size_t>(v.id)].numel() > 0) {
        return grads_[static_cast<std::size_t>(v.id)];
    }
    return Tensor<S>::zeros(val(v.id).shape);
}

template <typename S>
void Tape<S>::backward(Var<S> root) {
    check(root, "backward");
    if (val(root.id).numel() != 1) {
        throw ValueError("backward root must be scalar-valued, got shape " + shape_str(val(root.id).shape));
    }
    grads_.clear();
    grads_.resize(nodes_.size());
    grad_buf(root.id)[0] = S(1);
    for (int id = root.id; id >= 0; --id) {
        const Tensor<S>& g = grads_[static_cast<std::size_t>(id)];
        if (g.numel() == 0) continue;  // unreachable from root
        if (nodes_[static_cast<std::size_t>(id)].backprop) {
            nodes_[static_cast<std::size_t>(id)].backprop(*this, g);
        }
    }
}

template <typename S>
Var<S> Tape<S>::add(Var<S> a, Var<S> b) {
    check(a, "add");
    check(b, "add");
    const Tensor<S>& xa = val(a.id);
    const Tensor<S>& xb = val(b.id);
    if (!xa.same_shape(xb)) {
        throw ShapeError("add shape mismatch: " + shape_str(xa.shape) + " vs " + shape_str(xb.shape));
    }
    Tensor<S> y = xa;
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] += xb[i];
    const int ia = a.id, ib = b.id;
    return push(std::move(y), [ia, ib](Tape& t, const Tensor<S>& g) {
        Tensor<S>& ga = t.grad_buf(ia);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        Tensor<S>& gb = t.grad_buf(ib);
        for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
    });
}

template <typename S>
Var<S> Tape<S>::mul(Var<S> a, Var<S> b) {
    check(a, "mul");
    check(b, "mul");
    const Tensor<S>& xa = val(a.id);
    const Tensor<S>& xb = val(b.id);
    if (!xa.same_shape(xb)) {
        throw ShapeError("mul shape mismatch: " + shape_str(xa.shape) + " vs " + shape_str(xb.shape));
    }
    Tensor<S> y = xa;
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= xb[i];
    const int ia = a.id, ib = b.id;
    return push(std::move(y), [ia, ib](Tape& t, const Tensor<S>& g) {
        const Tensor<S>& va = t.val(ia);
        const Tensor<S>& vb = t.val(ib);
        Tensor<S>& ga = t.grad_buf(ia);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb[i];
        Tensor<S>& gb = t.grad_buf(ib);
        for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va[i];
    });
}

template <typename S>
Var<S> Tape<S>::scale(Var<S> a, double c) {
    check(a, "scale");
    Tensor<S> y = val(a.id);
    const S cs = static_cast<S>(c);
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= cs;
    const int ia = a.id;
    return push(std::move(y), [ia, cs](Tape& t, const Tensor<S>& g) {
        Tensor<S>& ga = t.grad_buf(ia);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * cs;
    });
}

template <typename S>
Var<S> Tape<S>::relu(Var<S> a) {
    check(a, "relu");
    Tensor<S> y = val(a.id);
    for (std::size_t i = 0; i < y.numel(); ++i) {
        if (y[i] < S(0)) y[i] = S(0);
    }
    const int ia = a.id;
    const int self = static_cast<int>(nodes_.size());
    return push(std::move(y), [ia, self](Tape& t, const Tensor<S>& g) {
        const Tensor<S>& out = t.val(self);
        Tensor<S>& ga = t.grad_buf(ia);
        for (std::size_t i = 0; i < g.numel(); ++i) {
            if (out[i] > S(0)) ga[i] += g[i];
        }
    });
}

template <typename S>
Var<S> Tape<S>::sum(Var<S> a) {
    check(a, "sum");
    const Tensor<S>& x = val(a.id);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) acc += static_cast<double>(x[i]);
    const int ia = a.id;
    return push(Tensor<S>::full({1}, static_cast<S>(acc)), [ia](Tape& t, const Tensor<S>& g) {
        Tensor<S>& ga = t.grad_buf(ia);
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g[0];
    });
}

template <typename S>
Var<S> Tape<S>::mean(Var<S> a) {
    check(a, "mean");
    const Tensor<S>& x = val(a.id);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) acc += static_cast<double>(x[i]);
    const double inv_n = 1.0 / static_cast<double>(x.numel());
    const int ia = a.id;
    return push(Tensor<S>::full({1}, static_cast<S>(acc * inv_n)), [ia, inv_n](Tape& t, const Tensor<S>& g) {
        Tensor<S>& ga = t.grad_buf(ia);
        const S gi = static_cast<S>(static_cast<double>(g[0]) * inv_n);
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += gi;
    });
}

template <typename S>
Var<S> Tape<S>::mse_against(Var<S> pred, const Tensor<S>& target) {
    check(pred, "mse");
    const Tensor<S>& p = val(pred.id);
    if (!p.same_shape(target)) {
        throw ShapeError("mse shape mismatch: " + shape_str(p.shape) + " vs " + shape_str(target.shape));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < p.numel(); ++i) {
        const double d = static_cast<double>(p[i]) - static_cast<double>(target[i]);
        acc += d * d;
    }
    const double inv_n = 1.0 / static_cast<double>(p.numel());
    const int ip = pred.id;
    Tensor<S> tgt = target;
    return push(Tensor<S>::full({1}, static_cast<S>(acc * inv_n)),
                [ip, inv_n, tgt = std::move(tgt)](Tape& t, const Tensor<S>& g) {
                    const Tensor<S>& p2 = t.val(ip);
                    Tensor<S>& gp = t.grad_buf(ip);
                    const double c = 2.0 * inv_n * static_cast<double>(g[0]);
                    for (std::size_t i = 0; i < gp.numel(); ++i) {
                        gp[i] += static_cast<S>(c * (static_cast<double>(p2[i]) - static_cast<double>(tgt[i])));
                    }
                });
}

template <typename S>
Var<S> Tape<S>::concat_channels(const std::vector<Var<S>>& xs) {
    if (xs.empty()) throw ValueError("concat_channels requires at least one input");
    std::vector<const Tensor<S>*> parts;
    std::vector<int> ids;
    parts.reserve(xs.size());
    for (Var<S> v : xs) {
        check(v, "concat_channels");
        parts.push_back(&val(v.id));
        ids.push_back(v.id);
    }
    const std::size_t axis = parts[0]->rank() - 1;
    Tensor<S> y = tensor_concat_views(parts, axis);
    std::vector<std::size_t> widths;
    for (const Tensor<S>* p : parts) widths.push_back(p->shape[axis]);
    return push(std::move(y), [ids, widths, axis](Tape& t, const Tensor<S>& g) {
        std::size_t total = 0;
        for (std::size_t w : widths) total += w;
        const std::size_t rows = g.numel() / total;
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            Tensor<S>& gi = t.grad_buf(ids[k]);
            const std::size_t w = widths[k];
            for (std::size_t r = 0; r < rows; ++r) {
                const S* src = g.ptr() + r * total + off;
                S* dst = gi.ptr() + r * w;
                for (std::size_t c = 0; c < w; ++c) dst[c] += src[c];
            }
            off += w;
        }
    });
}

template <typename S>
Var<S> Tape<S>::crop(Var<S> x, const std::vector<AxisRange>& ranges) {
    check(x, "crop");
    Tensor<S> y = tensor_crop(val(x.id), ranges);
    const int ix = x.id;
    const Shape out_shape = y.shape;
    return push(std::move(y), [ix, ranges, out_shape](Tape& t, const Tensor<S>& g) {
        Tensor<S>& gx = t.grad_buf(ix);
        const std::size_t rank = out_shape.size();
        std::vector<std::size_t> in_strides(rank, 1);
        for (std::size_t a = rank - 1; a-- > 0;) in_strides[a] = in_strides[a + 1] * gx.shape[a + 1];
        const std::size_t run = out_shape[rank - 1];
        const std::size_t rows = g.numel() / run;
        std::vector<std::size_t> coord(rank, 0);
        const S* src = g.ptr();
        for (std::size_t r = 0; r < rows; ++r) {
            std::size_t dst_off = ranges[rank - 1].first;
            for (std::size_t a = 0; a < rank - 1; ++a) dst_off += (coord[a] + ranges[a].first) * in_strides[a];
            S* dst = gx.ptr() + dst_off;
            for (std::size_t c = 0; c < run; ++c) dst[c] += src[c];
            src += run;
            for (std::size_t a = rank - 1; a-- > 0;) {
                if (++coord[a] < out_shape[a]) break;
                coord[a] = 0;
            }
        }
    });
}

template <typename S>
Var<S> Tape<S>::conv3d(Var<S> x, Var<S> w, Var<S> bias, Padding pad) {
    check(x, "conv3d");
    check(w, "conv3d");
    const Tensor<S>* b = nullptr;
    if (bias.valid()) {
        check(bias, "conv3d");
        b = &val(bias.id);
    }
    Tensor<S> y = detail::conv3d_forward(val(x.id), val(w.id), b, pad);
    const int ix = x.id, iw = w.id, ib = bias.valid() ? bias.id : -1;
    const bool x_grad = nodes_[static_cast<std::size_t>(x.id)].needs_grad;
    return push(std::move(y), [ix, iw, ib, pad, x_grad](Tape& t, const Tensor<S>& g) {
        Tensor<S>* gx = x_grad ? &t.grad_buf(ix) : nullptr;
        Tensor<S>& gw = t.grad_buf(iw);
        Tensor<S>* gb = nullptr;
        if (ib >= 0) gb = &t.grad_buf(ib);
        detail::conv3d_backward(t.val(ix), t.val(iw), g, pad, gx, &gw, gb);
    });
}

template <typename S>
Var<S> Tape<S>::maxpool_1x2x2(Var<S> x) {
    check(x, "maxpool");
    std::vector<std::uint32_t> argmax;
    Tensor<S> y = detail::maxpool_forward(val(x.id), &argmax);
    const int ix = x.id;
    return push(std::move(y), [ix, argmax = std::move(argmax)](Tape& t, const Tensor<S>& g) {
        Tensor<S>& gx = t.grad_buf(ix);
        detail::maxpool_backward(t.val(ix).shape, argmax, g, gx);
    });
}

template <typename S>
Var<S> Tape<S>::upsample_1x2x2(Var<S> x) {
    check(x, "upsample");
    Tensor<S> y = detail::upsample_forward(val(x.id));
    const int ix = x.id;
    return push(std::move(y), [ix](Tape& t, const Tensor<S>& g) {
        Tensor<S>& gx = t.grad_buf(ix);
        detail::upsample_backward(g, gx);
    });
}

template <typename S>
Var<S> Tape<S>::batchnorm(Var<S> x, Var<S> gamma, Var<S> beta,
                          Tensor<S>& running_mean, Tensor<S>& running_var,
                          double momentum, double eps, Mode mode) {
    check(x, "batchnorm");
    check(gamma, "batchnorm");
    check(beta, "batchnorm");
    detail::BnSaved<S> saved;
    Tensor<S> y = detail::batchnorm_forward(val(x.id), val(gamma.id), val(beta.id),
                                            running_mean, running_var, momentum, eps, mode, saved);
    const int ix = x.id, ig = gamma.id, ib = beta.id;
    return push(std::move(y), [ix, ig, ib, mode, saved = std::move(saved)](Tape& t, const Tensor<S>& g) {
        Tensor<S>& gx = t.grad_buf(ix);
        Tensor<S>& gg = t.grad_buf(ig);
        Tensor<S>& gb = t.grad_buf(ib);
        detail::batchnorm_backward(t.val(ix), t.val(ig), saved, mode, g, &gx, &gg, &gb);
    });
}

template <typename S>
Var<S> Tape<S>::dropout(Var<S> x, double rate, Mode mode, std::mt19937_64& rng) {
    check(x, "dropout");
    if (mode == Mode::Eval || rate == 0.0) {
        Tensor<S> y = val(x.id);
        const int ix = x.id;
        return push(std::move(y), [ix](Tape& t, const Tensor<S>& g) {
            Tensor<S>& gx = t.grad_buf(ix);
            for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
        });
    }
    std::vector<std::uint8_t> mask;
    Tensor<S> y = detail::dropout_forward(val(x.id), rate, rng, mask);
    const int ix = x.id;
    const S scale = static_cast<S>(1.0 / (1.0 - rate));
    return push(std::move(y), [ix, scale, mask = std::move(mask)](Tape& t, const Tensor<S>& g) {
        Tensor<S>& gx = t.grad_buf(ix);
        for (std::size_t i = 0; i < g.numel(); ++i) {
            if (mask[i]) gx[i] += g[i] * scale;
        }
    });
}

template class Tape<float>;
template class Tape<double>;

}  // namespace coastcast
