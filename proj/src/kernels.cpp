#include "coastcast/detail/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace coastcast::detail {

Dims5 dims5(const Shape& shape, const char* what) {
    if (shape.size() != 5) {
        throw ShapeError(std::string(what) + " expects a (B,T,H,W,C) tensor, got " + shape_str(shape));
    }
    return {shape[0], shape[1], shape[2], shape[3], shape[4]};
}

std::size_t conv_out_extent(std::size_t in, std::size_t k, Padding pad, const char* axis) {
    if (pad == Padding::Same) return in;
    if (in < k) {
        throw ShapeError(std::string("valid convolution needs extent >= kernel on ") + axis + ": " +
                         std::to_string(in) + " < " + std::to_string(k));
    }
    return in - k + 1;
}

namespace {

struct ConvGeom {
    Dims5 in;
    std::size_t kt, kh, kw, co;
    std::size_t ot, oh, ow;
    // low-side padding; Same splits floor/ceil with the extra on the high end
    std::ptrdiff_t pt, ph, pw;
};

template <typename S>
ConvGeom conv_geometry(const Tensor<S>& x, const Tensor<S>& w, Padding pad) {
    ConvGeom g;
    g.in = dims5(x.shape, "conv3d input");
    if (w.rank() != 5) throw ShapeError("conv3d weights expect (kt,kh,kw,Cin,Cout), got " + shape_str(w.shape));
    g.kt = w.shape[0];
    g.kh = w.shape[1];
    g.kw = w.shape[2];
    if (w.shape[3] != g.in.c) {
        throw ShapeError("conv3d channel mismatch: input has " + std::to_string(g.in.c) +
                         ", weights expect " + std::to_string(w.shape[3]));
    }
    g.co = w.shape[4];
    g.ot = conv_out_extent(g.in.t, g.kt, pad, "T");
    g.oh = conv_out_extent(g.in.h, g.kh, pad, "H");
    g.ow = conv_out_extent(g.in.w, g.kw, pad, "W");
    if (pad == Padding::Same) {
        g.pt = static_cast<std::ptrdiff_t>((g.kt - 1) / 2);
        g.ph = static_cast<std::ptrdiff_t>((g.kh - 1) / 2);
        g.pw = static_cast<std::ptrdiff_t>((g.kw - 1) / 2);
    } else {
        g.pt = g.ph = g.pw = 0;
    }
    return g;
}

}  // namespace

template <typename S>
Tensor<S> conv3d_forward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>* bias, Padding pad) {
    const ConvGeom g = conv_geometry(x, w, pad);
    if (bias && bias->numel() != g.co) {
        throw ShapeError("conv3d bias length " + std::to_string(bias->numel()) + " != out channels " + std::to_string(g.co));
    }
    Tensor<S> y = Tensor<S>::zeros({g.in.b, g.ot, g.oh, g.ow, g.co});

    const std::size_t ci = g.in.c, co = g.co;
    const std::size_t xs_w = ci, xs_h = g.in.w * ci, xs_t = g.in.h * xs_h, xs_b = g.in.t * xs_t;
    const std::size_t ws_kw = ci * co, ws_kh = g.kw * ws_kw, ws_kt = g.kh * ws_kh;

    std::vector<S> acc(co);
    const S* xp = x.ptr();
    const S* wp = w.ptr();
    S* yp = y.ptr();

    for (std::size_t b = 0; b < g.in.b; ++b) {
        for (std::size_t to = 0; to < g.ot; ++to) {
            for (std::size_t ho = 0; ho < g.oh; ++ho) {
                for (std::size_t wo = 0; wo < g.ow; ++wo) {
                    if (bias) {
                        std::memcpy(acc.data(), bias->ptr(), co * sizeof(S));
                    } else {
                        std::fill(acc.begin(), acc.end(), S(0));
                    }
                    for (std::size_t kt = 0; kt < g.kt; ++kt) {
                        const std::ptrdiff_t it = static_cast<std::ptrdiff_t>(to + kt) - g.pt;
                        if (it < 0 || it >= static_cast<std::ptrdiff_t>(g.in.t)) continue;
                        for (std::size_t kh = 0; kh < g.kh; ++kh) {
                            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(ho + kh) - g.ph;
                            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in.h)) continue;
                            for (std::size_t kw = 0; kw < g.kw; ++kw) {
                                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(wo + kw) - g.pw;
                                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in.w)) continue;
                                const S* xin = xp + b * xs_b + static_cast<std::size_t>(it) * xs_t +
                                               static_cast<std::size_t>(ih) * xs_h + static_cast<std::size_t>(iw) * xs_w;
                                const S* wk = wp + kt * ws_kt + kh * ws_kh + kw * ws_kw;
                                for (std::size_t c = 0; c < ci; ++c) {
                                    const S xv = xin[c];
                                    const S* wrow = wk + c * co;
                                    for (std::size_t o = 0; o < co; ++o) acc[o] += xv * wrow[o];
                                }
                            }
                        }
                    }
                    std::memcpy(yp, acc.data(), co * sizeof(S));
                    yp += co;
                }
            }
        }
    }
    return y;
}

template <typename S>
void conv3d_backward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& dy, Padding pad,
                     Tensor<S>* dx, Tensor<S>* dw, Tensor<S>* db) {
    const ConvGeom g = conv_geometry(x, w, pad);
    const Dims5 od = dims5(dy.shape, "conv3d grad");
    if (od.b != g.in.b || od.t != g.ot || od.h != g.oh || od.w != g.ow || od.c != g.co) {
        throw ShapeError("conv3d upstream grad shape " + shape_str(dy.shape) + " does not match output");
    }
    const std::size_t ci = g.in.c, co = g.co;
    const std::size_t xs_w = ci, xs_h = g.in.w * ci, xs_t = g.in.h * xs_h, xs_b = g.in.t * xs_t;
    const std::size_t ws_kw = ci * co, ws_kh = g.kw * ws_kw, ws_kt = g.kh * ws_kh;

    const S* xp = x.ptr();
    const S* wp = w.ptr();
    const S* dyp = dy.ptr();
    S* dxp = dx ? dx->ptr() : nullptr;
    S* dwp = dw ? dw->ptr() : nullptr;
    S* dbp = db ? db->ptr() : nullptr;

    for (std::size_t b = 0; b < g.in.b; ++b) {
        for (std::size_t to = 0; to < g.ot; ++to) {
            for (std::size_t ho = 0; ho < g.oh; ++ho) {
                for (std::size_t wo = 0; wo < g.ow; ++wo, dyp += co) {
                    if (dbp) {
                        for (std::size_t o = 0; o < co; ++o) dbp[o] += dyp[o];
                    }
                    for (std::size_t kt = 0; kt < g.kt; ++kt) {
                        const std::ptrdiff_t it = static_cast<std::ptrdiff_t>(to + kt) - g.pt;
                        if (it < 0 || it >= static_cast<std::ptrdiff_t>(g.in.t)) continue;
                        for (std::size_t kh = 0; kh < g.kh; ++kh) {
                            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(ho + kh) - g.ph;
                            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in.h)) continue;
                            for (std::size_t kw = 0; kw < g.kw; ++kw) {
                                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(wo + kw) - g.pw;
                                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in.w)) continue;
                                const std::size_t xoff = b * xs_b + static_cast<std::size_t>(it) * xs_t +
                                                         static_cast<std::size_t>(ih) * xs_h +
                                                         static_cast<std::size_t>(iw) * xs_w;
                                const std::size_t woff = kt * ws_kt + kh * ws_kh + kw * ws_kw;
                                if (dwp) {
                                    const S* xin = xp + xoff;
                                    for (std::size_t c = 0; c < ci; ++c) {
                                        const S xv = xin[c];
                                        S* wrow = dwp + woff + c * co;
                                        for (std::size_t o = 0; o < co; ++o) wrow[o] += xv * dyp[o];
                                    }
                                }
                                if (dxp) {
                                    S* xin = dxp + xoff;
                                    for (std::size_t c = 0; c < ci; ++c) {
                                        const S* wrow = wp + woff + c * co;
                                        S a = S(0);
                                        for (std::size_t o = 0; o < co; ++o) a += wrow[o] * dyp[o];
                                        xin[c] += a;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

template <typename S>
Tensor<S> maxpool_forward(const Tensor<S>& x, std::vector<std::uint32_t>* argmax) {
    const Dims5 d = dims5(x.shape, "maxpool");
    if (d.h % 2 != 0 || d.w % 2 != 0) {
        throw ShapeError("maxpool (1,2,2) needs even H and W, got " + shape_str(x.shape));
    }
    if (x.numel() > UINT32_MAX) throw ShapeError("maxpool input too large for index tracking");
    Tensor<S> y = Tensor<S>::zeros({d.b, d.t, d.h / 2, d.w / 2, d.c});
    if (argmax) argmax->assign(y.numel(), 0);

    const std::size_t xs_h = d.w * d.c, xs_t = d.h * xs_h, xs_b = d.t * xs_t;
    const S* xp = x.ptr();
    S* yp = y.ptr();
    std::size_t oi = 0;
    for (std::size_t b = 0; b < d.b; ++b) {
        for (std::size_t t = 0; t < d.t; ++t) {
            for (std::size_t h = 0; h + 1 < d.h; h += 2) {
                for (std::size_t w = 0; w + 1 < d.w; w += 2) {
                    const std::size_t base = b * xs_b + t * xs_t + h * xs_h + w * d.c;
                    // scan order: (h,w), (h,w+1), (h+1,w), (h+1,w+1); strict > keeps first tie
                    const std::size_t offs[4] = {base, base + d.c, base + xs_h, base + xs_h + d.c};
                    for (std::size_t c = 0; c < d.c; ++c, ++oi) {
                        std::size_t best = offs[0] + c;
                        S bv = xp[best];
                        for (int k = 1; k < 4; ++k) {
                            const std::size_t idx = offs[k] + c;
                            if (xp[idx] > bv) {
                                bv = xp[idx];
                                best = idx;
                            }
                        }
                        yp[oi] = bv;
                        if (argmax) (*argmax)[oi] = static_cast<std::uint32_t>(best);
                    }
                }
            }
        }
    }
    return y;
}

template <typename S>
void maxpool_backward(const Shape& x_shape, const std::vector<std::uint32_t>& argmax,
                      const Tensor<S>& dy, Tensor<S>& dx) {
    (void)x_shape;
    const S* dyp = dy.ptr();
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[argmax[i]] += dyp[i];
}

template <typename S>
Tensor<S> upsample_forward(const Tensor<S>& x) {
    const Dims5 d = dims5(x.shape, "upsample");
    Tensor<S> y = Tensor<S>::zeros({d.b, d.t, d.h * 2, d.w * 2, d.c});
    const std::size_t ys_h = d.w * 2 * d.c;
    const S* xp = x.ptr();
    S* yp = y.ptr();
    std::size_t xi = 0;
    for (std::size_t b = 0; b < d.b; ++b) {
        for (std::size_t t = 0; t < d.t; ++t) {
            for (std::size_t h = 0; h < d.h; ++h) {
                S* row0 = yp + ((b * d.t + t) * d.h * 2 + h * 2) * ys_h;
                S* row1 = row0 + ys_h;
                for (std::size_t w = 0; w < d.w; ++w, xi += d.c) {
                    S* q0 = row0 + w * 2 * d.c;
                    S* q1 = row1 + w * 2 * d.c;
                    for (std::size_t c = 0; c < d.c; ++c) {
                        const S v = xp[xi + c];
                        q0[c] = v;
                        q0[d.c + c] = v;
                        q1[c] = v;
                        q1[d.c + c] = v;
                    }
                }
            }
        }
    }
    return y;
}

template <typename S>
void upsample_backward(const Tensor<S>& dy, Tensor<S>& dx) {
    const Dims5 d = dims5(dx.shape, "upsample grad");
    const std::size_t ys_h = d.w * 2 * d.c;
    const S* dyp = dy.ptr();
    S* dxp = dx.ptr();
    std::size_t xi = 0;
    for (std::size_t b = 0; b < d.b; ++b) {
        for (std::size_t t = 0; t < d.t; ++t) {
            for (std::size_t h = 0; h < d.h; ++h) {
                const S* row0 = dyp + ((b * d.t + t) * d.h * 2 + h * 2) * ys_h;
                const S* row1 = row0 + ys_h;
                for (std::size_t w = 0; w < d.w; ++w, xi += d.c) {
                    const S* q0 = row0 + w * 2 * d.c;
                    const S* q1 = row1 + w * 2 * d.c;
                    for (std::size_t c = 0; c < d.c; ++c) {
                        dxp[xi + c] += q0[c] + q0[d.c + c] + q1[c] + q1[d.c + c];
                    }
                }
            }
        }
    }
}

template <typename S>
Tensor<S> batchnorm_forward(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                            Tensor<S>& running_mean, Tensor<S>& running_var,
                            double momentum, double eps, Mode mode, BnSaved<S>& saved) {
    const Dims5 d = dims5(x.shape, "batchnorm");
    const std::size_t C = d.c;
    if (gamma.numel() != C || beta.numel() != C || running_mean.numel() != C || running_var.numel() != C) {
        throw ShapeError("batchnorm parameter length mismatch for " + std::to_string(C) + " channels");
    }
    const std::size_t n_per_c = x.numel() / C;
    if (n_per_c == 0 || d.b == 0) throw ValueError("batchnorm on an empty batch");

    saved.mean.assign(C, 0.0);
    saved.invstd.assign(C, 0.0);

    if (mode == Mode::Train) {
        std::vector<double> sum(C, 0.0), sumsq(C, 0.0);
        const S* xp = x.ptr();
        for (std::size_t i = 0; i < x.numel(); i += C) {
            for (std::size_t c = 0; c < C; ++c) {
                const double v = static_cast<double>(xp[i + c]);
                sum[c] += v;
                sumsq[c] += v * v;
            }
        }
        for (std::size_t c = 0; c < C; ++c) {
            const double mean = sum[c] / static_cast<double>(n_per_c);
            double var = sumsq[c] / static_cast<double>(n_per_c) - mean * mean;
            if (var < 0.0) var = 0.0;  // guard rounding
            saved.mean[c] = mean;
            saved.invstd[c] = 1.0 / std::sqrt(var + eps);
            running_mean[c] = static_cast<S>(momentum * static_cast<double>(running_mean[c]) + (1.0 - momentum) * mean);
            running_var[c] = static_cast<S>(momentum * static_cast<double>(running_var[c]) + (1.0 - momentum) * var);
        }
    } else {
        for (std::size_t c = 0; c < C; ++c) {
            saved.mean[c] = static_cast<double>(running_mean[c]);
            saved.invstd[c] = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps);
        }
    }

    Tensor<S> y = Tensor<S>::zeros(x.shape);
    const S* xp = x.ptr();
    S* yp = y.ptr();
    for (std::size_t i = 0; i < x.numel(); i += C) {
        for (std::size_t c = 0; c < C; ++c) {
            const double xhat = (static_cast<double>(xp[i + c]) - saved.mean[c]) * saved.invstd[c];
            yp[i + c] = static_cast<S>(static_cast<double>(gamma[c]) * xhat + static_cast<double>(beta[c]));
        }
    }
    return y;
}

template <typename S>
void batchnorm_backward(const Tensor<S>& x, const Tensor<S>& gamma, const BnSaved<S>& saved,
                        Mode mode, const Tensor<S>& dy,
                        Tensor<S>* dx, Tensor<S>* dgamma, Tensor<S>* dbeta) {
    const Dims5 d = dims5(x.shape, "batchnorm grad");
    const std::size_t C = d.c;
    const std::size_t n_per_c = x.numel() / C;
    const S* xp = x.ptr();
    const S* dyp = dy.ptr();

    std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
    for (std::size_t i = 0; i < x.numel(); i += C) {
        for (std::size_t c = 0; c < C; ++c) {
            const double g = static_cast<double>(dyp[i + c]);
            const double xhat = (static_cast<double>(xp[i + c]) - saved.mean[c]) * saved.invstd[c];
            sum_dy[c] += g;
            sum_dy_xhat[c] += g * xhat;
        }
    }
    if (dgamma) {
        for (std::size_t c = 0; c < C; ++c) (*dgamma)[c] += static_cast<S>(sum_dy_xhat[c]);
    }
    if (dbeta) {
        for (std::size_t c = 0; c < C; ++c) (*dbeta)[c] += static_cast<S>(sum_dy[c]);
    }
    if (!dx) return;

    S* dxp = dx->ptr();
    if (mode == Mode::Train) {
        const double n = static_cast<double>(n_per_c);
        for (std::size_t i = 0; i < x.numel(); i += C) {
            for (std::size_t c = 0; c < C; ++c) {
                const double g = static_cast<double>(dyp[i + c]);
                const double xhat = (static_cast<double>(xp[i + c]) - saved.mean[c]) * saved.invstd[c];
                const double t = g - sum_dy[c] / n - xhat * sum_dy_xhat[c] / n;
                dxp[i + c] += static_cast<S>(static_cast<double>(gamma[c]) * saved.invstd[c] * t);
            }
        }
    } else {
        for (std::size_t i = 0; i < x.numel(); i += C) {
            for (std::size_t c = 0; c < C; ++c) {
                dxp[i + c] += static_cast<S>(static_cast<double>(dyp[i + c]) *
                                             static_cast<double>(gamma[c]) * saved.invstd[c]);
            }
        }
    }
}

template <typename S>
Tensor<S> dropout_forward(const Tensor<S>& x, double rate, std::mt19937_64& rng, std::vector<std::uint8_t>& mask) {
    if (rate < 0.0 || rate >= 1.0) throw ValueError("dropout rate must be in [0,1), got " + std::to_string(rate));
    mask.assign(x.numel(), 1);
    Tensor<S> y = Tensor<S>::zeros(x.shape);
    const double keep = 1.0 - rate;
    const S scale = static_cast<S>(1.0 / keep);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        if (unit_uniform(rng) < rate) {
            mask[i] = 0;
        } else {
            y[i] = x[i] * scale;
        }
    }
    return y;
}

#define COASTCAST_INSTANTIATE_KERNELS(S)                                                                   \
    template Tensor<S> conv3d_forward<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>*, Padding);  \
    template void conv3d_backward<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, Padding,       \
                                     Tensor<S>*, Tensor<S>*, Tensor<S>*);                                  \
    template Tensor<S> maxpool_forward<S>(const Tensor<S>&, std::vector<std::uint32_t>*);                  \
    template void maxpool_backward<S>(const Shape&, const std::vector<std::uint32_t>&, const Tensor<S>&,   \
                                      Tensor<S>&);                                                         \
    template Tensor<S> upsample_forward<S>(const Tensor<S>&);                                              \
    template void upsample_backward<S>(const Tensor<S>&, Tensor<S>&);                                      \
    template Tensor<S> batchnorm_forward<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,          \
                                            Tensor<S>&, Tensor<S>&, double, double, Mode, BnSaved<S>&);    \
    template void batchnorm_backward<S>(const Tensor<S>&, const Tensor<S>&, const BnSaved<S>&, Mode,       \
                                        const Tensor<S>&, Tensor<S>*, Tensor<S>*, Tensor<S>*);             \
    template Tensor<S> dropout_forward<S>(const Tensor<S>&, double, std::mt19937_64&, std::vector<std::uint8_t>&);

COASTCAST_INSTANTIATE_KERNELS(float)
COASTCAST_INSTANTIATE_KERNELS(double)

#undef COASTCAST_INSTANTIATE_KERNELS

}  // namespace coastcast::detail
