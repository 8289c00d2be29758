// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion is a self-contained scaled-down experiment with
// its tolerances pinned in code. Run a subset with e.g. `acceptance 1 5 9`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <vector>

#include "coastcast/data.hpp"
#include "coastcast/gradcheck.hpp"
#include "coastcast/report.hpp"
#include "coastcast/training.hpp"

#include "../support/reference_conv.hpp"
#include "../support/testutil.hpp"

using namespace coastcast;
using coastcast::testing::rand_tensor;
using coastcast::testing::reference_conv3d;
using Clock = std::chrono::steady_clock;

namespace {

struct Criterion {
    int id;
    const char* name;
    std::function<bool(std::string&)> run;
};

bool all_finite(const TensorF& t) {
    for (float v : t.data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

// ---------------------------------------------------------------- criterion 1
bool conv_oracle(std::string& detail) {
    std::mt19937_64 rng(101);
    double worst64 = 0.0, worst32 = 0.0;
    int cases = 0;
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t T = 1 + rng() % 4, H = 1 + rng() % 7, W = 1 + rng() % 7;
        const std::size_t CI = 1 + rng() % 3, CO = 1 + rng() % 4;
        std::size_t kt = 1 + rng() % 3, kh = 1 + rng() % 3, kw = 1 + rng() % 3;
        const Padding pad = (trial % 2 == 0) ? Padding::Same : Padding::Valid;
        if (pad == Padding::Valid) {
            kt = std::min(kt, T);
            kh = std::min(kh, H);
            kw = std::min(kw, W);
        }
        {
            TensorD x = rand_tensor<double>(rng, {1, T, H, W, CI});
            TensorD w = rand_tensor<double>(rng, {kt, kh, kw, CI, CO});
            TensorD b = rand_tensor<double>(rng, {CO});
            TensorD got = detail::conv3d_forward(x, w, &b, pad);
            TensorD want = reference_conv3d(x, w, &b, pad);
            worst64 = std::max(worst64, coastcast::testing::max_abs_diff(got, want));
        }
        {
            TensorF x = rand_tensor<float>(rng, {1, T, H, W, CI});
            TensorF w = rand_tensor<float>(rng, {kt, kh, kw, CI, CO});
            TensorF b = rand_tensor<float>(rng, {CO});
            TensorF got = detail::conv3d_forward(x, w, &b, pad);
            TensorF want = reference_conv3d(x, w, &b, pad);
            worst32 = std::max(worst32, coastcast::testing::max_abs_diff(got, want));
        }
        cases += 2;
    }
    std::ostringstream os;
    os << cases << " cases, max |diff| f64 " << worst64 << ", f32 " << worst32;
    detail = os.str();
    return worst64 < 1e-12 && worst32 < 1e-5;
}

// ---------------------------------------------------------------- criterion 2
struct GradProbe {
    std::string name;
    std::function<double(const TensorD&)> loss;   // loss as a function of the probed tensor
    TensorD at;                                   // probe point
    std::function<TensorD()> analytic;            // backward-pass gradient at `at`
};

bool gradient_suite(std::string& detail) {
    std::mt19937_64 rng(202);
    double worst = 0.0;
    std::string worst_name = "-";
    int checks = 0;

    auto check = [&](const std::string& name, const TensorD& analytic, const TensorD& numeric) {
        GradCheckResult r = compare_grads(analytic, numeric);
        ++checks;
        if (r.max_rel_err > worst) {
            worst = r.max_rel_err;
            worst_name = name;
        }
        return r.ok;
    };

    bool ok = true;

    // layers: conv (same/valid), time reducer, pool, upsample, bn (train/eval),
    // dropout, relu, mse
    for (Padding pad : {Padding::Same, Padding::Valid}) {
        TensorD x = rand_tensor<double>(rng, {2, 2, 4, 4, 2});
        TensorD w = rand_tensor<double>(rng, {2, 3, 3, 2, 3});
        TensorD b = rand_tensor<double>(rng, {3}, 0.05, 0.3);
        auto loss_of = [&](const TensorD& xt, const TensorD& wt, const TensorD& bt) {
            TapeD t;
            auto y = t.mean(t.relu(t.conv3d(t.leaf(xt), t.leaf(wt), t.leaf(bt), pad)));
            return static_cast<double>(t.value(y)[0]);
        };
        TapeD t;
        auto xv = t.leaf(x), wv = t.leaf(w), bv = t.leaf(b);
        t.backward(t.mean(t.relu(t.conv3d(xv, wv, bv, pad))));
        const char* tag = pad == Padding::Same ? "conv-same" : "conv-valid";
        ok &= check(std::string(tag) + "/x", t.grad(xv),
                    finite_diff_grad([&](const TensorD& p) { return loss_of(p, w, b); }, x, 1e-5));
        ok &= check(std::string(tag) + "/w", t.grad(wv),
                    finite_diff_grad([&](const TensorD& p) { return loss_of(x, p, b); }, w, 1e-5));
        ok &= check(std::string(tag) + "/b", t.grad(bv),
                    finite_diff_grad([&](const TensorD& p) { return loss_of(x, w, p); }, b, 1e-5));
    }
    {
        // the L x 1 x 1 valid time reducer
        TensorD x = rand_tensor<double>(rng, {1, 5, 3, 3, 2});
        TensorD w = rand_tensor<double>(rng, {5, 1, 1, 2, 2});
        auto loss_of = [&](const TensorD& xt, const TensorD& wt) {
            TapeD t;
            VarD none;
            auto y = t.mean(t.conv3d(t.leaf(xt), t.leaf(wt), none, Padding::Valid));
            return static_cast<double>(t.value(y)[0]);
        };
        TapeD t;
        VarD none;
        auto xv = t.leaf(x), wv = t.leaf(w);
        t.backward(t.mean(t.conv3d(xv, wv, none, Padding::Valid)));
        ok &= check("time-reduce/x", t.grad(xv),
                    finite_diff_grad([&](const TensorD& p) { return loss_of(p, w); }, x, 1e-5));
        ok &= check("time-reduce/w", t.grad(wv),
                    finite_diff_grad([&](const TensorD& p) { return loss_of(x, p); }, w, 1e-5));
    }
    {
        TensorD x = rand_tensor<double>(rng, {1, 2, 4, 4, 2});
        auto pool_loss = [](const TensorD& p) {
            TapeD t;
            auto y = t.mean(t.maxpool_1x2x2(t.leaf(p)));
            return static_cast<double>(t.value(y)[0]);
        };
        TapeD t;
        auto xv = t.leaf(x);
        t.backward(t.mean(t.maxpool_1x2x2(xv)));
        ok &= check("maxpool/x", t.grad(xv), finite_diff_grad(pool_loss, x, 1e-5));

        auto up_loss = [](const TensorD& p) {
            TapeD t2;
            auto v = t2.leaf(p);
            auto y = t2.mean(t2.mul(t2.upsample_1x2x2(v), t2.upsample_1x2x2(v)));
            return static_cast<double>(t2.value(y)[0]);
        };
        TapeD t2;
        auto xv2 = t2.leaf(x);
        t2.backward(t2.mean(t2.mul(t2.upsample_1x2x2(xv2), t2.upsample_1x2x2(xv2))));
        ok &= check("upsample/x", t2.grad(xv2), finite_diff_grad(up_loss, x, 1e-5));
    }
    for (Mode mode : {Mode::Train, Mode::Eval}) {
        TensorD x = rand_tensor<double>(rng, {2, 1, 3, 3, 2});
        TensorD gm = rand_tensor<double>(rng, {2}, 0.5, 1.5);
        TensorD bt = rand_tensor<double>(rng, {2}, -0.5, 0.5);
        TensorD rm = rand_tensor<double>(rng, {2}, -0.3, 0.3);
        TensorD rv = rand_tensor<double>(rng, {2}, 0.5, 1.5);
        auto loss_of = [&](const TensorD& xt, const TensorD& gt, const TensorD& bt2) {
            TapeD t;
            TensorD rm2 = rm, rv2 = rv;
            auto y = t.batchnorm(t.leaf(xt), t.leaf(gt), t.leaf(bt2), rm2, rv2, 0.99, 1e-5, mode);
            auto l = t.mean(t.mul(y, y));
            return static_cast<double>(t.value(l)[0]);
        };
        TapeD t;
        TensorD rm2 = rm, rv2 = rv;
        auto xv = t.leaf(x), gv = t.leaf(gm), bv = t.leaf(bt);
        auto y = t.batchnorm(xv, gv, bv, rm2, rv2, 0.99, 1e-5, mode);
        t.backward(t.mean(t.mul(y, y)));
        const char* tag = mode == Mode::Train ? "bn-train" : "bn-eval";
        ok &= check(std::string(tag) + "/x", t.grad(xv),
                    finite_diff_grad([&](const TensorD& p) { return loss_of(p, gm, bt); }, x, 1e-5));
        ok &= check(std::string(tag) + "/gamma", t.grad(gv),
                    finite_diff_grad([&](const TensorD& p) { return loss_of(x, p, bt); }, gm, 1e-5));
        ok &= check(std::string(tag) + "/beta", t.grad(bv),
                    finite_diff_grad([&](const TensorD& p) { return loss_of(x, gm, p); }, bt, 1e-5));
    }
    {
        TensorD x = rand_tensor<double>(rng, {1, 1, 4, 4, 2});
        auto drop_loss = [&](const TensorD& p) {
            TapeD t;
            std::mt19937_64 drng(99);
            auto y = t.dropout(t.leaf(p), 0.4, Mode::Train, drng);
            auto l = t.mean(t.mul(y, y));
            return static_cast<double>(t.value(l)[0]);
        };
        TapeD t;
        std::mt19937_64 drng(99);
        auto xv = t.leaf(x);
        auto y = t.dropout(xv, 0.4, Mode::Train, drng);
        t.backward(t.mean(t.mul(y, y)));
        ok &= check("dropout/x", t.grad(xv), finite_diff_grad(drop_loss, x, 1e-5));
    }
    {
        TensorD p = rand_tensor<double>(rng, {1, 1, 3, 3, 2});
        TensorD tgt = rand_tensor<double>(rng, {1, 1, 3, 3, 2});
        auto mse_of = [&](const TensorD& probe) {
            TapeD t;
            auto l = t.mse_against(t.leaf(probe), tgt);
            return static_cast<double>(t.value(l)[0]);
        };
        TapeD t;
        auto pv = t.leaf(p);
        t.backward(t.mse_against(pv, tgt));
        ok &= check("mse/pred", t.grad(pv), finite_diff_grad(mse_of, p, 1e-5));
    }

    // blocks: input and every trainable parameter, train mode
    for (BlockKind kind : {BlockKind::Plain, BlockKind::Residual, BlockKind::InceptionResidual,
                           BlockKind::AsymmInceptionResidual}) {
        ParamStore<double> store;
        BlockBuild build{kind, 2, 2, {1, 3}};
        std::mt19937_64 brng(42 + static_cast<int>(kind));
        AnyBlock block = make_block(build, "blk", store, brng);
        for (auto& e : store.entries()) {
            if (e.name.find(".bias") != std::string::npos) {
                for (std::size_t i = 0; i < e.value.numel(); ++i) {
                    e.value[i] = coastcast::testing::uniform(brng, 0.01, 0.1);
                }
            }
        }
        TensorD x = rand_tensor<double>(rng, {1, 2, 5, 5, 2});

        const std::string kname = "block" + std::to_string(static_cast<int>(kind));
        Tape<double> tape;
        std::vector<Var<double>> leaves(store.size());
        for (std::size_t i = 0; i < store.size(); ++i) {
            if (store[static_cast<int>(i)].trainable) leaves[i] = tape.leaf(store[static_cast<int>(i)].value);
        }
        auto store_copy = store;
        ForwardCtx<double> ctx{tape, leaves, store_copy, Mode::Train, nullptr};
        auto xv = tape.leaf(x);
        auto out = block_forward(block, ctx, xv);
        tape.backward(tape.mean(tape.mul(out, out)));

        auto loss_with = [&](ParamStore<double>& st, const TensorD& input) {
            Tape<double> t;
            std::vector<Var<double>> lv(st.size());
            for (std::size_t i = 0; i < st.size(); ++i) {
                if (st[static_cast<int>(i)].trainable) lv[i] = t.leaf(st[static_cast<int>(i)].value);
            }
            auto st2 = st;
            ForwardCtx<double> c2{t, lv, st2, Mode::Train, nullptr};
            auto o = block_forward(block, c2, t.leaf(input));
            auto l = t.mean(t.mul(o, o));
            return static_cast<double>(t.value(l)[0]);
        };

        ok &= check(kname + "/x", tape.grad(xv),
                    finite_diff_grad([&](const TensorD& p) { return loss_with(store, p); }, x, 1e-5));
        for (std::size_t i = 0; i < store.size(); ++i) {
            if (!store[static_cast<int>(i)].trainable) continue;
            auto fd = finite_diff_grad(
                [&](const TensorD& p) {
                    auto st = store;
                    st[static_cast<int>(i)].value = p;
                    return loss_with(st, x);
                },
                store[static_cast<int>(i)].value, 1e-5);
            ok &= check(kname + "/" + store[static_cast<int>(i)].name, tape.grad(leaves[i]), fd);
        }
    }

    std::ostringstream os;
    os << checks << " gradient checks, worst rel err " << worst << " (" << worst_name << ")";
    detail = os.str();
    return ok;
}

// ---------------------------------------------------------------- criterion 3
bool separable_equivalence(std::string& detail) {
    std::mt19937_64 rng(303);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 3;
        TensorD a = rand_tensor<double>(rng, {k, 1, 1, 1, 1});
        TensorD b = rand_tensor<double>(rng, {1, k, 1, 1, 1});
        TensorD c = rand_tensor<double>(rng, {1, 1, k, 1, 1});
        TensorD w = TensorD::zeros({k, k, k, 1, 1});
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t q = 0; q < k; ++q)
                for (std::size_t r = 0; r < k; ++r) w[(p * k + q) * k + r] = a[p] * b[q] * c[r];
        TensorD x = rand_tensor<double>(rng, {1, 4, 6, 6, 1});
        TensorD chain = asymm_conv_chain(x, a, b, c);
        TensorD full = reference_conv3d<double>(x, w, nullptr, Padding::Same);
        worst = std::max(worst, coastcast::testing::max_abs_diff(chain, full));
    }
    std::ostringstream os;
    os << "20 rank-1 kernels, max |chain - full| = " << worst;
    detail = os.str();
    return worst < 1e-6;
}

// ---------------------------------------------------------------- criterion 4
bool shape_contract(std::string& detail) {
    std::ostringstream os;
    bool ok = true;
    struct Cfg {
        std::size_t hw, n, batch;
    };
    for (Cfg cfg : {Cfg{128, 16, 1}, Cfg{32, 4, 2}}) {
        for (ModelKind kind : all_model_kinds()) {
            ModelConfig c;
            c.kind = kind;
            c.base_filters = cfg.n;
            c.height = cfg.hw;
            c.width = cfg.hw;
            ModelF m = build_model<float>(c, 17);
            std::mt19937_64 rng(55);
            TensorF batch = rand_tensor<float>(rng, {cfg.batch, 10, cfg.hw, cfg.hw, 4}, 0.0, 1.0);
            TensorF out = m.forward(batch, Mode::Eval);
            const bool good =
                out.shape == Shape{cfg.batch, 1, cfg.hw, cfg.hw, 4} && all_finite(out);
            if (!good) os << " FAIL " << model_name(kind) << "@" << cfg.hw;
            ok &= good;
        }
    }
    os << "4 architectures x {128x128 n=16, 32x32 n=4} -> (B,1,H,W,V) finite";
    detail = os.str();
    return ok;
}

// ---------------------------------------------------------------- criterion 5
bool overfit_probe(std::string& detail) {
    GridSeries raw = synth_generate(42, 18, 32, 32);
    ScalerParams sp = fit_scaler(raw, {0, 18});
    GridSeries scaled = apply_scale(raw, sp);
    WindowSpec w{10, 1};
    std::vector<std::size_t> ids{0, 1, 2, 3, 4, 5, 6, 7};
    WindowDataset ds(scaled, w, ids);

    std::ostringstream os;
    bool ok = true;
    for (ModelKind kind : all_model_kinds()) {
        ModelConfig c;
        c.kind = kind;
        c.base_filters = 4;
        c.height = 32;
        c.width = 32;
        c.dropout_rate = 0.0;  // capacity probe: no regularization noise
        TrainConfig tc;
        tc.batch_size = 1;
        tc.epochs = 500;
        tc.learning_rate = 3e-3;
        tc.seed = 1;
        tc.stop_at_train_mse = 1e-3;

        ModelF m = build_model<float>(c, 7);
        const auto t0 = Clock::now();
        TrainResult r = train(m, ds, ds, tc);
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        const double final_mse = r.history.back().train_mse;
        const bool converged = final_mse < 1e-3;
        ok &= converged;

        // divergence guard: 10-epoch medians of the train loss never increase
        std::vector<double> medians;
        for (std::size_t wi = 0; wi + 10 <= r.history.size(); wi += 10) {
            std::vector<double> win;
            for (std::size_t i = wi; i < wi + 10; ++i) win.push_back(r.history[i].train_mse);
            std::sort(win.begin(), win.end());
            medians.push_back((win[4] + win[5]) / 2.0);
        }
        for (std::size_t i = 1; i < medians.size(); ++i) ok &= medians[i] <= medians[i - 1] * 1.15;

        // determinism: the first epochs replay exactly under the same seed
        ModelF m2 = build_model<float>(c, 7);
        TrainConfig tc2 = tc;
        tc2.epochs = 3;
        tc2.stop_at_train_mse.reset();
        TrainResult r2 = train(m2, ds, ds, tc2);
        for (std::size_t e = 0; e < 3; ++e) {
            ok &= std::abs(r2.history[e].train_mse - r.history[e].train_mse) < 1e-12;
        }

        os << " " << model_name(kind) << ": " << r.history.size() << "ep "
           << std::scientific << final_mse << std::defaultfloat << " (" << static_cast<int>(secs) << "s)";
    }
    detail = "8 samples, 32x32, n=4, h=1:" + os.str();
    return ok;
}

// ---------------------------------------------------------------- criterion 6
bool parameter_accounting(std::string& detail) {
    ConvSpec spot{3, 3, 3, 4, 16, Padding::Same, true};
    bool ok = spot.param_count() == 1744;

    std::vector<std::size_t> totals;
    for (ModelKind kind : all_model_kinds()) {
        ModelConfig c;
        c.kind = kind;
        ModelF m = build_model<float>(c, 1);
        ParamCountReport r = count_params(m);
        std::size_t stored = 0;
        for (const auto& e : m.store.entries()) {
            if (e.trainable) stored += e.value.numel();
        }
        ok &= r.total == stored;
        totals.push_back(r.total);
    }
    const double ratio = static_cast<double>(totals[1]) / static_cast<double>(totals[0]);
    ok &= ratio >= 1.4 && ratio <= 1.6;

    double mean = 0.0;
    for (std::size_t t : totals) mean += static_cast<double>(t);
    mean /= 4.0;
    double worst_dev = 0.0;
    for (std::size_t t : totals) {
        worst_dev = std::max(worst_dev, std::abs(static_cast<double>(t) - mean) / mean);
    }
    ok &= worst_dev <= 0.25;

    std::ostringstream os;
    os << "1744 spot check; res/base = " << ratio << "; max |dev| from mean = " << worst_dev * 100 << "%";
    detail = os.str();
    return ok;
}

// ---------------------------------------------------------------- criterion 7
bool preprocessing(std::string& detail) {
    GridSeries raw = synth_generate(9, 48, 135, 135);
    GridSeries cropped = crop_spatial(raw, 128, 128);
    bool ok = cropped.values.shape == Shape{48, 128, 128, 4};
    // the crop keeps the low-index corner and drops the 7 high-index rows/cols
    for (std::size_t t = 0; t < 4 && ok; ++t)
        for (std::size_t r = 0; r < 128; r += 31)
            for (std::size_t c = 0; c < 128; c += 31)
                for (std::size_t v = 0; v < 4; ++v) ok &= cropped.at(t, r, c, v) == raw.at(t, r, c, v);

    StepRange train_range{0, 36};
    ScalerParams p = fit_scaler(cropped, train_range);
    GridSeries scaled = apply_scale(cropped, p);
    double mn = 1e300, mx = -1e300;
    for (std::size_t t = train_range.begin; t < train_range.end; ++t)
        for (std::size_t r = 0; r < 128; ++r)
            for (std::size_t c = 0; c < 128; ++c)
                for (std::size_t v = 0; v < 4; ++v) {
                    const float y = scaled.at(t, r, c, v);
                    if (scaled.is_sea(r, c)) {
                        mn = std::min(mn, static_cast<double>(y));
                        mx = std::max(mx, static_cast<double>(y));
                    } else {
                        ok &= y == 0.0f;
                    }
                }
    ok &= mn >= 0.1 - 1e-6 && mx <= 1.0 + 1e-6;

    GridSeries back = inverse_scale(scaled, p);
    double worst = 0.0;
    for (std::size_t i = 0; i < back.values.numel(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(back.values[i]) -
                                         static_cast<double>(cropped.values[i])));
    }
    ok &= worst < 1e-6;

    std::ostringstream os;
    os << "crop 135->128 ok; scaled sea range [" << mn << ", " << mx << "]; inverse max err " << worst;
    detail = os.str();
    return ok;
}

// ---------------------------------------------------------------- criterion 8
bool split_window_arithmetic(std::string& detail) {
    std::mt19937_64 rng(77);
    GridSeries s;
    s.values = TensorF::zeros({17136, 8, 8, 1});
    s.start_time = utc_from_civil(2017, 3, 1);
    s.step_seconds = 3600;
    s.variable_names = {"v"};
    s.mask.assign(64, 1);

    const SplitSpec split = SplitSpec::paper_defaults();
    const WindowSpec w{10, 12};
    SplitIndices idx = split_by_dates(s, split, w);

    bool ok = idx.train_steps.count() == 8760;
    std::size_t val = 0, test = 0;
    for (std::size_t season = 0; season < 4; ++season) {
        ok &= idx.validation_steps[season].count() == 504;
        ok &= idx.test_steps[season].count() == 504;
        val += idx.validation_steps[season].count();
        test += idx.test_steps[season].count();
    }
    ok &= val == 2016 && test == 2016;

    // window count law L - d - h + 1 on random (L, d, h)
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t d = 1 + rng() % 15;
        const std::size_t h = 1 + rng() % 80;
        const std::size_t L = d + h + rng() % 60;
        ok &= window_count(L, WindowSpec{d, h}) == L - d - h + 1;
    }

    std::ostringstream os;
    os << "train steps 8760, validation 4x504, test 4x504; count law on 200 random (L,d,h)";
    detail = os.str();
    return ok;
}

// ---------------------------------------------------------------- criterion 9
bool horizon_trend(std::string& detail) {
    GridSeries raw = synth_generate(42, 2000, 32, 32);
    ScalerParams sp = fit_scaler(raw, {0, 1500});
    GridSeries scaled = apply_scale(raw, sp);

    std::vector<double> medians;
    std::ostringstream os;
    for (std::size_t horizon : {std::size_t(1), std::size_t(3), std::size_t(6)}) {
        WindowSpec w{10, horizon};
        std::vector<std::size_t> train_all = windows_within({0, 1500}, 2000, w);
        std::vector<std::size_t> train_ids;
        for (std::size_t i = 0; i < train_all.size(); i += 4) train_ids.push_back(train_all[i]);
        std::vector<std::size_t> test_ids = windows_within({1700, 2000}, 2000, w);
        WindowDataset train_ds(scaled, w, train_ids);
        WindowDataset test_ds(scaled, w, test_ids);

        std::vector<double> mses;
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            ModelConfig c;
            c.kind = ModelKind::DDR3;
            c.base_filters = 4;
            c.depth = 3;
            c.height = 32;
            c.width = 32;
            c.dropout_rate = 0.0;
            ModelF m = build_model<float>(c, 1000 + seed);
            TrainConfig tc;
            tc.batch_size = 8;
            tc.epochs = 6;
            tc.learning_rate = 3e-3;
            tc.seed = seed;
            train(m, train_ds, test_ds, tc);

            std::array<std::vector<std::size_t>, 4> seasons;
            seasons[0] = test_ids;
            EvalReport rep = evaluate_model(m, scaled, seasons, w, "3ddr-unet", 16, false);
            mses.push_back(rep.rows.back().mse);
        }
        std::sort(mses.begin(), mses.end());
        medians.push_back(mses[1]);
        os << " h=" << horizon << ": " << std::scientific << mses[1] << std::defaultfloat;
    }
    const bool ok = medians[0] <= medians[1] && medians[1] <= medians[2];
    detail = "median test MSE over 3 seeds" + os.str();
    return ok;
}

// --------------------------------------------------------------- criterion 10
bool serialization(std::string& detail) {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "coastcast_acceptance").string();
    fs::create_directories(dir);

    bool ok = true;
    // container round trip
    GridSeries s = synth_generate(3, 16, 16, 16);
    const std::string cpath = dir + "/roundtrip.cten";
    write_container(s, cpath);
    GridSeries s2 = read_container(cpath);
    ok &= s2.values.data == s.values.data && s2.mask == s.mask &&
          s2.start_time == s.start_time && s2.variable_names == s.variable_names;

    // checkpoint round trip and identical eval forward after reload
    ModelConfig c;
    c.kind = ModelKind::InceptionRes3DDR;
    c.base_filters = 2;
    c.depth = 2;
    c.lags = 4;
    c.height = 16;
    c.width = 16;
    c.variables = 4;
    ModelF m = build_model<float>(c, 23);
    std::mt19937_64 rng(5), drng(6);
    TensorF batch = rand_tensor<float>(rng, {2, 4, 16, 16, 4}, 0.0, 1.0);
    (void)m.forward(batch, Mode::Train, &drng);  // nudge BN running stats

    Checkpoint ck = make_checkpoint(m, 9, 0.25);
    const std::string kpath = dir + "/roundtrip.ckpt";
    save_checkpoint(ck, kpath);
    Checkpoint ck2 = load_checkpoint(kpath);
    ok &= ck2.tensors.size() == ck.tensors.size();
    for (std::size_t i = 0; i < ck.tensors.size() && ok; ++i) {
        ok &= ck2.tensors[i].first == ck.tensors[i].first &&
              ck2.tensors[i].second.data == ck.tensors[i].second.data;
    }
    ModelF m2 = model_from_checkpoint(ck2);
    TensorF a = m.forward(batch, Mode::Eval);
    TensorF b = m2.forward(batch, Mode::Eval);
    ok &= a.data == b.data;

    fs::remove_all(dir);
    detail = "container and checkpoint bitwise round trips; reloaded eval forward bitwise identical";
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<Criterion> criteria = {
        {1, "convolution oracle", conv_oracle},
        {2, "gradient suite", gradient_suite},
        {3, "separable-kernel equivalence", separable_equivalence},
        {4, "shape contract", shape_contract},
        {5, "overfit probe", overfit_probe},
        {6, "parameter accounting", parameter_accounting},
        {7, "preprocessing", preprocessing},
        {8, "split/window arithmetic", split_window_arithmetic},
        {9, "horizon-degradation trend", horizon_trend},
        {10, "serialization", serialization},
    };

    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

    int failures = 0;
    for (const Criterion& c : criteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
        const auto t0 = Clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        std::printf("%s criterion %d: %s [%.1fs] %s\n", ok ? "PASS" : "FAIL", c.id, c.name, secs,
                    detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
