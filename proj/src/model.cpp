#include "coastcast/model.hpp"

#include <json.hpp>

#include <sstream>

namespace coastcast {

using nlohmann::json;

std::string model_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::DDR3: return "3ddr-unet";
        case ModelKind::Res3DDR: return "res-3ddr-unet";
        case ModelKind::InceptionRes3DDR: return "inception-res-3ddr-unet";
        case ModelKind::AsymmInceptionRes3DDR: return "asymm-inception-res-3ddr-unet";
    }
    throw ValueError("unknown model kind");
}

const std::vector<ModelKind>& all_model_kinds() {
    static const std::vector<ModelKind> kinds = {ModelKind::DDR3, ModelKind::Res3DDR,
                                                 ModelKind::InceptionRes3DDR, ModelKind::AsymmInceptionRes3DDR};
    return kinds;
}

ModelKind model_kind_from_name(const std::string& name) {
    for (ModelKind k : all_model_kinds()) {
        if (model_name(k) == name) return k;
    }
    std::string valid;
    for (ModelKind k : all_model_kinds()) {
        if (!valid.empty()) valid += ", ";
        valid += model_name(k);
    }
    throw UsageError("unknown model '" + name + "'; valid models: " + valid);
}

BlockKind block_kind_for(ModelKind kind) {
    switch (kind) {
        case ModelKind::DDR3: return BlockKind::Plain;
        case ModelKind::Res3DDR: return BlockKind::Residual;
        case ModelKind::InceptionRes3DDR: return BlockKind::InceptionResidual;
        case ModelKind::AsymmInceptionRes3DDR: return BlockKind::AsymmInceptionResidual;
    }
    throw ValueError("unknown model kind");
}

std::size_t default_base_filters(ModelKind kind) {
    switch (kind) {
        case ModelKind::DDR3: return 16;
        case ModelKind::Res3DDR: return 16;
        case ModelKind::InceptionRes3DDR: return 28;
        case ModelKind::AsymmInceptionRes3DDR: return 34;
    }
    throw ValueError("unknown model kind");
}

void ModelConfig::validate() const {
    if (depth == 0) throw ValueError("depth must be >= 1");
    if (lags == 0) throw ValueError("lags must be >= 1");
    if (variables == 0) throw ValueError("variables must be >= 1");
    if (filters() == 0) throw ValueError("base_filters must be >= 1");
    const std::size_t factor = std::size_t(1) << depth;
    if (height % factor != 0 || width % factor != 0) {
        throw ValueError("height and width must be divisible by 2^depth = " + std::to_string(factor) +
                         ", got " + std::to_string(height) + "x" + std::to_string(width));
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ValueError("dropout_rate must be in [0,1)");
    if (kind == ModelKind::AsymmInceptionRes3DDR) {
        if (asymm_branch_sizes.empty()) throw ValueError("asymm_branch_sizes must not be empty");
        for (std::size_t k : asymm_branch_sizes) {
            if (k % 2 == 0) throw ValueError("asymm branch sizes must be odd");
        }
    }
}

std::string ModelConfig::to_json_string() const {
    json j;
    j["kind"] = model_name(kind);
    j["base_filters"] = filters();
    j["depth"] = depth;
    j["lags"] = lags;
    j["height"] = height;
    j["width"] = width;
    j["variables"] = variables;
    j["dropout_rate"] = dropout_rate;
    j["asymm_branch_sizes"] = asymm_branch_sizes;
    return j.dump();
}

ModelConfig ModelConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad model config JSON: ") + e.what());
    }
    ModelConfig c;
    try {
        c.kind = model_kind_from_name(j.at("kind").get<std::string>());
        c.base_filters = j.value("base_filters", std::size_t(0));
        c.depth = j.value("depth", std::size_t(4));
        c.lags = j.value("lags", std::size_t(10));
        c.height = j.value("height", std::size_t(128));
        c.width = j.value("width", std::size_t(128));
        c.variables = j.value("variables", std::size_t(4));
        c.dropout_rate = j.value("dropout_rate", 0.5);
        if (j.contains("asymm_branch_sizes")) {
            c.asymm_branch_sizes = j.at("asymm_branch_sizes").get<std::vector<std::size_t>>();
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad model config JSON: ") + e.what());
    }
    return c;
}

namespace {

Shape shape4(std::size_t t, std::size_t h, std::size_t w, std::size_t c) { return Shape{t, h, w, c}; }

void append_block_rows(std::vector<LayerInfo>& table, const AnyBlock& block, const std::string& prefix,
                       std::size_t t, std::size_t h, std::size_t w) {
    auto conv_row = [&](const std::string& name, const ConvNode& n) {
        table.push_back(LayerInfo{prefix + "." + name, shape4(t, h, w, n.spec.out_channels), n.spec.param_count(), true});
    };
    auto bn_row = [&](const BatchNormNode& n) {
        table.push_back(LayerInfo{prefix + ".bn", shape4(t, h, w, n.channels), 2 * n.channels, false});
    };
    auto proj_row = [&](const std::optional<ConvNode>& n) {
        if (n) conv_row("proj", *n);
    };

    if (const auto* p = std::get_if<PlainBlock>(&block)) {
        conv_row("conv1", p->c1);
        conv_row("conv2", p->c2);
    } else if (const auto* p = std::get_if<ResidualBlock>(&block)) {
        conv_row("conv1", p->c1);
        conv_row("conv2", p->c2);
        conv_row("conv3", p->c3);
        bn_row(p->bn);
        proj_row(p->proj);
    } else if (const auto* p = std::get_if<InceptionResBlock>(&block)) {
        conv_row("a.reduce", p->red_a);
        conv_row("a.conv", p->br_a);
        conv_row("b.reduce", p->red_b);
        conv_row("b.conv", p->br_b);
        conv_row("c.reduce", p->red_c);
        conv_row("c.conv1", p->br_c1);
        conv_row("c.conv2", p->br_c2);
        conv_row("combine", p->combiner);
        bn_row(p->bn);
        proj_row(p->proj);
    } else {
        const auto& ab = std::get<AsymmInceptionResBlock>(block);
        for (std::size_t i = 0; i < ab.branches.size(); ++i) {
            const std::size_t k = ab.branches[i].along_t.spec.kt;
            const std::string bp = "k" + std::to_string(k);
            conv_row(bp + ".t", ab.branches[i].along_t);
            conv_row(bp + ".h", ab.branches[i].along_h);
            conv_row(bp + ".w", ab.branches[i].along_w);
        }
        conv_row("combine", ab.combiner);
        bn_row(ab.bn);
        proj_row(ab.proj);
    }
}

}  // namespace

template <typename S>
Model<S> build_model(const ModelConfig& config, std::uint64_t init_seed) {
    config.validate();
    Model<S> m;
    m.config = config;
    std::mt19937_64 rng(init_seed);

    const BlockKind bk = block_kind_for(config.kind);
    const std::size_t n = config.filters();
    const std::size_t depth = config.depth;
    const std::size_t L = config.lags;
    const std::size_t V = config.variables;

    auto block_build = [&](std::size_t cin, std::size_t cout) {
        BlockBuild b;
        b.kind = bk;
        b.in_channels = cin;
        b.out_channels = cout;
        b.asymm_kernel_sizes = config.asymm_branch_sizes;
        return b;
    };

    std::vector<LayerInfo>& table = m.layer_table;
    table.push_back(LayerInfo{"input", shape4(L, config.height, config.width, V), 0, false});

    std::size_t h = config.height, w = config.width;
    std::size_t cin = V;
    std::vector<std::size_t> level_ch(depth);

    for (std::size_t i = 0; i < depth; ++i) {
        const std::size_t c = n << i;
        level_ch[i] = c;
        const std::string prefix = "enc" + std::to_string(i);
        m.encoder.push_back(make_block(block_build(cin, c), prefix, m.store, rng));
        append_block_rows(table, m.encoder.back(), prefix, L, h, w);
        h /= 2;
        w /= 2;
        table.push_back(LayerInfo{prefix + ".pool", shape4(L, h, w, c), 0, false});
        cin = c;
    }

    const std::size_t cb = n << depth;
    m.bottleneck = make_block(block_build(cin, cb), "bottleneck", m.store, rng);
    append_block_rows(table, m.bottleneck, "bottleneck", L, h, w);
    if (config.dropout_rate > 0.0) {
        table.push_back(LayerInfo{"bottleneck.dropout", shape4(L, h, w, cb), 0, false});
    }

    // every skip and the bottleneck output pass through an L x 1 x 1 valid
    // convolution so all decoder tensors have temporal extent 1
    auto make_reducer = [&](const std::string& name, std::size_t c) {
        ConvNode node;
        node.spec = ConvSpec{L, 1, 1, c, c, Padding::Valid, true};
        LayerParams<S> p = he_init<S>(node.spec, rng());
        node.w = m.store.add(name + ".weight", std::move(p.weights));
        node.b = m.store.add(name + ".bias", std::move(p.bias));
        return node;
    };
    for (std::size_t i = 0; i < depth; ++i) {
        m.skip_reducers.push_back(make_reducer("reduce.skip" + std::to_string(i), level_ch[i]));
    }
    m.bottleneck_reducer = make_reducer("reduce.bottleneck", cb);
    table.push_back(LayerInfo{"reduce.bottleneck", shape4(1, h, w, cb), m.bottleneck_reducer.spec.param_count(), true});

    std::size_t cur = cb;
    for (std::size_t i = 0; i < depth; ++i) {
        const std::size_t lvl = depth - 1 - i;
        const std::size_t c = level_ch[lvl];
        const std::string prefix = "dec" + std::to_string(i);
        h *= 2;
        w *= 2;
        table.push_back(LayerInfo{prefix + ".upsample", shape4(1, h, w, cur), 0, false});
        table.push_back(LayerInfo{"reduce.skip" + std::to_string(lvl), shape4(1, h, w, c),
                                  m.skip_reducers[lvl].spec.param_count(), true});
        table.push_back(LayerInfo{prefix + ".concat", shape4(1, h, w, cur + c), 0, false});
        m.decoder.push_back(make_block(block_build(cur + c, c), prefix, m.store, rng));
        append_block_rows(table, m.decoder.back(), prefix, 1, h, w);
        cur = c;
    }

    ConvNode head;
    head.spec = ConvSpec{1, 1, 1, cur, V, Padding::Same, true};
    LayerParams<S> hp = he_init<S>(head.spec, rng());
    // the head starts as the constant mid-range predictor: bias 0.5 with
    // near-zero weights keeps every output pixel alive behind the final ReLU
    // and away from the dead constant basin the first optimizer steps can
    // otherwise fall into
    for (std::size_t i = 0; i < hp.weights.numel(); ++i) hp.weights[i] *= S(0.01);
    for (std::size_t i = 0; i < hp.bias.numel(); ++i) hp.bias[i] = S(0.5);
    head.w = m.store.add("head.weight", std::move(hp.weights));
    head.b = m.store.add("head.bias", std::move(hp.bias));
    m.head = head;
    table.push_back(LayerInfo{"head", shape4(1, config.height, config.width, V), head.spec.param_count(), true});

    return m;
}

template <typename S>
std::vector<Var<S>> Model<S>::register_leaves(Tape<S>& tape) const {
    std::vector<Var<S>> leaves(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        if (store[static_cast<int>(i)].trainable) {
            leaves[i] = tape.leaf(store[static_cast<int>(i)].value);
        }
    }
    return leaves;
}

template <typename S>
Var<S> Model<S>::forward_on_tape(Tape<S>& tape, const std::vector<Var<S>>& leaves,
                                 const Tensor<S>& batch, Mode mode, std::mt19937_64* dropout_rng) {
    if (batch.rank() != 5) {
        throw ShapeError("forward expects (B,L,H,W,V), got " + shape_str(batch.shape));
    }
    if (batch.shape[1] != config.lags || batch.shape[2] != config.height ||
        batch.shape[3] != config.width || batch.shape[4] != config.variables) {
        throw ShapeError("forward input " + shape_str(batch.shape) + " does not match configured (" +
                         std::to_string(config.lags) + "," + std::to_string(config.height) + "," +
                         std::to_string(config.width) + "," + std::to_string(config.variables) + ")");
    }
    std::mt19937_64 unused_rng(0);
    std::mt19937_64* rng = dropout_rng;
    if (mode == Mode::Train && config.dropout_rate > 0.0 && rng == nullptr) {
        throw ValueError("train-mode forward with dropout needs an RNG");
    }
    if (rng == nullptr) rng = &unused_rng;

    ForwardCtx<S> ctx{tape, leaves, store, mode, rng};
    Var<S> x = tape.leaf(batch, /*needs_grad=*/false);
    std::vector<Var<S>> skips;
    for (std::size_t i = 0; i < encoder.size(); ++i) {
        x = block_forward(encoder[i], ctx, x);
        skips.push_back(x);
        x = tape.maxpool_1x2x2(x);
    }
    x = block_forward(bottleneck, ctx, x);
    if (config.dropout_rate > 0.0) {
        x = tape.dropout(x, config.dropout_rate, mode, *rng);
    }
    x = conv_forward(bottleneck_reducer, ctx, x);
    for (std::size_t i = 0; i < decoder.size(); ++i) {
        const std::size_t lvl = decoder.size() - 1 - i;
        x = tape.upsample_1x2x2(x);
        Var<S> s = conv_forward(skip_reducers[lvl], ctx, skips[lvl]);
        x = tape.concat_channels({x, s});
        x = block_forward(decoder[i], ctx, x);
    }
    return tape.relu(conv_forward(head, ctx, x));
}

template <typename S>
Tensor<S> Model<S>::forward(const Tensor<S>& batch, Mode mode, std::mt19937_64* dropout_rng) {
    Tape<S> tape;
    std::vector<Var<S>> leaves = register_leaves(tape);
    Var<S> y = forward_on_tape(tape, leaves, batch, mode, dropout_rng);
    return tape.value(y);
}

template <typename S>
ParamCountReport count_params(const Model<S>& model) {
    ParamCountReport r;
    r.rows = model.layer_table;
    for (const LayerInfo& row : r.rows) {
        r.total += row.params;
        if (row.is_conv) ++r.conv_layers;
    }
    return r;
}

template <typename S>
std::string summarize(const Model<S>& model) {
    ParamCountReport r = count_params(model);
    std::ostringstream os;
    for (const LayerInfo& row : r.rows) {
        os << row.name << ' ' << shape_str(row.out_shape);
        if (row.params > 0) os << ' ' << row.params;
        os << '\n';
    }
    os << "total " << r.total << " params, " << r.conv_layers << " conv layers\n";
    return os.str();
}

template <typename S>
std::string summarize_csv(const Model<S>& model) {
    std::ostringstream os;
    os << "layer,output_shape,params\n";
    for (const LayerInfo& row : model.layer_table) {
        os << row.name << ",\"" << shape_str(row.out_shape) << "\"," << row.params << '\n';
    }
    return os.str();
}

#define COASTCAST_INSTANTIATE_MODEL(S)                              \
    template struct Model<S>;                                       \
    template Model<S> build_model<S>(const ModelConfig&, std::uint64_t); \
    template ParamCountReport count_params<S>(const Model<S>&);     \
    template std::string summarize<S>(const Model<S>&);             \
    template std::string summarize_csv<S>(const Model<S>&);

COASTCAST_INSTANTIATE_MODEL(float)
COASTCAST_INSTANTIATE_MODEL(double)

#undef COASTCAST_INSTANTIATE_MODEL

}  // namespace coastcast
