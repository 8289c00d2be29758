#pragma once

#include <string>
#include <vector>

#include "coastcast/blocks.hpp"

namespace coastcast {

enum class ModelKind { DDR3, Res3DDR, InceptionRes3DDR, AsymmInceptionRes3DDR };

// Canonical CLI names for the four architectures.
std::string model_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);  // throws UsageError listing valid names
const std::vector<ModelKind>& all_model_kinds();
BlockKind block_kind_for(ModelKind kind);

// Per-architecture default widths, chosen so the four models have comparable
// totals (the filter counts are picked per model exactly for that reason).
std::size_t default_base_filters(ModelKind kind);

struct ModelConfig {
    ModelKind kind = ModelKind::DDR3;
    std::size_t base_filters = 0;  // 0 resolves to the per-kind default
    std::size_t depth = 4;
    std::size_t lags = 10;
    std::size_t height = 128;
    std::size_t width = 128;
    std::size_t variables = 4;
    double dropout_rate = 0.5;
    std::vector<std::size_t> asymm_branch_sizes = {1, 3, 5, 7, 9};

    std::size_t filters() const { return base_filters ? base_filters : default_base_filters(kind); }
    void validate() const;

    std::string to_json_string() const;
    static ModelConfig from_json_string(const std::string& text);
};

struct LayerInfo {
    std::string name;
    Shape out_shape;  // per-sample (T,H,W,C); empty for the input marker row
    std::size_t params = 0;
    bool is_conv = false;
};

struct ParamCountReport {
    std::size_t total = 0;
    std::size_t conv_layers = 0;
    std::vector<LayerInfo> rows;
};

template <typename S>
struct Model {
    ModelConfig config;
    ParamStore<S> store;
    std::vector<AnyBlock> encoder;
    AnyBlock bottleneck;
    std::vector<ConvNode> skip_reducers;  // per encoder level
    ConvNode bottleneck_reducer;
    std::vector<AnyBlock> decoder;
    ConvNode head;
    std::vector<LayerInfo> layer_table;

    // One tape leaf per trainable store entry, aligned with store indices.
    std::vector<Var<S>> register_leaves(Tape<S>& tape) const;

    Var<S> forward_on_tape(Tape<S>& tape, const std::vector<Var<S>>& leaves,
                           const Tensor<S>& batch, Mode mode, std::mt19937_64* dropout_rng);

    // Convenience forward that owns a scratch tape. Eval mode is deterministic.
    Tensor<S> forward(const Tensor<S>& batch, Mode mode, std::mt19937_64* dropout_rng = nullptr);
};

using ModelF = Model<float>;
using ModelD = Model<double>;

template <typename S>
Model<S> build_model(const ModelConfig& config, std::uint64_t init_seed);

template <typename S>
ParamCountReport count_params(const Model<S>& model);

template <typename S>
std::string summarize(const Model<S>& model);

template <typename S>
std::string summarize_csv(const Model<S>& model);

}  // namespace coastcast
