#include "coastcast/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "coastcast/detail/binio.hpp"

namespace coastcast {

using nlohmann::json;

void TrainConfig::validate() const {
    if (batch_size == 0) throw ValueError("batch_size must be >= 1");
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
        throw ValueError("adam betas must lie in (0,1)");
    }
    if (learning_rate <= 0.0) throw ValueError("learning_rate must be positive");
    if (eps <= 0.0) throw ValueError("adam eps must be positive");
}

std::string TrainConfig::to_json_string() const {
    json j;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["learning_rate"] = learning_rate;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["eps"] = eps;
    j["seed"] = seed;
    j["shuffle"] = shuffle;
    if (stop_at_train_mse) j["stop_at_train_mse"] = *stop_at_train_mse;
    return j.dump();
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad train config JSON: ") + e.what());
    }
    TrainConfig c;
    c.batch_size = j.value("batch_size", std::size_t(16));
    c.epochs = j.value("epochs", std::size_t(100));
    c.learning_rate = j.value("learning_rate", 1e-3);
    c.beta1 = j.value("beta1", 0.9);
    c.beta2 = j.value("beta2", 0.999);
    c.eps = j.value("eps", 1e-8);
    c.seed = j.value("seed", std::uint64_t(0));
    c.shuffle = j.value("shuffle", true);
    if (j.contains("stop_at_train_mse")) c.stop_at_train_mse = j.at("stop_at_train_mse").get<double>();
    return c;
}

template <typename S>
AdamState<S> AdamState<S>::init_like(const std::vector<Tensor<S>*>& params) {
    AdamState<S> s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor<S>* p : params) {
        s.m.push_back(Tensor<S>::zeros(p->shape));
        s.v.push_back(Tensor<S>::zeros(p->shape));
    }
    return s;
}

template <typename S>
void adam_step(const std::vector<Tensor<S>*>& params, const std::vector<Tensor<S>>& grads,
               AdamState<S>& state, const TrainConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ValueError("adam_step: parameter/gradient/state count mismatch");
    }
    state.t += 1;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<S>& theta = *params[k];
        const Tensor<S>& g = grads[k];
        if (!theta.same_shape(g)) throw ShapeError("adam_step: gradient shape mismatch");
        Tensor<S>& m = state.m[k];
        Tensor<S>& v = state.v[k];
        for (std::size_t i = 0; i < theta.numel(); ++i) {
            const double gi = static_cast<double>(g[i]);
            const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
            const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
            m[i] = static_cast<S>(mi);
            v[i] = static_cast<S>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            theta[i] = static_cast<S>(static_cast<double>(theta[i]) -
                                      cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

template <typename S>
double mse_loss(const Tensor<S>& pred, const Tensor<S>& target) {
    if (!pred.same_shape(target)) {
        throw ShapeError("mse_loss shape mismatch: " + shape_str(pred.shape) + " vs " + shape_str(target.shape));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(pred.numel());
}

Checkpoint make_checkpoint(const ModelF& model, std::int64_t epoch, double val_mse,
                           const std::string& extra_json) {
    Checkpoint c;
    json meta;
    try {
        meta = json::parse(extra_json);
    } catch (const json::exception& e) {
        throw ValueError(std::string("checkpoint extra metadata must be JSON: ") + e.what());
    }
    meta["model"] = json::parse(model.config.to_json_string());
    meta["epoch"] = epoch;
    meta["val_mse"] = val_mse;
    c.meta_json = meta.dump();
    c.epoch = epoch;
    c.val_mse = val_mse;
    for (const auto& e : model.store.entries()) {
        c.tensors.emplace_back(e.name, e.value);
    }
    return c;
}

ModelF model_from_checkpoint(const Checkpoint& ckpt) {
    json meta;
    try {
        meta = json::parse(ckpt.meta_json);
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint metadata is not JSON: ") + e.what());
    }
    if (!meta.contains("model")) throw FormatError("checkpoint metadata lacks a model config");
    ModelConfig config = ModelConfig::from_json_string(meta.at("model").dump());
    ModelF model = build_model<float>(config, 0);
    if (ckpt.tensors.size() != model.store.size()) {
        throw FormatError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                          std::to_string(model.store.size()));
    }
    for (const auto& [name, tensor] : ckpt.tensors) {
        const int idx = model.store.find(name);
        if (idx < 0) throw FormatError("checkpoint tensor '" + name + "' not part of the model");
        if (model.store[idx].value.shape != tensor.shape) {
            throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_str(tensor.shape) +
                              ", model expects " + shape_str(model.store[idx].value.shape));
        }
        model.store[idx].value = tensor;
    }
    return model;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write("CCKP", 4);
    detail::write_le<std::uint32_t>(out, 1);
    detail::write_string(out, ckpt.meta_json);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
        detail::write_string(out, name);
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t d : tensor.shape) detail::write_le<std::uint64_t>(out, d);
        detail::write_f32_block(out, tensor.ptr(), tensor.numel());
    }
    if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    detail::expect_magic(in, "CCKP", "checkpoint");
    const auto version = detail::read_le<std::uint32_t>(in, "checkpoint version");
    if (version != 1) throw FormatError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint c;
    c.meta_json = detail::read_string(in, "checkpoint metadata");
    const auto count = detail::read_le<std::uint32_t>(in, "tensor count");
    for (std::uint32_t k = 0; k < count; ++k) {
        std::string name = detail::read_string(in, "tensor name");
        const auto ndim = detail::read_le<std::uint32_t>(in, "tensor rank");
        if (ndim == 0 || ndim > 8) throw FormatError("tensor '" + name + "' has unsupported rank");
        Shape shape(ndim);
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const auto e = detail::read_le<std::uint64_t>(in, "tensor dim");
            if (e == 0 || e > (std::uint64_t(1) << 32)) throw FormatError("tensor '" + name + "' has a bad extent");
            shape[d] = static_cast<std::size_t>(e);
            if (n > (std::size_t(1) << 33) / shape[d]) throw FormatError("tensor '" + name + "' dimension overflow");
            n *= shape[d];
        }
        TensorF t = TensorF::zeros(shape);
        detail::read_f32_block(in, t.ptr(), t.numel(), "tensor payload");
        c.tensors.emplace_back(std::move(name), std::move(t));
    }

    try {
        json meta = json::parse(c.meta_json);
        c.epoch = meta.value("epoch", std::int64_t(-1));
        c.val_mse = meta.value("val_mse", 0.0);
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint metadata is not JSON: ") + e.what());
    }
    return c;
}

std::string history_csv(const std::vector<EpochStats>& history) {
    std::ostringstream os;
    os << "epoch,train_mse,val_mse\n";
    char buf[96];
    for (const EpochStats& row : history) {
        std::snprintf(buf, sizeof(buf), "%zu,%.10e,%.10e\n", row.epoch, row.train_mse, row.val_mse);
        os << buf;
    }
    return os.str();
}

namespace {

// Fisher-Yates with an explicit bounded draw so shuffles are reproducible
// independent of the standard library.
void shuffle_indices(std::vector<std::size_t>& ids, std::mt19937_64& rng) {
    for (std::size_t i = ids.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(ids[i - 1], ids[j]);
    }
}

TensorF stack_batch(const SampleSource& src, const std::vector<std::size_t>& ids,
                    std::size_t begin, std::size_t end, bool targets) {
    TensorF first_in, first_tg;
    src.fetch(ids[begin], first_in, first_tg);
    const TensorF& first = targets ? first_tg : first_in;
    Shape shp = first.shape;
    shp.insert(shp.begin(), end - begin);
    TensorF out = TensorF::zeros(shp);
    const std::size_t stride = first.numel();
    std::copy(first.data.begin(), first.data.end(), out.data.begin());
    for (std::size_t k = begin + 1; k < end; ++k) {
        TensorF in, tg;
        src.fetch(ids[k], in, tg);
        const TensorF& s = targets ? tg : in;
        if (s.numel() != stride) throw ShapeError("dataset samples disagree on shape");
        std::copy(s.data.begin(), s.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>((k - begin) * stride));
    }
    return out;
}

double validation_mse(ModelF& model, const SampleSource& val_set, std::size_t batch_size) {
    std::vector<std::size_t> ids(val_set.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    double sq_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t begin = 0; begin < ids.size(); begin += batch_size) {
        const std::size_t end = std::min(ids.size(), begin + batch_size);
        TensorF input = stack_batch(val_set, ids, begin, end, false);
        TensorF target = stack_batch(val_set, ids, begin, end, true);
        TensorF pred = model.forward(input, Mode::Eval);
        if (!pred.same_shape(target)) throw ShapeError("validation target shape mismatch");
        for (std::size_t i = 0; i < pred.numel(); ++i) {
            const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
            sq_sum += d * d;
        }
        count += pred.numel();
    }
    return sq_sum / static_cast<double>(count);
}

}  // namespace

TrainResult train(ModelF& model, const SampleSource& train_set, const SampleSource& val_set,
                  const TrainConfig& cfg, const std::string& checkpoint_extra_json) {
    cfg.validate();
    if (train_set.size() == 0) throw ValueError("training dataset is empty");
    if (val_set.size() == 0) throw ValueError("validation dataset is empty");

    std::vector<Tensor<float>*> params;
    std::vector<std::size_t> trainable_ids;
    for (std::size_t i = 0; i < model.store.size(); ++i) {
        if (model.store[static_cast<int>(i)].trainable) {
            params.push_back(&model.store[static_cast<int>(i)].value);
            trainable_ids.push_back(i);
        }
    }
    AdamState<float> adam = AdamState<float>::init_like(params);

    std::mt19937_64 shuffle_rng(cfg.seed);
    std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<std::size_t> ids(train_set.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;

    TrainResult result;
    double best_val = std::numeric_limits<double>::infinity();

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle) shuffle_indices(ids, shuffle_rng);
        double epoch_sq = 0.0;
        std::size_t epoch_n = 0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < ids.size(); begin += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(ids.size(), begin + cfg.batch_size);
            TensorF input = stack_batch(train_set, ids, begin, end, false);
            TensorF target = stack_batch(train_set, ids, begin, end, true);

            TapeF tape;
            std::vector<VarF> leaves = model.register_leaves(tape);
            VarF out = model.forward_on_tape(tape, leaves, input, Mode::Train, &dropout_rng);
            VarF loss = tape.mse_against(out, target);
            const double batch_loss = static_cast<double>(tape.value(loss)[0]);
            if (!std::isfinite(batch_loss)) {
                throw NumericError("NaN/inf training loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_index));
            }
            tape.backward(loss);

            std::vector<TensorF> grads;
            grads.reserve(params.size());
            for (std::size_t k = 0; k < trainable_ids.size(); ++k) {
                grads.push_back(tape.grad(leaves[trainable_ids[k]]));
            }
            adam_step(params, grads, adam, cfg);

            epoch_sq += batch_loss * static_cast<double>(end - begin);
            epoch_n += end - begin;
        }
        const double train_mse = epoch_sq / static_cast<double>(epoch_n);
        const double val_mse = validation_mse(model, val_set, cfg.batch_size);
        if (!std::isfinite(val_mse)) {
            throw NumericError("NaN/inf validation loss at epoch " + std::to_string(epoch));
        }
        result.history.push_back(EpochStats{epoch, train_mse, val_mse});
        if (val_mse < best_val) {
            best_val = val_mse;
            result.best = make_checkpoint(model, static_cast<std::int64_t>(epoch), val_mse, checkpoint_extra_json);
        }
        if (cfg.stop_at_train_mse && train_mse < *cfg.stop_at_train_mse) break;
    }
    return result;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(const std::vector<Tensor<float>*>&, const std::vector<Tensor<float>>&,
                               AdamState<float>&, const TrainConfig&);
template void adam_step<double>(const std::vector<Tensor<double>*>&, const std::vector<Tensor<double>>&,
                                AdamState<double>&, const TrainConfig&);
template double mse_loss<float>(const Tensor<float>&, const Tensor<float>&);
template double mse_loss<double>(const Tensor<double>&, const Tensor<double>&);

}  // namespace coastcast
