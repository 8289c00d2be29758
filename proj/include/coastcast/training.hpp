#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coastcast/model.hpp"

namespace coastcast {

struct TrainConfig {
    std::size_t batch_size = 16;
    std::size_t epochs = 100;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    bool shuffle = true;
    // Stop once the epoch train MSE drops below this; used by capacity
    // probes, unset for the paper protocol.
    std::optional<double> stop_at_train_mse;

    void validate() const;
    std::string to_json_string() const;
    static TrainConfig from_json_string(const std::string& text);
};

template <typename S>
struct AdamState {
    std::vector<Tensor<S>> m, v;
    std::int64_t t = 0;

    static AdamState init_like(const std::vector<Tensor<S>*>& params);
};

// theta <- theta - lr * mhat / (sqrt(vhat) + eps) with bias-corrected moments.
template <typename S>
void adam_step(const std::vector<Tensor<S>*>& params, const std::vector<Tensor<S>>& grads,
               AdamState<S>& state, const TrainConfig& cfg);

template <typename S>
double mse_loss(const Tensor<S>& pred, const Tensor<S>& target);

// Sample provider for training/validation: inputs (L,H,W,V), targets (1,H,W,V).
class SampleSource {
public:
    virtual ~SampleSource() = default;
    virtual std::size_t size() const = 0;
    virtual void fetch(std::size_t index, TensorF& input, TensorF& target) const = 0;
};

// In-memory dataset, mostly for tests and probes.
class VectorSamples : public SampleSource {
public:
    std::vector<std::pair<TensorF, TensorF>> samples;
    std::size_t size() const override { return samples.size(); }
    void fetch(std::size_t index, TensorF& input, TensorF& target) const override {
        input = samples[index].first;
        target = samples[index].second;
    }
};

struct Checkpoint {
    std::string meta_json;  // model config + training metadata + pipeline extras
    std::vector<std::pair<std::string, TensorF>> tensors;
    std::int64_t epoch = -1;
    double val_mse = 0.0;
};

Checkpoint make_checkpoint(const ModelF& model, std::int64_t epoch, double val_mse,
                           const std::string& extra_json = "{}");
ModelF model_from_checkpoint(const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainResult {
    Checkpoint best;
    std::vector<EpochStats> history;
};

std::string history_csv(const std::vector<EpochStats>& history);

// Full loop: seeded shuffling, Train-mode forward/backward, Adam steps,
// Eval-mode validation after each epoch, best-on-validation retention.
TrainResult train(ModelF& model, const SampleSource& train_set, const SampleSource& val_set,
                  const TrainConfig& cfg, const std::string& checkpoint_extra_json = "{}");

}  // namespace coastcast
