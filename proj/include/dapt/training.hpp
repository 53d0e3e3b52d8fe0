#pragma once

#include "dapt/encoder.hpp"
#include "dapt/pretrain_data.hpp"
#include "dapt/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dapt::train {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Epoch presets used for the fine-tuning sweep.
inline constexpr std::size_t kEpochPresets[] = {100, 500, 1000};

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 100;
    double learning_rate = 1e-3;
    double warmup_fraction = 0.1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double weight_decay = 0.01;
    std::uint64_t seed = 42;
    std::size_t max_seq_length = 100;
    /// Save an intermediate checkpoint every N steps (0 = never).
    std::size_t checkpoint_every = 0;
    /// Length of the learning-rate schedule in epochs; 0 means `epochs`.
    std::size_t schedule_epochs = 0;

    void validate() const;
};

struct LossRecord {
    std::size_t step = 0;
    double mlm_loss = 0.0;
    double nsp_loss = 0.0;
    double total_loss = 0.0;
    friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

struct LossTensors {
    nn::Tensor total;
    nn::Tensor mlm;
    nn::Tensor nsp;
};

/// Mean MLM cross-entropy over every masked position in the batch plus mean
/// NSP cross-entropy over its examples.
LossTensors compute_loss(const model::Parameters& params, std::span<const data::PretrainExample* const> batch,
                         model::Mode mode, Rng* dropout_rng = nullptr);

struct Metrics {
    double mlm_loss = 0.0;
    double nsp_loss = 0.0;
    double mlm_accuracy = 0.0;
    double nsp_accuracy = 0.0;
    std::size_t masked_positions = 0;
    std::size_t examples = 0;
};

/// Eval-mode losses and argmax accuracies over a set of examples.
Metrics evaluate(const model::Parameters& params, std::span<const data::PretrainExample> examples,
                 std::size_t batch_size = 32);

/// First and second moment estimates, aligned with Parameters::named().
struct AdamState {
    std::vector<std::vector<double>> first;
    std::vector<std::vector<double>> second;
    std::size_t step = 0;

    static AdamState zeros_like(const model::Parameters& params);
    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Linear warmup over warmup_fraction of the steps, then linear decay.
/// step_index is 1-based.
double scheduled_learning_rate(std::size_t step_index, std::size_t total_steps, const TrainConfig& config);

/// Bias-corrected Adam update with decoupled weight decay (skipped for
/// biases and layer-norm parameters). Gradients are read from the tensors.
void adam_step(const std::vector<model::NamedTensor>& params, AdamState& state, std::size_t step_index,
               double learning_rate, const TrainConfig& config);

struct CheckpointMetadata {
    std::uint64_t steps_completed = 0;
    std::uint64_t epochs_completed = 0;
    double final_loss = 0.0;
    std::uint64_t seed = 0;
    std::string parent_hash; // empty for a checkpoint trained from scratch
    std::string phase;       // "init", "pretrain" or "finetune"
    friend bool operator==(const CheckpointMetadata&, const CheckpointMetadata&) = default;
};

struct Checkpoint {
    model::Parameters params;
    std::optional<AdamState> moments;
    CheckpointMetadata meta;
};

struct TrainHooks {
    std::function<void(const LossRecord&)> on_step;
    std::function<void(std::size_t step, const Checkpoint&)> on_checkpoint;
    /// Called after each epoch with the 1-based epoch number.
    std::function<void(std::size_t epoch, const Checkpoint&)> on_epoch_end;
};

struct TrainOutcome {
    Checkpoint checkpoint;
    std::vector<LossRecord> losses;
};

/// Trains freshly initialized parameters (seeded by config.seed).
TrainOutcome pretrain(const data::Dataset& dataset, const model::ModelConfig& model_config, const TrainConfig& config,
                      const TrainHooks& hooks = {});

/// Continues training every parameter of `base` on a domain dataset.
/// Optimizer moments start from zero; the result records the base's hash.
TrainOutcome finetune(const Checkpoint& base, const data::Dataset& dataset, const TrainConfig& config,
                      const TrainHooks& hooks = {});

/// Loss log CSV: step,mlm_loss,nsp_loss,total_loss
std::string format_loss_log(const std::vector<LossRecord>& losses);

} // namespace dapt::train
