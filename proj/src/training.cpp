#include "dapt/training.hpp"

#include "dapt/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace dapt::train {

using model::Mode;
using model::Parameters;

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* msg) {
        if (!ok) {
            throw TrainingError(std::string("train config: ") + msg);
        }
    };
    require(batch_size >= 1, "batch_size must be at least 1");
    require(epochs >= 1, "epochs must be at least 1");
    require(learning_rate > 0.0, "learning_rate must be positive");
    require(warmup_fraction >= 0.0 && warmup_fraction < 1.0, "warmup_fraction must lie in [0, 1)");
    require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must lie in [0, 1)");
    require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must lie in [0, 1)");
    require(adam_epsilon > 0.0, "adam_epsilon must be positive");
    require(weight_decay >= 0.0, "weight_decay must be non-negative");
    require(max_seq_length >= 5, "max_seq_length must be at least 5");
    require(schedule_epochs == 0 || schedule_epochs >= epochs, "schedule_epochs must cover epochs");
}

LossTensors compute_loss(const Parameters& params, std::span<const data::PretrainExample* const> batch, Mode mode,
                         Rng* dropout_rng) {
    if (batch.empty()) {
        throw TrainingError("loss: empty batch");
    }
    const model::Batch packed = model::make_batch(batch, true);
    std::vector<std::int32_t> positions;
    std::vector<std::int32_t> labels;
    std::vector<std::int32_t> nsp_targets;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& ex = *batch[b];
        for (std::size_t i = 0; i < ex.masked_positions.size(); ++i) {
            const auto pos = static_cast<std::size_t>(ex.masked_positions[i]);
            if (pos >= packed.seq_len) {
                throw TrainingError("loss: masked position points at padding");
            }
            positions.push_back(static_cast<std::int32_t>(b * packed.seq_len + pos));
            labels.push_back(ex.masked_label_ids[i]);
        }
        nsp_targets.push_back(static_cast<std::int32_t>(ex.nsp_label));
    }
    if (positions.empty()) {
        throw TrainingError("loss: batch has no masked positions");
    }
    model::ForwardOptions options;
    options.dropout_rng = dropout_rng;
    const auto output = model::forward(params, packed, mode, options);
    LossTensors loss;
    loss.mlm = nn::cross_entropy(model::mlm_logits(params, output, positions), labels);
    loss.nsp = nn::cross_entropy(model::nsp_logits(params, output), nsp_targets);
    loss.total = nn::add(loss.mlm, loss.nsp);
    return loss;
}

Metrics evaluate(const Parameters& params, std::span<const data::PretrainExample> examples, std::size_t batch_size) {
    if (examples.empty() || batch_size == 0) {
        throw TrainingError("evaluate: no examples");
    }
    nn::NoGradGuard no_grad;
    Metrics m;
    std::size_t mlm_correct = 0;
    std::size_t nsp_correct = 0;
    double mlm_sum = 0.0;
    double nsp_sum = 0.0;
    for (std::size_t start = 0; start < examples.size(); start += batch_size) {
        const std::size_t end = std::min(examples.size(), start + batch_size);
        std::vector<const data::PretrainExample*> ptrs;
        for (std::size_t i = start; i < end; ++i) {
            ptrs.push_back(&examples[i]);
        }
        const model::Batch packed = model::make_batch(ptrs, true);
        const auto output = model::forward(params, packed, Mode::Eval);
        std::vector<std::int32_t> positions;
        std::vector<std::int32_t> labels;
        for (std::size_t b = 0; b < ptrs.size(); ++b) {
            for (std::size_t i = 0; i < ptrs[b]->masked_positions.size(); ++i) {
                positions.push_back(static_cast<std::int32_t>(b * packed.seq_len) + ptrs[b]->masked_positions[i]);
                labels.push_back(ptrs[b]->masked_label_ids[i]);
            }
        }
        const auto mlm = model::mlm_logits(params, output, positions);
        const auto nsp = model::nsp_logits(params, output);
        const std::size_t vocab = mlm.dim(1);
        for (std::size_t r = 0; r < labels.size(); ++r) {
            const auto row = mlm.data().subspan(r * vocab, vocab);
            const auto best = std::max_element(row.begin(), row.end()) - row.begin();
            mlm_correct += best == labels[r] ? 1 : 0;
        }
        for (std::size_t b = 0; b < ptrs.size(); ++b) {
            const auto row = nsp.data().subspan(b * 2, 2);
            const int predicted = row[1] > row[0] ? 1 : 0;
            nsp_correct += predicted == static_cast<int>(ptrs[b]->nsp_label) ? 1 : 0;
        }
        std::vector<std::int32_t> nsp_targets;
        for (const auto* ex : ptrs) {
            nsp_targets.push_back(static_cast<std::int32_t>(ex->nsp_label));
        }
        mlm_sum += nn::cross_entropy(mlm, labels).item() * static_cast<double>(labels.size());
        nsp_sum += nn::cross_entropy(nsp, nsp_targets).item() * static_cast<double>(ptrs.size());
        m.masked_positions += labels.size();
        m.examples += ptrs.size();
    }
    m.mlm_loss = mlm_sum / static_cast<double>(m.masked_positions);
    m.nsp_loss = nsp_sum / static_cast<double>(m.examples);
    m.mlm_accuracy = static_cast<double>(mlm_correct) / static_cast<double>(m.masked_positions);
    m.nsp_accuracy = static_cast<double>(nsp_correct) / static_cast<double>(m.examples);
    return m;
}

AdamState AdamState::zeros_like(const Parameters& params) {
    AdamState s;
    for (const auto& nt : params.named()) {
        s.first.emplace_back(nt.tensor.size(), 0.0);
        s.second.emplace_back(nt.tensor.size(), 0.0);
    }
    return s;
}

double scheduled_learning_rate(std::size_t step_index, std::size_t total_steps, const TrainConfig& config) {
    if (step_index == 0 || step_index > total_steps) {
        throw TrainingError("schedule: step " + std::to_string(step_index) + " outside 1.." +
                            std::to_string(total_steps));
    }
    const auto warmup = static_cast<std::size_t>(std::floor(config.warmup_fraction * static_cast<double>(total_steps)));
    const std::size_t k = step_index - 1;
    if (k < warmup) {
        return config.learning_rate * static_cast<double>(k + 1) / static_cast<double>(warmup);
    }
    return config.learning_rate * static_cast<double>(total_steps - k) / static_cast<double>(total_steps - warmup);
}

void adam_step(const std::vector<model::NamedTensor>& params, AdamState& state, std::size_t step_index,
               double learning_rate, const TrainConfig& config) {
    if (step_index == 0) {
        throw TrainingError("adam_step: step index must be at least 1");
    }
    if (state.first.size() != params.size() || state.second.size() != params.size()) {
        throw TrainingError("adam_step: optimizer state does not match parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto g = params[i].tensor.grad();
        for (double v : g) {
            if (!std::isfinite(v)) {
                throw TrainingError("non-finite gradient in " + params[i].name + " at step " +
                                    std::to_string(step_index));
            }
        }
    }
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double t = static_cast<double>(step_index);
    const double correction1 = 1.0 - std::pow(b1, t);
    const double correction2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto tensor = params[i].tensor;
        const auto g = tensor.grad();
        auto p = tensor.mutable_data();
        auto& m = state.first[i];
        auto& v = state.second[i];
        if (m.size() != p.size() || v.size() != p.size()) {
            throw TrainingError("adam_step: moment size mismatch for " + params[i].name);
        }
        const double decay = model::is_decay_exempt(params[i].name) ? 0.0 : config.weight_decay;
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            p[j] -= learning_rate * (m_hat / (std::sqrt(v_hat) + config.adam_epsilon) + decay * p[j]);
        }
    }
    state.step = step_index;
}

namespace {

void check_dataset(const data::Dataset& dataset, const model::ModelConfig& mc, const TrainConfig& tc) {
    if (dataset.header.vocab_size != mc.vocab_size) {
        throw TrainingError("dataset vocabulary size " + std::to_string(dataset.header.vocab_size) +
                            " does not match model vocab_size " + std::to_string(mc.vocab_size));
    }
    if (dataset.header.max_seq_length != mc.max_seq_length) {
        throw TrainingError("dataset max_seq_length " + std::to_string(dataset.header.max_seq_length) +
                            " does not match model max_seq_length " + std::to_string(mc.max_seq_length));
    }
    if (tc.max_seq_length != mc.max_seq_length) {
        throw TrainingError("train max_seq_length " + std::to_string(tc.max_seq_length) +
                            " does not match model max_seq_length " + std::to_string(mc.max_seq_length));
    }
}

Checkpoint snapshot(const Parameters& params, const AdamState& state, CheckpointMetadata meta) {
    return Checkpoint{params.clone(), state, std::move(meta)};
}

TrainOutcome run_training(Parameters params, const data::Dataset& dataset, const TrainConfig& config,
                          CheckpointMetadata meta, const TrainHooks& hooks) {
    const std::size_t n = dataset.examples.size();
    const std::size_t steps_per_epoch = n / config.batch_size;
    if (steps_per_epoch == 0) {
        throw TrainingError("dataset of " + std::to_string(n) + " examples is smaller than one batch of " +
                            std::to_string(config.batch_size));
    }
    const std::size_t schedule_epochs = config.schedule_epochs == 0 ? config.epochs : config.schedule_epochs;
    const std::size_t total_steps = steps_per_epoch * schedule_epochs;

    Rng shuffle_rng(Rng::mix(config.seed, 10));
    Rng dropout_rng(Rng::mix(config.seed, 11));
    AdamState state = AdamState::zeros_like(params);
    const auto named = params.named();

    TrainOutcome outcome;
    std::vector<std::size_t> order(n);
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.index(i)]);
        }
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            ++step;
            std::vector<const data::PretrainExample*> batch;
            batch.reserve(config.batch_size);
            for (std::size_t b = 0; b < config.batch_size; ++b) {
                batch.push_back(&dataset.examples[order[s * config.batch_size + b]]);
            }
            params.zero_grad();
            auto loss = compute_loss(params, batch, Mode::Train, &dropout_rng);
            const LossRecord record{step, loss.mlm.item(), loss.nsp.item(), loss.total.item()};
            if (!std::isfinite(record.total_loss) || !std::isfinite(record.mlm_loss) ||
                !std::isfinite(record.nsp_loss)) {
                throw TrainingError("non-finite loss at step " + std::to_string(step));
            }
            loss.total.backward();
            adam_step(named, state, step, scheduled_learning_rate(step, total_steps, config), config);
            outcome.losses.push_back(record);
            if (hooks.on_step) {
                hooks.on_step(record);
            }
            meta.steps_completed = step;
            meta.final_loss = record.total_loss;
            if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0 && hooks.on_checkpoint) {
                hooks.on_checkpoint(step, snapshot(params, state, meta));
            }
        }
        meta.epochs_completed = epoch;
        if (hooks.on_epoch_end) {
            hooks.on_epoch_end(epoch, snapshot(params, state, meta));
        }
    }
    params.zero_grad();
    outcome.checkpoint = Checkpoint{std::move(params), std::move(state), std::move(meta)};
    return outcome;
}

} // namespace

TrainOutcome pretrain(const data::Dataset& dataset, const model::ModelConfig& model_config, const TrainConfig& config,
                      const TrainHooks& hooks) {
    config.validate();
    model_config.validate();
    check_dataset(dataset, model_config, config);
    CheckpointMetadata meta;
    meta.seed = config.seed;
    meta.phase = "pretrain";
    return run_training(model::init_params(model_config, Rng::mix(config.seed, 0)), dataset, config, std::move(meta),
                        hooks);
}

TrainOutcome finetune(const Checkpoint& base, const data::Dataset& dataset, const TrainConfig& config,
                      const TrainHooks& hooks) {
    const auto& mc = base.params.config;
    if (dataset.header.vocab_size != mc.vocab_size || dataset.header.max_seq_length != mc.max_seq_length) {
        throw TrainingError("finetune: base checkpoint (vocab_size " + std::to_string(mc.vocab_size) +
                            ", max_seq_length " + std::to_string(mc.max_seq_length) +
                            ") does not match dataset (vocab_size " + std::to_string(dataset.header.vocab_size) +
                            ", max_seq_length " + std::to_string(dataset.header.max_seq_length) + ")");
    }
    CheckpointMetadata meta;
    meta.seed = config.seed;
    meta.phase = "finetune";
    meta.parent_hash = checkpoint_hash(base);
    if (config.epochs == 0) {
        TrainOutcome outcome;
        outcome.checkpoint = Checkpoint{base.params.clone(), AdamState::zeros_like(base.params), std::move(meta)};
        return outcome;
    }
    config.validate();
    check_dataset(dataset, mc, config);
    return run_training(base.params.clone(), dataset, config, std::move(meta), hooks);
}

std::string format_loss_log(const std::vector<LossRecord>& losses) {
    std::ostringstream out;
    out << "step,mlm_loss,nsp_loss,total_loss\n";
    char buf[128];
    for (const auto& r : losses) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", r.step, r.mlm_loss, r.nsp_loss, r.total_loss);
        out << buf;
    }
    return out.str();
}

} // namespace dapt::train
