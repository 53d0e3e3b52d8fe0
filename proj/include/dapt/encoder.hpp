#pragma once

#include "dapt/pretrain_data.hpp"
#include "dapt/rng.hpp"
#include "dapt/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dapt::model {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Architecture hyperparameters; mirrors the keys of the JSON config file.
struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t hidden_size = 64;
    std::size_t num_layers = 2;
    std::size_t num_heads = 2;
    std::size_t intermediate_size = 256;
    std::size_t max_seq_length = 100;
    std::size_t type_vocab_size = 2;
    double dropout = 0.1;
    double layer_norm_epsilon = 1e-12;

    void validate() const;
    std::size_t head_size() const { return hidden_size / num_heads; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Small default architecture sized to train in seconds to minutes on a CPU.
ModelConfig desk_config(std::size_t vocab_size);

std::string config_to_json(const ModelConfig& config);
/// Requires exactly the ModelConfig keys; unknown or missing keys are errors.
ModelConfig config_from_json(std::string_view text);

/// Number of learnable scalars implied by the config (no allocation).
std::size_t parameter_count(const ModelConfig& config);

struct LayerParameters {
    nn::Tensor query_w, query_b;
    nn::Tensor key_w, key_b;
    nn::Tensor value_w, value_b;
    nn::Tensor attn_out_w, attn_out_b;
    nn::Tensor attn_ln_gain, attn_ln_bias;
    nn::Tensor ffn_in_w, ffn_in_b;
    nn::Tensor ffn_out_w, ffn_out_b;
    nn::Tensor ffn_ln_gain, ffn_ln_bias;
};

struct NamedTensor {
    std::string name;
    nn::Tensor tensor;
};

/// All learnable tensors. Linear weights are stored [in, out]. The MLM
/// output projection reuses token_embedding (tied weights).
struct Parameters {
    ModelConfig config;
    nn::Tensor token_embedding;    // [vocab, hidden]
    nn::Tensor position_embedding; // [max_seq_length, hidden]
    nn::Tensor segment_embedding;  // [type_vocab, hidden]
    nn::Tensor embedding_ln_gain, embedding_ln_bias;
    std::vector<LayerParameters> layers;
    nn::Tensor mlm_transform_w, mlm_transform_b;
    nn::Tensor mlm_ln_gain, mlm_ln_bias;
    nn::Tensor mlm_output_bias; // [vocab]
    nn::Tensor nsp_w, nsp_b;    // [hidden, 2], [2]

    /// Stable, ordered list of every tensor (shared handles).
    std::vector<NamedTensor> named() const;
    std::vector<nn::Tensor> tensors() const;
    Parameters clone() const;
    std::size_t entry_count() const;
    void zero_grad();
};

/// True for biases and layer-norm parameters (no weight decay).
bool is_decay_exempt(std::string_view name);

/// Correctly shaped parameters: zeros, layer-norm gains one.
Parameters allocate_parameters(const ModelConfig& config);

/// Truncated normal (std 0.02, cut at 2 std) weights; zero biases; unit gains.
Parameters init_params(const ModelConfig& config, std::uint64_t seed);

enum class Mode { Train, Eval };

/// Token, segment and pad-mask ids for a batch, row-major [batch_size, seq_len].
struct Batch {
    std::size_t batch_size = 0;
    std::size_t seq_len = 0;
    std::vector<std::int32_t> input_ids;
    std::vector<std::int32_t> segment_ids;
    std::vector<std::uint8_t> pad_mask;
};

/// Stacks examples; with trim_padding, drops trailing columns that are
/// padding in every example (exact, since padded keys get zero attention).
Batch make_batch(std::span<const data::PretrainExample* const> examples, bool trim_padding);

struct ForwardOptions {
    bool collect_attention = false;
    Rng* dropout_rng = nullptr; // required in Train mode when dropout > 0
};

struct EncoderOutput {
    std::size_t batch_size = 0;
    std::size_t seq_len = 0;
    /// num_layers + 1 tensors of shape [batch, seq, hidden]; index 0 is the
    /// normalized embedding sum.
    std::vector<nn::Tensor> hidden_states;
    /// Per layer [batch, heads, seq, seq], only when collect_attention is set.
    std::vector<nn::Tensor> attention_maps;

    const nn::Tensor& last() const { return hidden_states.back(); }
};

EncoderOutput forward(const Parameters& params, const Batch& batch, Mode mode, const ForwardOptions& options = {});

/// Single example of exactly config.max_seq_length positions.
EncoderOutput forward(const Parameters& params, const data::PretrainExample& example, Mode mode,
                      const ForwardOptions& options = {});

/// MLM logits [n, vocab] at flat positions (batch_index * seq_len + position).
nn::Tensor mlm_logits(const Parameters& params, const EncoderOutput& output,
                      std::span<const std::int32_t> flat_positions);

/// NSP logits [batch, 2] from the position-0 hidden state.
nn::Tensor nsp_logits(const Parameters& params, const EncoderOutput& output);

} // namespace dapt::model
