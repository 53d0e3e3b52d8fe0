#include "dapt/encoder.hpp"

#include "json.hpp"

#include <cmath>
#include <set>

namespace dapt::model {

using nn::Tensor;

namespace {

constexpr double kInitStd = 0.02;
constexpr double kMaskedScore = -1e30;

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return nn::add(nn::matmul(x, w), b); }

Tensor maybe_dropout(const Tensor& x, double p, Mode mode, const ForwardOptions& options) {
    if (mode != Mode::Train || p == 0.0) {
        return x;
    }
    if (options.dropout_rng == nullptr) {
        throw std::invalid_argument("forward: train mode with dropout needs a dropout_rng");
    }
    return nn::dropout(x, p, *options.dropout_rng);
}

} // namespace

void ModelConfig::validate() const {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) {
            throw ConfigError("model config: " + msg);
        }
    };
    require(vocab_size > static_cast<std::size_t>(wordpiece::kNumSpecialTokens),
            "vocab_size must exceed the special tokens");
    require(hidden_size > 0, "hidden_size must be positive");
    require(num_layers > 0, "num_layers must be positive");
    require(num_heads > 0, "num_heads must be positive");
    require(hidden_size % num_heads == 0, "hidden_size must be divisible by num_heads");
    require(intermediate_size > 0, "intermediate_size must be positive");
    require(max_seq_length >= 5, "max_seq_length must be at least 5");
    require(type_vocab_size == 2, "type_vocab_size must be 2");
    require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
    require(layer_norm_epsilon > 0.0, "layer_norm_epsilon must be positive");
}

ModelConfig desk_config(std::size_t vocab_size) {
    ModelConfig c;
    c.vocab_size = vocab_size;
    return c;
}

std::string config_to_json(const ModelConfig& c) {
    nlohmann::ordered_json j;
    j["vocab_size"] = c.vocab_size;
    j["hidden_size"] = c.hidden_size;
    j["num_layers"] = c.num_layers;
    j["num_heads"] = c.num_heads;
    j["intermediate_size"] = c.intermediate_size;
    j["max_seq_length"] = c.max_seq_length;
    j["type_vocab_size"] = c.type_vocab_size;
    j["dropout"] = c.dropout;
    j["layer_norm_epsilon"] = c.layer_norm_epsilon;
    return j.dump(2) + "\n";
}

ModelConfig config_from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("model config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("model config: expected a JSON object");
    }
    static const std::set<std::string> known = {"vocab_size",        "hidden_size",    "num_layers",
                                                "num_heads",         "intermediate_size", "max_seq_length",
                                                "type_vocab_size",   "dropout",        "layer_norm_epsilon"};
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw ConfigError("model config: unknown key '" + key + "'");
        }
    }
    for (const auto& key : known) {
        if (!j.contains(key)) {
            throw ConfigError("model config: missing key '" + key + "'");
        }
    }
    auto count = [&](const char* key) {
        const auto& v = j.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            throw ConfigError(std::string("model config: '") + key + "' must be a non-negative integer");
        }
        return v.get<std::size_t>();
    };
    auto real = [&](const char* key) {
        const auto& v = j.at(key);
        if (!v.is_number()) {
            throw ConfigError(std::string("model config: '") + key + "' must be a number");
        }
        return v.get<double>();
    };
    ModelConfig c;
    c.vocab_size = count("vocab_size");
    c.hidden_size = count("hidden_size");
    c.num_layers = count("num_layers");
    c.num_heads = count("num_heads");
    c.intermediate_size = count("intermediate_size");
    c.max_seq_length = count("max_seq_length");
    c.type_vocab_size = count("type_vocab_size");
    c.dropout = real("dropout");
    c.layer_norm_epsilon = real("layer_norm_epsilon");
    c.validate();
    return c;
}

std::size_t parameter_count(const ModelConfig& c) {
    const std::size_t h = c.hidden_size;
    const std::size_t inter = c.intermediate_size;
    const std::size_t embeddings = (c.vocab_size + c.max_seq_length + c.type_vocab_size) * h + 2 * h;
    const std::size_t attention = 4 * (h * h + h) + 2 * h;
    const std::size_t feed_forward = h * inter + inter + inter * h + h + 2 * h;
    const std::size_t mlm_head = h * h + h + 2 * h + c.vocab_size;
    const std::size_t nsp_head = 2 * h + 2;
    return embeddings + c.num_layers * (attention + feed_forward) + mlm_head + nsp_head;
}

std::vector<NamedTensor> Parameters::named() const {
    std::vector<NamedTensor> out{
        {"embeddings.token", token_embedding},
        {"embeddings.position", position_embedding},
        {"embeddings.segment", segment_embedding},
        {"embeddings.ln.gain", embedding_ln_gain},
        {"embeddings.ln.bias", embedding_ln_bias},
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& p = layers[l];
        const std::string prefix = "layer." + std::to_string(l) + ".";
        out.push_back({prefix + "attention.query.weight", p.query_w});
        out.push_back({prefix + "attention.query.bias", p.query_b});
        out.push_back({prefix + "attention.key.weight", p.key_w});
        out.push_back({prefix + "attention.key.bias", p.key_b});
        out.push_back({prefix + "attention.value.weight", p.value_w});
        out.push_back({prefix + "attention.value.bias", p.value_b});
        out.push_back({prefix + "attention.output.weight", p.attn_out_w});
        out.push_back({prefix + "attention.output.bias", p.attn_out_b});
        out.push_back({prefix + "attention.ln.gain", p.attn_ln_gain});
        out.push_back({prefix + "attention.ln.bias", p.attn_ln_bias});
        out.push_back({prefix + "ffn.in.weight", p.ffn_in_w});
        out.push_back({prefix + "ffn.in.bias", p.ffn_in_b});
        out.push_back({prefix + "ffn.out.weight", p.ffn_out_w});
        out.push_back({prefix + "ffn.out.bias", p.ffn_out_b});
        out.push_back({prefix + "ffn.ln.gain", p.ffn_ln_gain});
        out.push_back({prefix + "ffn.ln.bias", p.ffn_ln_bias});
    }
    out.push_back({"mlm.transform.weight", mlm_transform_w});
    out.push_back({"mlm.transform.bias", mlm_transform_b});
    out.push_back({"mlm.ln.gain", mlm_ln_gain});
    out.push_back({"mlm.ln.bias", mlm_ln_bias});
    out.push_back({"mlm.output.bias", mlm_output_bias});
    out.push_back({"nsp.weight", nsp_w});
    out.push_back({"nsp.bias", nsp_b});
    return out;
}

std::vector<Tensor> Parameters::tensors() const {
    std::vector<Tensor> out;
    for (auto& nt : named()) {
        out.push_back(nt.tensor);
    }
    return out;
}

Parameters Parameters::clone() const {
    Parameters copy = allocate_parameters(config);
    const auto src = named();
    const auto dst = copy.named();
    for (std::size_t i = 0; i < src.size(); ++i) {
        auto to = dst[i].tensor;
        const auto from = src[i].tensor.data();
        std::copy(from.begin(), from.end(), to.mutable_data().begin());
    }
    return copy;
}

std::size_t Parameters::entry_count() const {
    std::size_t n = 0;
    for (const auto& nt : named()) {
        n += nt.tensor.size();
    }
    return n;
}

void Parameters::zero_grad() {
    for (auto& nt : named()) {
        nt.tensor.zero_grad();
    }
}

bool is_decay_exempt(std::string_view name) {
    return name.ends_with(".bias") || name.find(".ln.") != std::string_view::npos;
}

Parameters allocate_parameters(const ModelConfig& config) {
    config.validate();
    const std::size_t h = config.hidden_size;
    const std::size_t inter = config.intermediate_size;
    auto zeros = [](nn::Shape s) { return Tensor::zeros(std::move(s), true); };
    auto ones = [](nn::Shape s) { return Tensor::full(std::move(s), 1.0, true); };

    Parameters p;
    p.config = config;
    p.token_embedding = zeros({config.vocab_size, h});
    p.position_embedding = zeros({config.max_seq_length, h});
    p.segment_embedding = zeros({config.type_vocab_size, h});
    p.embedding_ln_gain = ones({h});
    p.embedding_ln_bias = zeros({h});
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        LayerParameters lp;
        lp.query_w = zeros({h, h});
        lp.query_b = zeros({h});
        lp.key_w = zeros({h, h});
        lp.key_b = zeros({h});
        lp.value_w = zeros({h, h});
        lp.value_b = zeros({h});
        lp.attn_out_w = zeros({h, h});
        lp.attn_out_b = zeros({h});
        lp.attn_ln_gain = ones({h});
        lp.attn_ln_bias = zeros({h});
        lp.ffn_in_w = zeros({h, inter});
        lp.ffn_in_b = zeros({inter});
        lp.ffn_out_w = zeros({inter, h});
        lp.ffn_out_b = zeros({h});
        lp.ffn_ln_gain = ones({h});
        lp.ffn_ln_bias = zeros({h});
        p.layers.push_back(std::move(lp));
    }
    p.mlm_transform_w = zeros({h, h});
    p.mlm_transform_b = zeros({h});
    p.mlm_ln_gain = ones({h});
    p.mlm_ln_bias = zeros({h});
    p.mlm_output_bias = zeros({config.vocab_size});
    p.nsp_w = zeros({h, 2});
    p.nsp_b = zeros({2});
    return p;
}

Parameters init_params(const ModelConfig& config, std::uint64_t seed) {
    Parameters p = allocate_parameters(config);
    Rng rng(seed);
    for (auto& nt : p.named()) {
        if (is_decay_exempt(nt.name)) {
            continue; // biases stay 0, gains stay 1
        }
        for (double& v : nt.tensor.mutable_data()) {
            v = rng.truncated_normal(kInitStd, 2.0);
        }
    }
    return p;
}

Batch make_batch(std::span<const data::PretrainExample* const> examples, bool trim_padding) {
    if (examples.empty()) {
        throw std::invalid_argument("make_batch: empty batch");
    }
    const std::size_t full = examples.front()->length();
    std::size_t used = 0;
    for (const auto* ex : examples) {
        if (ex->length() != full) {
            throw std::invalid_argument("make_batch: examples differ in length");
        }
        for (std::size_t i = full; i-- > 0;) {
            if (ex->pad_mask[i] != 0) {
                used = std::max(used, i + 1);
                break;
            }
        }
    }
    Batch b;
    b.batch_size = examples.size();
    b.seq_len = trim_padding ? std::max<std::size_t>(used, 1) : full;
    for (const auto* ex : examples) {
        b.input_ids.insert(b.input_ids.end(), ex->input_ids.begin(), ex->input_ids.begin() + b.seq_len);
        b.segment_ids.insert(b.segment_ids.end(), ex->segment_ids.begin(), ex->segment_ids.begin() + b.seq_len);
        b.pad_mask.insert(b.pad_mask.end(), ex->pad_mask.begin(), ex->pad_mask.begin() + b.seq_len);
    }
    return b;
}

EncoderOutput forward(const Parameters& params, const Batch& batch, Mode mode, const ForwardOptions& options) {
    const auto& cfg = params.config;
    const std::size_t B = batch.batch_size;
    const std::size_t S = batch.seq_len;
    const std::size_t H = cfg.hidden_size;
    const std::size_t heads = cfg.num_heads;
    const std::size_t d = cfg.head_size();
    if (B == 0 || S == 0) {
        throw std::invalid_argument("forward: empty batch");
    }
    if (S > cfg.max_seq_length) {
        throw std::invalid_argument("forward: sequence length " + std::to_string(S) + " exceeds max_seq_length " +
                                    std::to_string(cfg.max_seq_length));
    }
    if (batch.input_ids.size() != B * S || batch.segment_ids.size() != B * S || batch.pad_mask.size() != B * S) {
        throw std::invalid_argument("forward: batch arrays do not match batch_size x seq_len");
    }
    for (auto id : batch.input_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
            throw std::out_of_range("forward: token id " + std::to_string(id) + " outside vocabulary of " +
                                    std::to_string(cfg.vocab_size));
        }
    }
    for (auto s : batch.segment_ids) {
        if (s < 0 || static_cast<std::size_t>(s) >= cfg.type_vocab_size) {
            throw std::out_of_range("forward: segment id " + std::to_string(s) + " out of range");
        }
    }

    EncoderOutput out;
    out.batch_size = B;
    out.seq_len = S;

    std::vector<std::int32_t> positions(S);
    for (std::size_t i = 0; i < S; ++i) {
        positions[i] = static_cast<std::int32_t>(i);
    }
    Tensor tok = nn::reshape(nn::embedding_lookup(params.token_embedding, batch.input_ids), {B, S, H});
    Tensor seg = nn::reshape(nn::embedding_lookup(params.segment_embedding, batch.segment_ids), {B, S, H});
    Tensor pos = nn::embedding_lookup(params.position_embedding, positions);
    Tensor x = nn::add(nn::add(tok, seg), pos);
    x = nn::layer_norm(x, params.embedding_ln_gain, params.embedding_ln_bias, cfg.layer_norm_epsilon);
    x = maybe_dropout(x, cfg.dropout, mode, options);
    out.hidden_states.push_back(x);

    std::vector<double> mask_values(B * S);
    for (std::size_t i = 0; i < B * S; ++i) {
        mask_values[i] = batch.pad_mask[i] != 0 ? 0.0 : kMaskedScore;
    }
    const Tensor key_mask = Tensor::from_data({B, 1, 1, S}, std::move(mask_values));
    const double score_scale = 1.0 / std::sqrt(static_cast<double>(d));

    auto split_heads = [&](const Tensor& t) { return nn::transpose(nn::reshape(t, {B, S, heads, d}), 1, 2); };

    for (const auto& layer : params.layers) {
        Tensor q = split_heads(linear(x, layer.query_w, layer.query_b));
        Tensor k = split_heads(linear(x, layer.key_w, layer.key_b));
        Tensor v = split_heads(linear(x, layer.value_w, layer.value_b));
        Tensor scores = nn::add(nn::scale(nn::matmul_nt(q, k), score_scale), key_mask);
        Tensor probs = nn::softmax(scores);
        if (options.collect_attention) {
            out.attention_maps.push_back(probs);
        }
        probs = maybe_dropout(probs, cfg.dropout, mode, options);
        Tensor context = nn::reshape(nn::transpose(nn::matmul(probs, v), 1, 2), {B, S, H});
        Tensor attn = maybe_dropout(linear(context, layer.attn_out_w, layer.attn_out_b), cfg.dropout, mode, options);
        x = nn::layer_norm(nn::add(x, attn), layer.attn_ln_gain, layer.attn_ln_bias, cfg.layer_norm_epsilon);

        Tensor inner = nn::gelu(linear(x, layer.ffn_in_w, layer.ffn_in_b));
        Tensor ffn = maybe_dropout(linear(inner, layer.ffn_out_w, layer.ffn_out_b), cfg.dropout, mode, options);
        x = nn::layer_norm(nn::add(x, ffn), layer.ffn_ln_gain, layer.ffn_ln_bias, cfg.layer_norm_epsilon);
        out.hidden_states.push_back(x);
    }
    return out;
}

EncoderOutput forward(const Parameters& params, const data::PretrainExample& example, Mode mode,
                      const ForwardOptions& options) {
    if (example.length() != params.config.max_seq_length) {
        throw std::invalid_argument("forward: example length " + std::to_string(example.length()) +
                                    " differs from max_seq_length " + std::to_string(params.config.max_seq_length));
    }
    const data::PretrainExample* one[] = {&example};
    return forward(params, make_batch(one, false), mode, options);
}

Tensor mlm_logits(const Parameters& params, const EncoderOutput& output, std::span<const std::int32_t> flat_positions) {
    if (flat_positions.empty()) {
        throw std::invalid_argument("mlm_logits: no masked positions");
    }
    const std::size_t rows = output.batch_size * output.seq_len;
    for (auto p : flat_positions) {
        if (p < 0 || static_cast<std::size_t>(p) >= rows) {
            throw std::out_of_range("mlm_logits: position " + std::to_string(p) + " out of range");
        }
    }
    const auto& cfg = params.config;
    Tensor flat = nn::reshape(output.last(), {rows, cfg.hidden_size});
    Tensor picked = nn::embedding_lookup(flat, flat_positions);
    Tensor t = nn::gelu(linear(picked, params.mlm_transform_w, params.mlm_transform_b));
    t = nn::layer_norm(t, params.mlm_ln_gain, params.mlm_ln_bias, cfg.layer_norm_epsilon);
    return nn::add(nn::matmul_nt(t, params.token_embedding), params.mlm_output_bias);
}

Tensor nsp_logits(const Parameters& params, const EncoderOutput& output) {
    const auto& cfg = params.config;
    std::vector<std::int32_t> cls_rows(output.batch_size);
    for (std::size_t b = 0; b < output.batch_size; ++b) {
        cls_rows[b] = static_cast<std::int32_t>(b * output.seq_len);
    }
    Tensor flat = nn::reshape(output.last(), {output.batch_size * output.seq_len, cfg.hidden_size});
    Tensor cls = nn::embedding_lookup(flat, cls_rows);
    return linear(cls, params.nsp_w, params.nsp_b);
}

} // namespace dapt::model
