#include "dapt/sentemb.hpp"

#include "dapt/corpus.hpp"
#include "dapt/pretrain_data.hpp"

#include <algorithm>
#include <cmath>

namespace dapt::embed {

TokenVectors token_embeddings(const model::Parameters& params, std::string_view sentence,
                              const wordpiece::Vocabulary& vocab, const PoolingPolicy& policy,
                              bool pad_to_max_length) {
    const auto& cfg = params.config;
    if (vocab.size() != cfg.vocab_size) {
        throw EmbeddingError("vocabulary size " + std::to_string(vocab.size()) + " does not match model vocab_size " +
                             std::to_string(cfg.vocab_size));
    }
    const std::size_t layer = policy.layer_index.value_or(cfg.num_layers);
    if (layer > cfg.num_layers) {
        throw EmbeddingError("layer index " + std::to_string(layer) + " outside [0, " +
                             std::to_string(cfg.num_layers) + "]");
    }
    const std::string cleaned = corpus::clean_text(sentence);
    if (cleaned.empty()) {
        throw EmbeddingError("sentence is empty after cleaning");
    }
    const auto tokens = wordpiece::tokenize(cleaned, vocab);
    if (tokens.empty()) {
        throw EmbeddingError("sentence has no tokens");
    }
    const auto packed = data::pack_pair(tokens, nullptr, cfg.max_seq_length);
    const std::size_t used = packed.sequence.size();

    model::Batch batch;
    batch.batch_size = 1;
    batch.seq_len = pad_to_max_length ? cfg.max_seq_length : used;
    batch.input_ids.assign(batch.seq_len, wordpiece::kPadId);
    batch.segment_ids.assign(batch.seq_len, 0);
    batch.pad_mask.assign(batch.seq_len, 0);
    for (std::size_t i = 0; i < used; ++i) {
        batch.input_ids[i] = packed.sequence.ids[i];
        batch.pad_mask[i] = 1;
    }

    nn::NoGradGuard no_grad;
    const auto output = model::forward(params, batch, model::Mode::Eval);
    const auto hidden = output.hidden_states[layer].data();
    const std::size_t h = cfg.hidden_size;

    TokenVectors result;
    result.truncated = used < tokens.size() + 2;
    for (std::size_t i = 0; i < used; ++i) {
        const auto id = packed.sequence.ids[i];
        const bool special = id == wordpiece::kClsId || id == wordpiece::kSepId;
        if (special && !policy.include_special_tokens) {
            continue;
        }
        result.tokens.push_back(packed.sequence.tokens[i]);
        result.vectors.emplace_back(hidden.begin() + static_cast<std::ptrdiff_t>(i * h),
                                    hidden.begin() + static_cast<std::ptrdiff_t>((i + 1) * h));
    }
    if (result.vectors.empty()) {
        throw EmbeddingError("sentence has no poolable tokens");
    }
    return result;
}

SentenceEmbedding mean_pool(const std::vector<std::vector<double>>& vectors) {
    if (vectors.empty()) {
        throw EmbeddingError("mean_pool: no vectors");
    }
    const std::size_t dim = vectors.front().size();
    SentenceEmbedding e;
    e.vector.assign(dim, 0.0);
    for (const auto& v : vectors) {
        if (v.size() != dim) {
            throw EmbeddingError("mean_pool: vectors differ in dimension");
        }
        for (std::size_t i = 0; i < dim; ++i) {
            e.vector[i] += v[i];
        }
    }
    const double n = static_cast<double>(vectors.size());
    for (double& x : e.vector) {
        x /= n;
    }
    e.token_count = vectors.size();
    return e;
}

SentenceEmbedding embed_sentence(const model::Parameters& params, std::string_view sentence,
                                 const wordpiece::Vocabulary& vocab, const PoolingPolicy& policy) {
    auto e = mean_pool(token_embeddings(params, sentence, vocab, policy).vectors);
    e.source_sentence = std::string(sentence);
    return e;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw EmbeddingError("cosine: vectors must have the same non-zero dimension");
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw EmbeddingError("cosine: undefined for a zero vector");
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double cosine(const SentenceEmbedding& a, const SentenceEmbedding& b) { return cosine(a.vector, b.vector); }

} // namespace dapt::embed
