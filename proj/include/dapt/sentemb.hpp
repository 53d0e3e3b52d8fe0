#pragma once

#include "dapt/encoder.hpp"
#include "dapt/wordpiece.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dapt::embed {

class EmbeddingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PoolingPolicy {
    /// Hidden layer supplying token vectors (0 = embeddings); nullopt = final layer.
    std::optional<std::size_t> layer_index;
    /// Pool [CLS] and [SEP] as well. Padding is never pooled.
    bool include_special_tokens = false;
};

struct TokenVectors {
    std::vector<std::string> tokens;
    std::vector<std::vector<double>> vectors;
    /// True when the sentence exceeded max_seq_length - 2 tokens and lost its tail.
    bool truncated = false;
};

/// clean -> tokenize -> pack as a single sentence -> eval-mode forward.
/// With pad_to_max_length the input is padded to config.max_seq_length
/// (the result is the same up to rounding).
TokenVectors token_embeddings(const model::Parameters& params, std::string_view sentence,
                              const wordpiece::Vocabulary& vocab, const PoolingPolicy& policy = {},
                              bool pad_to_max_length = false);

struct SentenceEmbedding {
    std::vector<double> vector;
    std::size_t token_count = 0;
    std::string source_sentence;
};

/// Component-wise arithmetic mean.
SentenceEmbedding mean_pool(const std::vector<std::vector<double>>& vectors);

SentenceEmbedding embed_sentence(const model::Parameters& params, std::string_view sentence,
                                 const wordpiece::Vocabulary& vocab, const PoolingPolicy& policy = {});

/// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Zero vectors are an error.
double cosine(std::span<const double> a, std::span<const double> b);
double cosine(const SentenceEmbedding& a, const SentenceEmbedding& b);

} // namespace dapt::embed
