#pragma once

#include "dapt/corpus.hpp"
#include "dapt/rng.hpp"
#include "dapt/wordpiece.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dapt::data {

using wordpiece::TokenId;

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-token selection rate plus the replacement split for selected tokens.
struct MaskingPolicy {
    double mask_fraction = 0.15;
    double replace_with_mask_prob = 0.8;
    double replace_with_random_prob = 0.1;
    double keep_original_prob = 0.1;

    void validate() const;
};

enum class NspLabel : std::uint8_t { IsNext = 0, NotNext = 1 };

enum class MaskAction : std::uint8_t { Mask, Random, Keep };

struct PackedSequence {
    wordpiece::TokenSequence sequence;
    std::vector<std::uint8_t> segment_ids;
};

struct PretrainExample {
    std::vector<TokenId> input_ids;
    std::vector<std::uint8_t> segment_ids;
    std::vector<std::uint8_t> pad_mask;
    std::vector<std::int32_t> masked_positions;
    std::vector<TokenId> masked_label_ids;
    NspLabel nsp_label = NspLabel::IsNext;

    std::size_t length() const { return input_ids.size(); }
    friend bool operator==(const PretrainExample&, const PretrainExample&) = default;
};

/// `[CLS] A [SEP]` or `[CLS] A [SEP] B [SEP]`; the longer sentence loses
/// tail tokens one at a time until the packed length fits (ties trim B).
PackedSequence pack_pair(const wordpiece::TokenSequence& sent_a, const wordpiece::TokenSequence* sent_b,
                         std::size_t max_seq_length);

struct SentenceRef {
    std::size_t doc = 0;
    std::size_t sentence = 0;
    friend bool operator==(const SentenceRef&, const SentenceRef&) = default;
};

struct SentencePairSample {
    SentenceRef a;
    SentenceRef b;
    NspLabel label = NspLabel::IsNext;
};

/// One sample per consecutive sentence pair within a document. With
/// probability `random_pair_prob` the second sentence is replaced by one
/// drawn uniformly from the sentences of all other documents.
std::vector<SentencePairSample> sample_nsp_pairs(const std::vector<corpus::Document>& docs,
                                                 double random_pair_prob, Rng& rng);
std::vector<SentencePairSample> sample_nsp_pairs(const std::vector<corpus::Document>& docs,
                                                 double random_pair_prob, std::uint64_t seed);

struct MaskingResult {
    std::vector<TokenId> input_ids;
    std::vector<std::int32_t> positions;
    std::vector<TokenId> labels;
    std::vector<MaskAction> actions;
};

/// Selects non-special positions independently with `mask_fraction` (at
/// least one) and applies the mask/random/keep replacement. Random
/// replacements are drawn from the non-special ids [5, vocab_size).
MaskingResult apply_masking(const std::vector<TokenId>& ids, const MaskingPolicy& policy,
                            std::size_t vocab_size, Rng& rng);
MaskingResult apply_masking(const std::vector<TokenId>& ids, const MaskingPolicy& policy,
                            std::size_t vocab_size, std::uint64_t seed);

/// Pads a packed, masked sequence to `max_seq_length`.
PretrainExample make_example(const std::vector<TokenId>& masked_ids, const std::vector<std::uint8_t>& segment_ids,
                             MaskingResult masking, NspLabel label, std::size_t max_seq_length);

struct DatasetConfig {
    std::size_t max_seq_length = 100;
    MaskingPolicy masking;
    double random_pair_prob = 0.5;
    std::uint64_t seed = 12345;
};

struct DatasetHeader {
    std::uint32_t format_version = 1;
    std::uint32_t max_seq_length = 0;
    std::uint32_t vocab_size = 0;
    std::uint64_t vocab_fingerprint = 0;
    std::uint64_t seed = 0;
    friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct DatasetStats {
    std::size_t documents = 0;
    std::size_t sentences = 0;
    std::size_t pairs = 0;
    std::size_t is_next = 0;
    std::size_t not_next = 0;
    std::size_t skipped = 0;
    std::size_t masked_positions = 0;
    std::size_t truncated = 0;
};

struct Dataset {
    DatasetHeader header;
    std::vector<PretrainExample> examples;
};

struct BuildResult {
    Dataset dataset;
    DatasetStats stats;
};

/// tokenize -> sample pairs -> pack -> mask -> pad, in pair order.
/// Pairs with nothing maskable (only special tokens) are skipped and counted.
BuildResult build_dataset(const std::vector<corpus::Document>& docs, const wordpiece::Vocabulary& vocab,
                          const DatasetConfig& config);

inline constexpr std::uint32_t kDatasetFormatVersion = 1;
inline constexpr const char* kDatasetFileName = "examples.bin";
inline constexpr const char* kManifestFileName = "manifest.json";
inline constexpr const char* kVocabFileName = "vocab.txt";

std::string serialize_dataset(const Dataset& dataset);
Dataset deserialize_dataset(std::string_view bytes);

/// Writes examples.bin, manifest.json and a copy of the vocabulary.
void write_dataset_dir(const std::filesystem::path& dir, const BuildResult& result,
                       const DatasetConfig& config, const wordpiece::Vocabulary& vocab);
Dataset read_dataset(const std::filesystem::path& dir_or_file);

} // namespace dapt::data
