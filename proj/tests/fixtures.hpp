#pragma once

#include "dapt/pretrain_data.hpp"
#include "dapt/rng.hpp"
#include "dapt/wordpiece.hpp"

#include <string>
#include <vector>

namespace fixtures {

inline dapt::wordpiece::Vocabulary sentence_vocab() {
    return dapt::wordpiece::Vocabulary::from_tokens({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "here", "is",
                                                     "the", "sentence", "i", "want", "em", "##bed", "##ding", "##s",
                                                     "for", "."});
}

/// `[CLS] a.. [SEP] b.. [SEP]` padded to max_len with `content` non-special
/// tokens split between the two segments and a few masked positions.
inline dapt::data::PretrainExample random_example(std::size_t vocab_size, std::size_t max_len, std::size_t content,
                                                  dapt::Rng& rng) {
    using namespace dapt::wordpiece;
    dapt::data::PretrainExample ex;
    const std::size_t len_a = std::max<std::size_t>(1, content / 2);
    const std::size_t len_b = content - len_a;
    auto token = [&] { return static_cast<TokenId>(kNumSpecialTokens + rng.index(vocab_size - kNumSpecialTokens)); };
    ex.input_ids.push_back(kClsId);
    ex.segment_ids.push_back(0);
    for (std::size_t i = 0; i < len_a; ++i) {
        ex.input_ids.push_back(token());
        ex.segment_ids.push_back(0);
    }
    ex.input_ids.push_back(kSepId);
    ex.segment_ids.push_back(0);
    if (len_b > 0) {
        for (std::size_t i = 0; i < len_b; ++i) {
            ex.input_ids.push_back(token());
            ex.segment_ids.push_back(1);
        }
        ex.input_ids.push_back(kSepId);
        ex.segment_ids.push_back(1);
    }
    const std::size_t used = ex.input_ids.size();
    ex.pad_mask.assign(used, 1);
    for (std::size_t pos = 1; pos < used; ++pos) {
        const auto id = ex.input_ids[pos];
        if (id >= kNumSpecialTokens && (ex.masked_positions.empty() || rng.uniform() < 0.3)) {
            ex.masked_positions.push_back(static_cast<std::int32_t>(pos));
            ex.masked_label_ids.push_back(id);
            ex.input_ids[pos] = kMaskId;
        }
    }
    ex.input_ids.resize(max_len, kPadId);
    ex.segment_ids.resize(max_len, 0);
    ex.pad_mask.resize(max_len, 0);
    ex.nsp_label = rng.uniform() < 0.5 ? dapt::data::NspLabel::IsNext : dapt::data::NspLabel::NotNext;
    return ex;
}

} // namespace fixtures

namespace fixtures {

inline dapt::data::Dataset random_dataset(std::size_t vocab_size, std::size_t max_len, std::size_t count,
                                          std::uint64_t seed) {
    dapt::Rng rng(seed);
    dapt::data::Dataset ds;
    ds.header.max_seq_length = static_cast<std::uint32_t>(max_len);
    ds.header.vocab_size = static_cast<std::uint32_t>(vocab_size);
    ds.header.seed = seed;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t content = 2 + rng.index(max_len - 4);
        ds.examples.push_back(random_example(vocab_size, max_len, content, rng));
    }
    return ds;
}

} // namespace fixtures

#include "dapt/evaluation.hpp"

namespace fixtures {

/// Published cosine pairs and printed improvement rates for five sample pairs.
inline std::vector<dapt::eval::PublishedRow> published_rows() {
    return {{"S1", 0.59, 0.71, 20.33},
            {"S2", 0.71, 0.84, 15.4},
            {"S3", 0.65, 0.80, 18.75},
            {"S4", 0.58, 0.70, 20.7},
            {"S5", 0.75, 0.84, 10.12}};
}

inline std::vector<dapt::eval::ComparisonRow> published_comparison() {
    std::vector<dapt::eval::ComparisonRow> rows;
    for (const auto& r : published_rows()) {
        rows.push_back({r.id, r.cos_base, r.cos_tuned, ""});
    }
    return rows;
}

} // namespace fixtures
