#include "dapt/pretrain_data.hpp"

#include "dapt/binary_io.hpp"
#include "dapt/hashing.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>

namespace dapt::data {

namespace {

constexpr std::string_view kDatasetMagic = "DAPTDATA";

void check_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw DataError(std::string("masking policy: ") + name + " must lie in [0, 1]");
    }
}

} // namespace

void MaskingPolicy::validate() const {
    if (!(mask_fraction > 0.0 && mask_fraction < 1.0)) {
        throw DataError("masking policy: mask_fraction must lie in (0, 1)");
    }
    check_probability(replace_with_mask_prob, "replace_with_mask_prob");
    check_probability(replace_with_random_prob, "replace_with_random_prob");
    check_probability(keep_original_prob, "keep_original_prob");
    const double total = replace_with_mask_prob + replace_with_random_prob + keep_original_prob;
    if (std::abs(total - 1.0) > 1e-9) {
        throw DataError("masking policy: replacement probabilities must sum to 1");
    }
}

PackedSequence pack_pair(const wordpiece::TokenSequence& sent_a, const wordpiece::TokenSequence* sent_b,
                         std::size_t max_seq_length) {
    if (max_seq_length < 5) {
        throw DataError("pack_pair: max_seq_length must be at least 5");
    }
    const bool has_b = sent_b != nullptr;
    if (sent_a.empty() && (!has_b || sent_b->empty())) {
        throw DataError("pack_pair: both sentences are empty");
    }
    const std::size_t specials = has_b ? 3 : 2;
    const std::size_t budget = max_seq_length - specials;
    std::size_t len_a = sent_a.size();
    std::size_t len_b = has_b ? sent_b->size() : 0;
    while (len_a + len_b > budget) {
        if (len_a > len_b) {
            --len_a;
        } else {
            --len_b;
        }
    }

    PackedSequence packed;
    auto& seq = packed.sequence;
    auto push = [&](const std::string& tok, TokenId id, std::uint8_t segment) {
        seq.tokens.push_back(tok);
        seq.ids.push_back(id);
        packed.segment_ids.push_back(segment);
    };
    const std::string cls(wordpiece::kClsToken);
    const std::string sep(wordpiece::kSepToken);
    push(cls, wordpiece::kClsId, 0);
    for (std::size_t i = 0; i < len_a; ++i) {
        push(sent_a.tokens[i], sent_a.ids[i], 0);
    }
    push(sep, wordpiece::kSepId, 0);
    if (has_b) {
        for (std::size_t i = 0; i < len_b; ++i) {
            push(sent_b->tokens[i], sent_b->ids[i], 1);
        }
        push(sep, wordpiece::kSepId, 1);
    }
    return packed;
}

std::vector<SentencePairSample> sample_nsp_pairs(const std::vector<corpus::Document>& docs,
                                                 double random_pair_prob, Rng& rng) {
    if (!(random_pair_prob >= 0.0 && random_pair_prob <= 1.0)) {
        throw DataError("sample_nsp_pairs: random_pair_prob must lie in [0, 1]");
    }
    std::size_t total = 0;
    std::vector<std::size_t> offsets;
    offsets.reserve(docs.size());
    std::size_t non_empty_docs = 0;
    for (const auto& doc : docs) {
        offsets.push_back(total);
        total += doc.sentences.size();
        non_empty_docs += doc.sentences.empty() ? 0 : 1;
    }
    if (total < 2) {
        throw DataError("sample_nsp_pairs: corpus needs at least 2 sentences");
    }
    if (random_pair_prob > 0.0 && non_empty_docs < 2) {
        throw DataError("sample_nsp_pairs: random pairs need at least 2 documents");
    }

    // Global sentence index -> reference, skipping document d's own range.
    auto locate = [&](std::size_t global) {
        const auto it = std::upper_bound(offsets.begin(), offsets.end(), global);
        const auto d = static_cast<std::size_t>(it - offsets.begin()) - 1;
        return SentenceRef{d, global - offsets[d]};
    };

    std::vector<SentencePairSample> pairs;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const std::size_t n = docs[d].sentences.size();
        for (std::size_t s = 0; s + 1 < n; ++s) {
            SentencePairSample sample;
            sample.a = {d, s};
            if (rng.uniform() < random_pair_prob) {
                std::size_t pick = rng.index(total - n);
                if (pick >= offsets[d]) {
                    pick += n;
                }
                sample.b = locate(pick);
                sample.label = NspLabel::NotNext;
            } else {
                sample.b = {d, s + 1};
                sample.label = NspLabel::IsNext;
            }
            pairs.push_back(sample);
        }
    }
    return pairs;
}

std::vector<SentencePairSample> sample_nsp_pairs(const std::vector<corpus::Document>& docs,
                                                 double random_pair_prob, std::uint64_t seed) {
    Rng rng(seed);
    return sample_nsp_pairs(docs, random_pair_prob, rng);
}

MaskingResult apply_masking(const std::vector<TokenId>& ids, const MaskingPolicy& policy,
                            std::size_t vocab_size, Rng& rng) {
    policy.validate();
    if (vocab_size <= static_cast<std::size_t>(wordpiece::kNumSpecialTokens)) {
        throw DataError("apply_masking: vocabulary has no non-special tokens");
    }
    std::vector<std::int32_t> candidates;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!wordpiece::Vocabulary::is_special(ids[i])) {
            candidates.push_back(static_cast<std::int32_t>(i));
        }
    }
    if (candidates.empty()) {
        throw DataError("apply_masking: sequence contains only special tokens");
    }

    MaskingResult result;
    result.input_ids = ids;
    for (auto pos : candidates) {
        if (rng.uniform() < policy.mask_fraction) {
            result.positions.push_back(pos);
        }
    }
    if (result.positions.empty()) {
        result.positions.push_back(candidates[rng.index(candidates.size())]);
    }
    const auto n_regular = vocab_size - static_cast<std::size_t>(wordpiece::kNumSpecialTokens);
    for (auto pos : result.positions) {
        const auto p = static_cast<std::size_t>(pos);
        result.labels.push_back(ids[p]);
        const double u = rng.uniform();
        if (u < policy.replace_with_mask_prob) {
            result.input_ids[p] = wordpiece::kMaskId;
            result.actions.push_back(MaskAction::Mask);
        } else if (u < policy.replace_with_mask_prob + policy.replace_with_random_prob) {
            result.input_ids[p] = wordpiece::kNumSpecialTokens + static_cast<TokenId>(rng.index(n_regular));
            result.actions.push_back(MaskAction::Random);
        } else {
            result.actions.push_back(MaskAction::Keep);
        }
    }
    return result;
}

MaskingResult apply_masking(const std::vector<TokenId>& ids, const MaskingPolicy& policy,
                            std::size_t vocab_size, std::uint64_t seed) {
    Rng rng(seed);
    return apply_masking(ids, policy, vocab_size, rng);
}

PretrainExample make_example(const std::vector<TokenId>& masked_ids, const std::vector<std::uint8_t>& segment_ids,
                             MaskingResult masking, NspLabel label, std::size_t max_seq_length) {
    if (masked_ids.size() > max_seq_length || segment_ids.size() != masked_ids.size()) {
        throw DataError("make_example: packed sequence does not fit max_seq_length");
    }
    PretrainExample ex;
    ex.input_ids = masked_ids;
    ex.segment_ids = segment_ids;
    ex.pad_mask.assign(masked_ids.size(), 1);
    ex.input_ids.resize(max_seq_length, wordpiece::kPadId);
    ex.segment_ids.resize(max_seq_length, 0);
    ex.pad_mask.resize(max_seq_length, 0);
    ex.masked_positions = std::move(masking.positions);
    ex.masked_label_ids = std::move(masking.labels);
    ex.nsp_label = label;
    return ex;
}

BuildResult build_dataset(const std::vector<corpus::Document>& docs, const wordpiece::Vocabulary& vocab,
                          const DatasetConfig& config) {
    config.masking.validate();
    if (config.max_seq_length < 5) {
        throw DataError("build_dataset: max_seq_length must be at least 5");
    }
    BuildResult result;
    auto& stats = result.stats;
    stats.documents = docs.size();

    std::vector<std::vector<wordpiece::TokenSequence>> tokenized(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (const auto& sentence : docs[d].sentences) {
            tokenized[d].push_back(wordpiece::tokenize(sentence, vocab));
            ++stats.sentences;
        }
    }

    Rng pair_rng(Rng::mix(config.seed, 1));
    Rng mask_rng(Rng::mix(config.seed, 2));
    const auto pairs = sample_nsp_pairs(docs, config.random_pair_prob, pair_rng);
    stats.pairs = pairs.size();

    auto& dataset = result.dataset;
    dataset.header.format_version = kDatasetFormatVersion;
    dataset.header.max_seq_length = static_cast<std::uint32_t>(config.max_seq_length);
    dataset.header.vocab_size = static_cast<std::uint32_t>(vocab.size());
    dataset.header.vocab_fingerprint = vocab.fingerprint();
    dataset.header.seed = config.seed;

    for (const auto& pair : pairs) {
        const auto& a = tokenized[pair.a.doc][pair.a.sentence];
        const auto& b = tokenized[pair.b.doc][pair.b.sentence];
        if (a.empty() && b.empty()) {
            ++stats.skipped;
            continue;
        }
        auto packed = pack_pair(a, &b, config.max_seq_length);
        if (packed.sequence.size() < a.size() + b.size() + 3) {
            ++stats.truncated;
        }
        const bool maskable = std::any_of(packed.sequence.ids.begin(), packed.sequence.ids.end(),
                                          [](TokenId id) { return !wordpiece::Vocabulary::is_special(id); });
        if (!maskable) {
            ++stats.skipped;
            continue;
        }
        auto masking = apply_masking(packed.sequence.ids, config.masking, vocab.size(), mask_rng);
        stats.masked_positions += masking.positions.size();
        auto ids = masking.input_ids;
        dataset.examples.push_back(
            make_example(ids, packed.segment_ids, std::move(masking), pair.label, config.max_seq_length));
        if (pair.label == NspLabel::IsNext) {
            ++stats.is_next;
        } else {
            ++stats.not_next;
        }
    }
    return result;
}

std::string serialize_dataset(const Dataset& dataset) {
    ByteWriter w;
    w.raw(kDatasetMagic);
    w.u32(dataset.header.format_version);
    w.u32(dataset.header.max_seq_length);
    w.u32(dataset.header.vocab_size);
    w.u64(dataset.header.vocab_fingerprint);
    w.u64(dataset.header.seed);
    w.u64(dataset.examples.size());
    for (const auto& ex : dataset.examples) {
        if (ex.length() != dataset.header.max_seq_length) {
            throw DataError("serialize_dataset: example length differs from max_seq_length");
        }
        ByteWriter rec;
        for (auto id : ex.input_ids) {
            rec.i32(id);
        }
        for (auto s : ex.segment_ids) {
            rec.u8(s);
        }
        for (auto m : ex.pad_mask) {
            rec.u8(m);
        }
        rec.u32(static_cast<std::uint32_t>(ex.masked_positions.size()));
        for (auto p : ex.masked_positions) {
            rec.i32(p);
        }
        for (auto l : ex.masked_label_ids) {
            rec.i32(l);
        }
        rec.u8(static_cast<std::uint8_t>(ex.nsp_label));
        w.u32(static_cast<std::uint32_t>(rec.bytes().size()));
        w.raw(rec.bytes());
    }
    return w.take();
}

Dataset deserialize_dataset(std::string_view bytes) {
    ByteReader r(bytes, "dataset");
    if (r.raw(kDatasetMagic.size()) != kDatasetMagic) {
        throw DataError("dataset: bad magic bytes");
    }
    Dataset ds;
    ds.header.format_version = r.u32();
    if (ds.header.format_version != kDatasetFormatVersion) {
        throw DataError("dataset: unsupported format version " + std::to_string(ds.header.format_version));
    }
    ds.header.max_seq_length = r.u32();
    ds.header.vocab_size = r.u32();
    ds.header.vocab_fingerprint = r.u64();
    ds.header.seed = r.u64();
    const std::uint64_t count = r.u64();
    const std::size_t len = ds.header.max_seq_length;
    for (std::uint64_t e = 0; e < count; ++e) {
        const std::uint32_t rec_len = r.u32();
        ByteReader rec(r.raw(rec_len), "dataset record " + std::to_string(e));
        PretrainExample ex;
        ex.input_ids.resize(len);
        ex.segment_ids.resize(len);
        ex.pad_mask.resize(len);
        for (auto& id : ex.input_ids) {
            id = rec.i32();
            if (id < 0 || static_cast<std::uint32_t>(id) >= ds.header.vocab_size) {
                throw DataError("dataset record " + std::to_string(e) + ": token id out of range");
            }
        }
        for (auto& s : ex.segment_ids) {
            s = rec.u8();
        }
        for (auto& m : ex.pad_mask) {
            m = rec.u8();
        }
        const std::uint32_t n_masked = rec.u32();
        ex.masked_positions.resize(n_masked);
        ex.masked_label_ids.resize(n_masked);
        for (auto& p : ex.masked_positions) {
            p = rec.i32();
            if (p < 0 || static_cast<std::size_t>(p) >= len) {
                throw DataError("dataset record " + std::to_string(e) + ": masked position out of range");
            }
        }
        for (auto& l : ex.masked_label_ids) {
            l = rec.i32();
        }
        const auto label = rec.u8();
        if (label > 1) {
            throw DataError("dataset record " + std::to_string(e) + ": bad NSP label");
        }
        ex.nsp_label = static_cast<NspLabel>(label);
        if (!rec.done()) {
            throw DataError("dataset record " + std::to_string(e) + ": trailing bytes");
        }
        ds.examples.push_back(std::move(ex));
    }
    if (!r.done()) {
        throw DataError("dataset: trailing bytes after last record");
    }
    return ds;
}

void write_dataset_dir(const std::filesystem::path& dir, const BuildResult& result,
                       const DatasetConfig& config, const wordpiece::Vocabulary& vocab) {
    std::filesystem::create_directories(dir);
    const std::string bytes = serialize_dataset(result.dataset);
    write_file_bytes(dir / kDatasetFileName, bytes);
    wordpiece::save_vocab(vocab, dir / kVocabFileName);

    const auto& s = result.stats;
    nlohmann::ordered_json manifest;
    manifest["format_version"] = kDatasetFormatVersion;
    manifest["max_seq_length"] = config.max_seq_length;
    manifest["vocab_size"] = vocab.size();
    manifest["vocab_fingerprint"] = result.dataset.header.vocab_fingerprint;
    manifest["seed"] = config.seed;
    manifest["mask_fraction"] = config.masking.mask_fraction;
    manifest["replace_with_mask_prob"] = config.masking.replace_with_mask_prob;
    manifest["replace_with_random_prob"] = config.masking.replace_with_random_prob;
    manifest["keep_original_prob"] = config.masking.keep_original_prob;
    manifest["random_pair_prob"] = config.random_pair_prob;
    manifest["documents"] = s.documents;
    manifest["sentences"] = s.sentences;
    manifest["pairs"] = s.pairs;
    manifest["examples"] = result.dataset.examples.size();
    manifest["is_next"] = s.is_next;
    manifest["not_next"] = s.not_next;
    manifest["skipped"] = s.skipped;
    manifest["truncated"] = s.truncated;
    manifest["masked_positions"] = s.masked_positions;
    manifest["examples_sha256"] = sha256_hex(bytes);
    write_file_bytes(dir / kManifestFileName, manifest.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir_or_file) {
    auto path = dir_or_file;
    if (std::filesystem::is_directory(path)) {
        path /= kDatasetFileName;
    }
    if (!std::filesystem::exists(path)) {
        throw DataError("dataset not found: " + path.string());
    }
    return deserialize_dataset(read_file_bytes(path));
}

} // namespace dapt::data
