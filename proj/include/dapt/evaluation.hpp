#pragma once

#include "dapt/sentemb.hpp"
#include "dapt/training.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dapt::eval {

class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SentencePair {
    std::string pair_id;
    std::string source;
    std::string target;
};

/// Tab-separated `pair_id  source  target`, one pair per line. A first line
/// whose id column reads "pair_id" is treated as a header.
std::vector<SentencePair> parse_pairs(std::string_view content, const std::string& origin = "<pairs>");
std::vector<SentencePair> read_pairs(const std::filesystem::path& path);

/// 100 * (tuned - base) / base.
double improvement_rate(double cos_base, double cos_tuned);

struct ComparisonRow {
    std::string pair_id;
    double cos_base = 0.0;
    double cos_tuned = 0.0;
    std::string error; // non-empty when the pair could not be scored

    bool ok() const { return error.empty(); }
    double difference() const { return cos_tuned - cos_base; }
    /// Throws when cos_base is zero.
    double improvement_pct() const { return improvement_rate(cos_base, cos_tuned); }
};

/// Embeds both sides of every pair under each model and records the cosines.
/// A pair that fails (e.g. empty after cleaning) gets an error entry instead
/// of aborting the run.
std::vector<ComparisonRow> compare_models(const std::vector<SentencePair>& pairs, const model::Parameters& base,
                                          const model::Parameters& tuned, const wordpiece::Vocabulary& vocab,
                                          const embed::PoolingPolicy& policy = {});

struct Summary {
    std::size_t n_pairs = 0;  // rows that scored
    std::size_t n_errors = 0;
    double mean_difference = 0.0;
    double std_difference = 0.0; // population standard deviation
    double mean_improvement_pct = 0.0;
    std::size_t n_improvement = 0; // rows with a non-zero base cosine
};

Summary summarize(const std::vector<ComparisonRow>& rows);

/// Caches sentence embeddings per model.
class EmbeddingCache {
public:
    EmbeddingCache(const model::Parameters& params, const wordpiece::Vocabulary& vocab, embed::PoolingPolicy policy);
    const embed::SentenceEmbedding& get(const std::string& sentence);

private:
    const model::Parameters& params_;
    const wordpiece::Vocabulary& vocab_;
    embed::PoolingPolicy policy_;
    std::map<std::string, embed::SentenceEmbedding> cache_;
};

struct AnchorRow {
    std::string other_id;
    double cos_base = 0.0;
    double cos_tuned = 0.0;
    double difference() const { return cos_tuned - cos_base; }
};

/// The sentence set is the source sentence of each pair, keyed by pair_id.
/// Returns the anchor's cosine to every other sentence under both models.
std::vector<AnchorRow> anchor_differences(const std::string& anchor_id, const std::vector<SentencePair>& pairs,
                                          const model::Parameters& base, const model::Parameters& tuned,
                                          const wordpiece::Vocabulary& vocab, const embed::PoolingPolicy& policy = {});

struct SentenceProfile {
    std::string id;
    double mean_difference = 0.0;
    double std_difference = 0.0;
};

/// Per-sentence mean and spread of the anchor differences across the set.
std::vector<SentenceProfile> difference_profile(const std::vector<SentencePair>& pairs,
                                                const model::Parameters& base, const model::Parameters& tuned,
                                                const wordpiece::Vocabulary& vocab,
                                                const embed::PoolingPolicy& policy = {});

struct SweepReport {
    std::vector<std::size_t> budgets;        // sorted, unique
    std::vector<std::string> pair_ids;
    std::vector<std::vector<double>> cosines; // [pair][0 = base, 1.. = budgets]
    std::vector<double> column_means;
    std::vector<train::Checkpoint> models;    // one per budget
};

/// Fine-tunes one trajectory up to the largest budget with the schedule
/// spanning that budget, snapshotting at each budget's epoch boundary, then
/// scores every pair under the base and each snapshot.
SweepReport epochs_sweep(const std::vector<std::size_t>& budgets, const train::Checkpoint& base,
                         const data::Dataset& domain_data, const std::vector<SentencePair>& pairs,
                         const wordpiece::Vocabulary& vocab, const train::TrainConfig& config,
                         const embed::PoolingPolicy& policy = {});

struct PublishedRow {
    std::string id;
    double cos_base = 0.0;
    double cos_tuned = 0.0;
    double printed_improvement_pct = 0.0;
};

struct PublishedCheck {
    std::string id;
    double computed_improvement_pct = 0.0;
    double printed_improvement_pct = 0.0;
    bool discrepancy = false;
};

/// Recomputes each printed improvement from its cosines; rows off by more
/// than `tolerance` percentage points are flagged.
std::vector<PublishedCheck> check_published(const std::vector<PublishedRow>& rows, double tolerance = 0.05);

} // namespace dapt::eval
