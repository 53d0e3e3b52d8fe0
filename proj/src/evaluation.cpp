#include "dapt/evaluation.hpp"

#include "dapt/hashing.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace dapt::eval {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) {
            return out;
        }
        start = tab + 1;
    }
}

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
    mean = 0.0;
    for (double x : xs) {
        mean += x;
    }
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) {
        var += (x - mean) * (x - mean);
    }
    sd = std::sqrt(var / static_cast<double>(xs.size()));
}

} // namespace

std::vector<SentencePair> parse_pairs(std::string_view content, const std::string& origin) {
    std::vector<SentencePair> pairs;
    std::set<std::string> seen;
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        auto fields = split_tabs(line);
        if (fields.size() != 3) {
            throw EvaluationError(origin + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                                  std::to_string(fields.size()));
        }
        if (pairs.empty() && seen.empty() && fields[0] == "pair_id") {
            seen.insert("");
            continue;
        }
        if (fields[0].empty()) {
            throw EvaluationError(origin + ":" + std::to_string(line_no) + ": empty pair id");
        }
        if (!seen.insert(fields[0]).second) {
            throw EvaluationError(origin + ":" + std::to_string(line_no) + ": duplicate pair id '" + fields[0] + "'");
        }
        pairs.push_back({fields[0], fields[1], fields[2]});
    }
    if (pairs.empty()) {
        throw EvaluationError(origin + ": no sentence pairs");
    }
    return pairs;
}

std::vector<SentencePair> read_pairs(const std::filesystem::path& path) {
    return parse_pairs(read_file_bytes(path), path.string());
}

double improvement_rate(double cos_base, double cos_tuned) {
    if (cos_base == 0.0) {
        throw EvaluationError("improvement rate is undefined for a base cosine of zero");
    }
    return 100.0 * (cos_tuned - cos_base) / cos_base;
}

EmbeddingCache::EmbeddingCache(const model::Parameters& params, const wordpiece::Vocabulary& vocab,
                               embed::PoolingPolicy policy)
    : params_(params), vocab_(vocab), policy_(policy) {}

const embed::SentenceEmbedding& EmbeddingCache::get(const std::string& sentence) {
    auto it = cache_.find(sentence);
    if (it == cache_.end()) {
        it = cache_.emplace(sentence, embed::embed_sentence(params_, sentence, vocab_, policy_)).first;
    }
    return it->second;
}

static void check_compatible(const model::Parameters& base, const model::Parameters& tuned,
                             const wordpiece::Vocabulary& vocab) {
    if (base.config.hidden_size != tuned.config.hidden_size) {
        throw EvaluationError("models have different hidden sizes (" + std::to_string(base.config.hidden_size) +
                              " vs " + std::to_string(tuned.config.hidden_size) + ")");
    }
    for (const auto* p : {&base, &tuned}) {
        if (p->config.vocab_size != vocab.size()) {
            throw EvaluationError("model vocab_size " + std::to_string(p->config.vocab_size) +
                                  " does not match the vocabulary (" + std::to_string(vocab.size()) + " tokens)");
        }
    }
}

std::vector<ComparisonRow> compare_models(const std::vector<SentencePair>& pairs, const model::Parameters& base,
                                          const model::Parameters& tuned, const wordpiece::Vocabulary& vocab,
                                          const embed::PoolingPolicy& policy) {
    check_compatible(base, tuned, vocab);
    EmbeddingCache base_cache(base, vocab, policy);
    EmbeddingCache tuned_cache(tuned, vocab, policy);
    std::vector<ComparisonRow> rows;
    rows.reserve(pairs.size());
    for (const auto& pair : pairs) {
        ComparisonRow row;
        row.pair_id = pair.pair_id;
        try {
            row.cos_base = embed::cosine(base_cache.get(pair.source), base_cache.get(pair.target));
            row.cos_tuned = embed::cosine(tuned_cache.get(pair.source), tuned_cache.get(pair.target));
        } catch (const std::exception& e) {
            row.cos_base = row.cos_tuned = 0.0;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Summary summarize(const std::vector<ComparisonRow>& rows) {
    Summary s;
    std::vector<double> diffs;
    double improvement_sum = 0.0;
    for (const auto& row : rows) {
        if (!row.ok()) {
            ++s.n_errors;
            continue;
        }
        diffs.push_back(row.difference());
        if (row.cos_base != 0.0) {
            improvement_sum += row.improvement_pct();
            ++s.n_improvement;
        }
    }
    if (diffs.empty()) {
        throw EvaluationError("no scored pairs to summarize");
    }
    s.n_pairs = diffs.size();
    mean_std(diffs, s.mean_difference, s.std_difference);
    s.mean_improvement_pct = s.n_improvement ? improvement_sum / static_cast<double>(s.n_improvement) : 0.0;
    return s;
}

std::vector<AnchorRow> anchor_differences(const std::string& anchor_id, const std::vector<SentencePair>& pairs,
                                          const model::Parameters& base, const model::Parameters& tuned,
                                          const wordpiece::Vocabulary& vocab, const embed::PoolingPolicy& policy) {
    check_compatible(base, tuned, vocab);
    const auto anchor = std::find_if(pairs.begin(), pairs.end(),
                                     [&](const SentencePair& p) { return p.pair_id == anchor_id; });
    if (anchor == pairs.end()) {
        throw EvaluationError("unknown sentence id '" + anchor_id + "'");
    }
    EmbeddingCache base_cache(base, vocab, policy);
    EmbeddingCache tuned_cache(tuned, vocab, policy);
    const auto& a_base = base_cache.get(anchor->source);
    const auto& a_tuned = tuned_cache.get(anchor->source);
    std::vector<AnchorRow> rows;
    for (const auto& other : pairs) {
        if (other.pair_id == anchor_id) {
            continue;
        }
        rows.push_back({other.pair_id, embed::cosine(a_base, base_cache.get(other.source)),
                        embed::cosine(a_tuned, tuned_cache.get(other.source))});
    }
    return rows;
}

std::vector<SentenceProfile> difference_profile(const std::vector<SentencePair>& pairs,
                                                const model::Parameters& base, const model::Parameters& tuned,
                                                const wordpiece::Vocabulary& vocab,
                                                const embed::PoolingPolicy& policy) {
    check_compatible(base, tuned, vocab);
    if (pairs.size() < 2) {
        throw EvaluationError("a difference profile needs at least two sentences");
    }
    EmbeddingCache base_cache(base, vocab, policy);
    EmbeddingCache tuned_cache(tuned, vocab, policy);
    const std::size_t n = pairs.size();
    std::vector<std::vector<double>> diff(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double cb = embed::cosine(base_cache.get(pairs[i].source), base_cache.get(pairs[j].source));
            const double ct = embed::cosine(tuned_cache.get(pairs[i].source), tuned_cache.get(pairs[j].source));
            diff[i][j] = diff[j][i] = ct - cb;
        }
    }
    std::vector<SentenceProfile> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> xs;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                xs.push_back(diff[i][j]);
            }
        }
        SentenceProfile p;
        p.id = pairs[i].pair_id;
        mean_std(xs, p.mean_difference, p.std_difference);
        out.push_back(p);
    }
    return out;
}

SweepReport epochs_sweep(const std::vector<std::size_t>& budgets, const train::Checkpoint& base,
                         const data::Dataset& domain_data, const std::vector<SentencePair>& pairs,
                         const wordpiece::Vocabulary& vocab, const train::TrainConfig& config,
                         const embed::PoolingPolicy& policy) {
    SweepReport report;
    report.budgets = budgets;
    std::sort(report.budgets.begin(), report.budgets.end());
    report.budgets.erase(std::unique(report.budgets.begin(), report.budgets.end()), report.budgets.end());
    if (report.budgets.empty() || report.budgets.front() == 0) {
        throw EvaluationError("sweep budgets must be positive epoch counts");
    }

    train::TrainConfig cfg = config;
    cfg.epochs = report.budgets.back();
    cfg.schedule_epochs = report.budgets.back();

    std::map<std::size_t, train::Checkpoint> snapshots;
    train::TrainHooks hooks;
    hooks.on_epoch_end = [&](std::size_t epoch, const train::Checkpoint& ckpt) {
        if (std::binary_search(report.budgets.begin(), report.budgets.end(), epoch)) {
            train::Checkpoint copy{ckpt.params.clone(), ckpt.moments, ckpt.meta};
            snapshots.emplace(epoch, std::move(copy));
        }
    };
    train::finetune(base, domain_data, cfg, hooks);
    for (std::size_t b : report.budgets) {
        auto it = snapshots.find(b);
        if (it == snapshots.end()) {
            throw EvaluationError("sweep did not reach epoch " + std::to_string(b));
        }
        report.models.push_back(std::move(it->second));
    }

    for (const auto& p : pairs) {
        report.pair_ids.push_back(p.pair_id);
    }
    report.cosines.assign(pairs.size(), std::vector<double>(report.budgets.size() + 1, 0.0));
    report.column_means.assign(report.budgets.size() + 1, 0.0);
    for (std::size_t col = 0; col <= report.budgets.size(); ++col) {
        const auto& params = col == 0 ? base.params : report.models[col - 1].params;
        EmbeddingCache cache(params, vocab, policy);
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const double c = embed::cosine(cache.get(pairs[i].source), cache.get(pairs[i].target));
            report.cosines[i][col] = c;
            report.column_means[col] += c / static_cast<double>(pairs.size());
        }
    }
    return report;
}

std::vector<PublishedCheck> check_published(const std::vector<PublishedRow>& rows, double tolerance) {
    std::vector<PublishedCheck> out;
    for (const auto& r : rows) {
        PublishedCheck c;
        c.id = r.id;
        c.computed_improvement_pct = improvement_rate(r.cos_base, r.cos_tuned);
        c.printed_improvement_pct = r.printed_improvement_pct;
        c.discrepancy = std::fabs(c.computed_improvement_pct - c.printed_improvement_pct) > tolerance;
        out.push_back(c);
    }
    return out;
}

} // namespace dapt::eval
