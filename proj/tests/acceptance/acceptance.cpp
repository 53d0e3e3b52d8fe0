// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
// Pass criterion numbers as arguments to run a subset.

#include "fixtures.hpp"

#include "cli_app.hpp"

#include "dapt/checkpoint.hpp"
#include "dapt/corpus.hpp"
#include "dapt/evaluation.hpp"
#include "dapt/hashing.hpp"
#include "dapt/pretrain_data.hpp"
#include "dapt/report.hpp"
#include "dapt/sentemb.hpp"
#include "dapt/training.hpp"
#include "dapt/wordpiece.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
namespace data = dapt::data;
namespace eval = dapt::eval;
namespace model = dapt::model;
namespace train = dapt::train;
namespace wp = dapt::wordpiece;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("dapt_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
    std::ostringstream o, e;
    const int code = dapt::cli::run(args, o, e);
    if (out) {
        *out = o.str();
    }
    if (code != 0) {
        std::cerr << "  cli error: " << e.str();
    }
    return code;
}

// -- synthetic corpora --------------------------------------------------------

const char* const kSyllables[] = {"ka", "ro", "mi", "te", "su", "lo", "va", "ne", "pi", "du", "ga", "zo",
                                  "bi", "fe", "hu", "ja", "ki", "lu", "mo", "na", "po", "ri", "se", "tu"};

std::string pseudo_word(dapt::Rng& rng, std::set<std::string>& used, std::size_t syllables) {
    while (true) {
        std::string w;
        for (std::size_t i = 0; i < syllables; ++i) {
            w += kSyllables[rng.index(std::size(kSyllables))];
        }
        if (used.insert(w).second) {
            return w;
        }
    }
}

/// Small memorization corpus: 4 documents of 8 sentences.
std::vector<dapt::corpus::Document> overfit_corpus() {
    dapt::Rng rng(2024);
    std::set<std::string> used;
    std::vector<std::string> words;
    for (int i = 0; i < 60; ++i) {
        words.push_back(pseudo_word(rng, used, 2));
    }
    std::vector<dapt::corpus::Document> docs;
    for (int d = 0; d < 4; ++d) {
        dapt::corpus::Document doc{"doc-" + std::to_string(d + 1), {}};
        for (int s = 0; s < 8; ++s) {
            std::string sentence;
            const std::size_t n = 5 + rng.index(4);
            for (std::size_t k = 0; k < n; ++k) {
                sentence += words[rng.index(words.size())] + " ";
            }
            doc.sentences.push_back(sentence + ".");
        }
        docs.push_back(doc);
    }
    return docs;
}

struct DomainSetup {
    std::vector<dapt::corpus::Document> generic;
    std::vector<dapt::corpus::Document> domain;
    std::vector<eval::SentencePair> pairs;
    std::vector<std::pair<std::string, std::string>> terms;
};

/// Term pairs (x_i, y_i) with private context words cx_i and cy_i. The generic
/// corpus keeps each term with its own contexts and never puts x_i and y_i in one
/// sentence; every domain sentence holds both terms plus words from either context.
DomainSetup domain_setup(std::size_t n_terms, std::size_t sentences_per_doc) {
    dapt::Rng rng(77);
    std::set<std::string> used;
    const std::vector<std::string> fillers = {"the", "a", "is", "with", "and", "for", "of", "on", "this", "we"};
    for (const auto& f : fillers) {
        used.insert(f);
    }
    struct Topic {
        std::string x, y;
        std::vector<std::string> cx, cy;
    };
    std::vector<Topic> topics(n_terms);
    for (auto& t : topics) {
        t.x = pseudo_word(rng, used, 2);
        t.y = pseudo_word(rng, used, 2);
        for (int k = 0; k < 4; ++k) {
            t.cx.push_back(pseudo_word(rng, used, 2));
            t.cy.push_back(pseudo_word(rng, used, 2));
        }
    }
    auto pick = [&](const std::vector<std::string>& v) { return v[rng.index(v.size())]; };
    auto sentence = [&](std::vector<std::string> content) {
        std::string s;
        for (auto& w : content) {
            if (rng.uniform() < 0.5) {
                s += pick(fillers) + " ";
            }
            s += w + " ";
        }
        return s + ".";
    };
    DomainSetup setup;
    for (std::size_t i = 0; i < n_terms; ++i) {
        const auto& t = topics[i];
        dapt::corpus::Document dx{"gx-" + std::to_string(i), {}}, dy{"gy-" + std::to_string(i), {}};
        for (std::size_t s = 0; s < sentences_per_doc; ++s) {
            dx.sentences.push_back(sentence({pick(t.cx), t.x, pick(t.cx)}));
            dy.sentences.push_back(sentence({pick(t.cy), t.y, pick(t.cy)}));
        }
        setup.generic.push_back(dx);
        setup.generic.push_back(dy);
        dapt::corpus::Document dd{"dom-" + std::to_string(i), {}};
        for (std::size_t s = 0; s < 2 * sentences_per_doc; ++s) {
            auto context = [&] { return rng.uniform() < 0.5 ? pick(t.cx) : pick(t.cy); };
            std::vector<std::string> terms = {t.x, t.y};
            if (rng.uniform() < 0.5) {
                std::swap(terms[0], terms[1]);
            }
            const std::string before = context();
            dd.sentences.push_back(sentence({before, terms[0], terms[1], context()}));
        }
        setup.domain.push_back(dd);
        setup.terms.emplace_back(t.x, t.y);
        setup.pairs.push_back({"T" + std::to_string(i + 1), t.cx[0] + " " + t.x + " " + t.cx[1] + " .",
                               t.cy[0] + " " + t.y + " " + t.cy[1] + " ."});
    }
    return setup;
}

model::ModelConfig no_dropout(model::ModelConfig c) {
    c.dropout = 0.0;
    return c;
}

// -- criteria -------------------------------------------------------------------

void metric_reproduction(Outcome& o) {
    const auto checks = eval::check_published(fixtures::published_rows());
    const double s1 = checks[0].computed_improvement_pct;
    const double s4 = checks[3].computed_improvement_pct;
    o.detail << "S1 " << fmt(s1, 2) << " (printed 20.33), S4 " << fmt(s4, 2) << " (printed 20.7); flagged:";
    for (const auto& c : checks) {
        if (c.discrepancy) {
            o.detail << " " << c.id << "(" << fmt(c.computed_improvement_pct, 2) << " vs "
                     << dapt::report::format_number(c.printed_improvement_pct) << ")";
        }
    }
    o.require(fmt(s1, 2) == "20.34" && std::abs(s1 - 20.33) <= 0.05, "S1");
    o.require(fmt(s4, 2) == "20.69" && std::abs(s4 - 20.7) <= 0.05, "S4");
    o.require(!checks[0].discrepancy && !checks[3].discrepancy, "S1/S4 unflagged");
    o.require(checks[1].discrepancy && checks[2].discrepancy && checks[4].discrepancy, "S2/S3/S5 flagged");
    const auto csv = dapt::report::published_csv(checks);
    o.require(csv.find("S2,") != std::string::npos && csv.find(",discrepancy") != std::string::npos, "csv flag");
}

void tokenizer_conformance(Outcome& o) {
    const auto vocab = fixtures::sentence_vocab();
    const std::string input = "Here is the sentence I want embeddings for.";
    const auto tokens = wp::tokenize(dapt::corpus::clean_text(input), vocab);
    const std::vector<std::string> expected = {"here", "is", "the", "sentence", "i", "want",
                                               "em", "##bed", "##ding", "##s", "for", "."};
    o.require(tokens.tokens == expected, "12-token list");
    const auto packed = data::pack_pair(tokens, nullptr, 100);
    std::vector<std::string> expected_packed = {"[CLS]"};
    expected_packed.insert(expected_packed.end(), expected.begin(), expected.end());
    expected_packed.push_back("[SEP]");
    o.require(packed.sequence.tokens == expected_packed, "14-token packed form");

    const auto dir = scratch("tokenizer");
    wp::save_vocab(vocab, dir / "vocab.txt");
    std::string out;
    o.require(cli({"tokenize", "--vocab", (dir / "vocab.txt").string(), "--text", input, "--packed"}, &out) == 0,
              "cli exit");
    o.require(out == "['[CLS]', 'here', 'is', 'the', 'sentence', 'i', 'want', 'em', '##bed', '##ding', '##s', "
                     "'for', '.', '[SEP]']\n",
              "cli output");
    o.detail << "tokens " << tokens.size() << ", packed " << packed.sequence.size() << ", cli " << out.substr(0, 40)
             << "...";
    fs::remove_all(dir);
}

void masking_statistics(Outcome& o) {
    const std::size_t vocab_size = 1000;
    const data::MaskingPolicy policy; // 0.15 with an 80/10/10 split
    dapt::Rng rng(31337);
    std::size_t candidates = 0, selected = 0;
    std::size_t counts[3] = {0, 0, 0};
    for (int seq = 0; seq < 1000; ++seq) {
        std::vector<wp::TokenId> ids = {wp::kClsId};
        for (int i = 0; i < 98; ++i) {
            ids.push_back(static_cast<wp::TokenId>(wp::kNumSpecialTokens + rng.index(vocab_size - wp::kNumSpecialTokens)));
        }
        ids.push_back(wp::kSepId);
        candidates += 98;
        const auto m = data::apply_masking(ids, policy, vocab_size, rng);
        selected += m.positions.size();
        for (auto a : m.actions) {
            ++counts[static_cast<int>(a)];
        }
    }
    const double frac = double(selected) / double(candidates);
    const double mask = double(counts[0]) / double(selected);
    const double random = double(counts[1]) / double(selected);
    const double keep = double(counts[2]) / double(selected);
    o.detail << candidates << " candidates, selected " << fmt(frac) << ", mask/random/keep " << fmt(mask) << "/"
             << fmt(random) << "/" << fmt(keep);
    o.require(candidates >= 10000, "candidate count");
    o.require(frac >= 0.14 && frac <= 0.16, "selection fraction");
    o.require(std::abs(mask - 0.8) <= 0.02, "mask share");
    o.require(std::abs(random - 0.1) <= 0.02, "random share");
    o.require(std::abs(keep - 0.1) <= 0.02, "keep share");
}

void nsp_balance(Outcome& o) {
    std::vector<dapt::corpus::Document> docs;
    for (int d = 0; d < 250; ++d) {
        dapt::corpus::Document doc{"doc-" + std::to_string(d), {}};
        for (int s = 0; s < 41; ++s) {
            doc.sentences.push_back("sentence " + std::to_string(s));
        }
        docs.push_back(doc);
    }
    auto not_next_fraction = [&](double prob, bool& cross_doc) {
        const auto pairs = data::sample_nsp_pairs(docs, prob, 4242ULL);
        std::size_t nn = 0;
        cross_doc = true;
        for (const auto& p : pairs) {
            if (p.label == data::NspLabel::NotNext) {
                ++nn;
                cross_doc = cross_doc && p.b.doc != p.a.doc;
            }
        }
        return std::pair{double(nn) / double(pairs.size()), pairs.size()};
    };
    bool cross = false;
    const auto [half, n] = not_next_fraction(0.5, cross);
    const auto [zero, n0] = not_next_fraction(0.0, cross);
    const auto [one, n1] = not_next_fraction(1.0, cross);
    o.detail << n << " pairs, NotNext fraction " << fmt(half) << " at 0.5, " << fmt(zero) << " at 0, " << fmt(one)
             << " at 1";
    o.require(n >= 10000 && n0 == n && n1 == n, "pair count");
    o.require(half >= 0.48 && half <= 0.52, "balance at 0.5");
    o.require(zero == 0.0, "all IsNext at 0");
    o.require(one == 1.0 && cross, "all NotNext from other documents at 1");
}

void gradient_correctness(Outcome& o) {
    model::ModelConfig c;
    c.vocab_size = 50;
    c.hidden_size = 8;
    c.num_layers = 1;
    c.num_heads = 1;
    c.intermediate_size = 32;
    c.max_seq_length = 12;
    c.dropout = 0.0;
    auto params = model::init_params(c, 5);
    // larger weights than the default init so every path carries a sizable gradient
    dapt::Rng rng(6);
    for (auto& nt : params.named()) {
        const bool gain = nt.name.ends_with(".gain");
        for (double& v : nt.tensor.mutable_data()) {
            v = gain ? 1.0 + 0.2 * rng.normal() : 0.3 * rng.normal();
        }
    }
    dapt::Rng ex_rng(7);
    const auto e1 = fixtures::random_example(c.vocab_size, c.max_seq_length, 7, ex_rng);
    const auto e2 = fixtures::random_example(c.vocab_size, c.max_seq_length, 10, ex_rng);
    const data::PretrainExample* batch[] = {&e1, &e2};
    dapt::Rng drop(1);
    auto loss = [&] { return train::compute_loss(params, batch, model::Mode::Train, &drop).total; };
    // Entries with zero true gradient (unused vocabulary rows) leave only rounding noise of
    // roughly 1e-16 / step in the numeric estimate; the floor stops that noise from dominating.
    const double floor = 1e-7;
    const double worst = dapt::nn::grad_check(loss, params.tensors(), 1e-4, floor);
    o.detail << params.entry_count() << " entries, max relative error " << worst
             << " (|a-n| / max(|a|+|n|, " << floor << "))";
    o.require(worst <= 1e-4, "relative error");
}

void untrained_calibration(Outcome& o) {
    const std::size_t vocab = 2000;
    const auto cfg = model::desk_config(vocab);
    const double ln_v = std::log(double(vocab));
    const double ln_2 = std::log(2.0);
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto params = model::init_params(cfg, seed);
        const auto ds = fixtures::random_dataset(vocab, cfg.max_seq_length, 32, seed + 100);
        std::vector<const data::PretrainExample*> batch;
        for (const auto& e : ds.examples) {
            batch.push_back(&e);
        }
        dapt::nn::NoGradGuard guard;
        const auto loss = train::compute_loss(params, batch, model::Mode::Eval);
        const double mlm = loss.mlm.item();
        const double nsp = loss.nsp.item();
        o.detail << "seed " << seed << ": mlm " << fmt(mlm) << " (ln V " << fmt(ln_v) << "), nsp " << fmt(nsp)
                 << "; ";
        o.require(std::abs(mlm - ln_v) <= 0.1 * ln_v, "mlm near ln V");
        o.require(std::abs(nsp - ln_2) <= 0.1 * ln_2, "nsp near ln 2");
    }
}

void overfit(Outcome& o) {
    const auto docs = overfit_corpus();
    std::size_t sentences = 0;
    for (const auto& d : docs) {
        sentences += d.sentences.size();
    }
    const auto vocab = wp::build_vocab(docs, {200, 2});
    data::DatasetConfig dcfg;
    dcfg.seed = 11;
    const auto built = data::build_dataset(docs, vocab, dcfg);
    const auto mc = no_dropout(model::desk_config(vocab.size()));
    train::TrainConfig tc;
    tc.batch_size = 7;
    tc.epochs = 150;
    tc.learning_rate = 1e-3;
    tc.seed = 3;
    const auto result = train::pretrain(built.dataset, mc, tc);
    const double initial = result.losses.front().total_loss;
    const double final_loss = result.losses.back().total_loss;
    const auto m = train::evaluate(result.checkpoint.params, built.dataset.examples, 7);
    o.detail << sentences << " sentences, " << built.dataset.examples.size() << " examples, vocab " << vocab.size()
             << ", " << result.losses.size() << " steps: loss " << fmt(initial) << " -> " << fmt(final_loss)
             << " (ratio " << fmt(final_loss / initial) << "), eval total "
             << fmt(m.mlm_loss + m.nsp_loss) << ", mlm accuracy " << fmt(m.mlm_accuracy) << ", nsp accuracy "
             << fmt(m.nsp_accuracy);
    o.require(sentences == 32, "32 sentences");
    o.require(final_loss < 0.2 * initial, "loss ratio");
    o.require(m.mlm_accuracy >= 0.9, "mlm accuracy");
}

void domain_direction(Outcome& o) {
    const auto setup = domain_setup(12, 10);
    std::vector<dapt::corpus::Document> all = setup.generic;
    all.insert(all.end(), setup.domain.begin(), setup.domain.end());
    const auto vocab = wp::build_vocab(all, {400, 2});
    // five differently masked copies of each corpus, concatenated
    auto build = [&](const std::vector<dapt::corpus::Document>& docs) {
        data::Dataset out;
        for (std::uint64_t copy = 0; copy < 5; ++copy) {
            data::DatasetConfig dcfg;
            dcfg.seed = 5 + copy;
            auto part = data::build_dataset(docs, vocab, dcfg).dataset;
            if (copy == 0) {
                out = std::move(part);
            } else {
                out.examples.insert(out.examples.end(), part.examples.begin(), part.examples.end());
            }
        }
        return out;
    };
    const auto generic = build(setup.generic);
    const auto domain = build(setup.domain);
    const auto mc = model::desk_config(vocab.size());
    train::TrainConfig tc;
    tc.batch_size = 32;
    tc.epochs = 20;
    tc.seed = 9;
    const auto base = train::pretrain(generic, mc, tc).checkpoint;
    const auto tuned = train::finetune(base, domain, tc).checkpoint;
    const auto rows = eval::compare_models(setup.pairs, base.params, tuned.params, vocab);
    const auto summary = eval::summarize(rows);
    std::size_t positive = 0;
    for (const auto& r : rows) {
        positive += r.ok() && r.difference() > 0.0;
    }
    const double share = double(positive) / double(rows.size());
    // control: mismatched topics should not gain similarity the way matched ones do
    std::vector<eval::SentencePair> mismatched;
    for (std::size_t i = 0; i < setup.pairs.size(); ++i) {
        const auto& next = setup.pairs[(i + 1) % setup.pairs.size()];
        mismatched.push_back({"M" + std::to_string(i + 1), setup.pairs[i].source, next.target});
    }
    const auto control = eval::summarize(eval::compare_models(mismatched, base.params, tuned.params, vocab));
    o.detail << generic.examples.size() << " generic / " << domain.examples.size() << " domain examples; "
             << rows.size() << " pairs, " << positive << " positive (" << fmt(100 * share, 1)
             << "%), mean difference " << fmt(summary.mean_difference) << " (std " << fmt(summary.std_difference)
             << "); mismatched-topic control mean difference " << fmt(control.mean_difference);
    auto co_occurring = [&](const std::vector<dapt::corpus::Document>& docs) {
        std::size_t n = 0, total = 0;
        for (const auto& d : docs) {
            for (const auto& sentence : d.sentences) {
                const auto toks = wp::tokenize(sentence, vocab).tokens;
                ++total;
                for (const auto& t : setup.terms) {
                    const bool x = std::find(toks.begin(), toks.end(), t.first) != toks.end();
                    const bool y = std::find(toks.begin(), toks.end(), t.second) != toks.end();
                    n += x && y;
                }
            }
        }
        return std::pair{n, total};
    };
    const auto [in_generic, generic_total] = co_occurring(setup.generic);
    const auto [in_domain, domain_total] = co_occurring(setup.domain);
    o.require(in_generic == 0 && in_domain == domain_total, "term pairs co-occur only in the domain corpus");
    o.require(rows.size() >= 10 && summary.n_errors == 0, "pairs scored");
    o.require(share >= 0.8, "positive share");
    o.require(summary.mean_difference > 0.0, "mean difference");
}

void determinism(Outcome& o) {
    const auto dir = scratch("determinism");
    const auto docs = overfit_corpus();
    dapt::corpus::write_corpus(dir / "corpus.txt", docs);
    auto p = [&](const std::string& name) { return (dir / name).string(); };
    bool ok = cli({"build-vocab", "--input", p("corpus.txt"), "--size", "150", "--output", p("vocab.txt")}) == 0;
    for (const char* out : {"data1", "data2"}) {
        ok = ok && cli({"make-data", "--corpus", p("corpus.txt"), "--vocab", p("vocab.txt"), "--max-seq-length", "64",
                        "--seed", "13", "--output", p(out)}) == 0;
    }
    const auto vocab_size = wp::load_vocab(dir / "vocab.txt").size();
    dapt::write_file_bytes(dir / "model.json", model::config_to_json(no_dropout([&] {
                               auto c = model::desk_config(vocab_size);
                               c.max_seq_length = 64;
                               c.hidden_size = 32;
                               c.intermediate_size = 64;
                               return c;
                           }())));
    for (const char* out : {"ckpt1", "ckpt2"}) {
        ok = ok && cli({"pretrain", "--data", p("data1"), "--config", p("model.json"), "--batch-size", "8",
                        "--epochs", "3", "--seed", "21", "--output", p(out)}) == 0;
    }
    o.require(ok, "cli runs");
    if (!ok) {
        return;
    }
    const bool same_data = dapt::read_file_bytes(dir / "data1" / data::kDatasetFileName) ==
                           dapt::read_file_bytes(dir / "data2" / data::kDatasetFileName);
    const bool same_loss =
        dapt::read_file_bytes(dir / "ckpt1" / "loss.csv") == dapt::read_file_bytes(dir / "ckpt2" / "loss.csv");
    const bool same_ckpt = dapt::read_file_bytes(dir / "ckpt1" / train::kCheckpointFileName) ==
                           dapt::read_file_bytes(dir / "ckpt2" / train::kCheckpointFileName);

    // save -> load -> forward, against the in-memory model from the same run
    const auto ds = data::read_dataset(dir / "data1");
    train::TrainConfig tc;
    tc.batch_size = 8;
    tc.epochs = 3;
    tc.seed = 21;
    tc.max_seq_length = 64;
    const auto mc = model::config_from_json(dapt::read_file_bytes(dir / "model.json"));
    const auto memory = train::pretrain(ds, mc, tc).checkpoint;
    const auto loaded = train::load_checkpoint(dir / "ckpt1");
    const auto a = model::forward(memory.params, ds.examples[0], model::Mode::Eval);
    const auto b = model::forward(loaded.params, ds.examples[0], model::Mode::Eval);
    const bool same_forward =
        std::memcmp(a.last().data().data(), b.last().data().data(), a.last().size() * sizeof(double)) == 0;

    const std::string vocab_text = dapt::read_file_bytes(dir / "vocab.txt");
    const auto vocab = wp::parse_vocab(vocab_text);
    wp::save_vocab(vocab, dir / "vocab_again.txt");
    const bool vocab_round_trip = dapt::read_file_bytes(dir / "vocab_again.txt") == vocab_text &&
                                  dapt::read_file_bytes(dir / "data1" / data::kVocabFileName) == vocab_text;

    o.detail << "dataset bytes " << (same_data ? "equal" : "differ") << ", loss logs "
             << (same_loss ? "equal" : "differ") << ", checkpoints " << (same_ckpt ? "equal" : "differ")
             << ", reloaded forward " << (same_forward ? "bit-identical" : "differs") << ", vocab round trip "
             << (vocab_round_trip ? "exact" : "differs");
    o.require(same_data, "dataset bytes");
    o.require(same_loss, "loss log");
    o.require(same_ckpt, "checkpoint bytes");
    o.require(same_forward, "forward after reload");
    o.require(vocab_round_trip, "vocab round trip");
    fs::remove_all(dir);
}

void cosine_pooling_algebra(Outcome& o) {
    using dapt::embed::cosine;
    dapt::Rng rng(99);
    double worst_identity = 0.0, worst_scale = 0.0;
    bool symmetric = true, in_range = true, sign_flip = true;
    for (int t = 0; t < 2000; ++t) {
        const std::size_t dim = 1 + rng.index(64);
        std::vector<double> a(dim), b(dim), scaled(dim), negated(dim);
        const double alpha = std::exp(4.0 * rng.normal());
        for (std::size_t i = 0; i < dim; ++i) {
            a[i] = rng.normal();
            b[i] = rng.uniform() < 0.2 ? a[i] : rng.normal();
            scaled[i] = alpha * a[i];
            negated[i] = -alpha * a[i];
        }
        const double ab = cosine(a, b);
        worst_identity = std::max(worst_identity, std::abs(cosine(a, a) - 1.0));
        symmetric = symmetric && ab == cosine(b, a);
        in_range = in_range && ab >= -1.0 && ab <= 1.0;
        worst_scale = std::max(worst_scale, std::abs(cosine(scaled, b) - ab));
        sign_flip = sign_flip && std::abs(cosine(negated, b) + ab) <= 1e-12;
    }
    o.require(worst_identity <= 1e-9, "identity");
    o.require(symmetric, "symmetry");
    o.require(in_range, "range");
    o.require(worst_scale <= 1e-12, "scale invariance");
    o.require(sign_flip, "negative scale flips sign");

    std::vector<std::vector<double>> vs;
    for (int i = 0; i < 9; ++i) {
        vs.push_back({rng.normal(), rng.normal(), rng.normal()});
    }
    auto shuffled = vs;
    for (std::size_t i = shuffled.size(); i > 1; --i) {
        std::swap(shuffled[i - 1], shuffled[rng.index(i)]);
    }
    const auto m1 = dapt::embed::mean_pool(vs).vector;
    const auto m2 = dapt::embed::mean_pool(shuffled).vector;
    double perm = 0.0;
    for (std::size_t i = 0; i < m1.size(); ++i) {
        perm = std::max(perm, std::abs(m1[i] - m2[i]));
    }
    o.require(perm <= 1e-12, "pool permutation invariance");
    o.require(dapt::embed::mean_pool({vs[0]}).vector == vs[0], "single-vector pool");

    const auto vocab = fixtures::sentence_vocab();
    const auto params = model::init_params(model::desk_config(vocab.size()), 8);
    double pad = 0.0;
    for (const char* s : {"here is the sentence i want embeddings for .", "i want", "the sentence is here ."}) {
        const auto x = dapt::embed::token_embeddings(params, s, vocab, {}, false);
        const auto y = dapt::embed::token_embeddings(params, s, vocab, {}, true);
        const auto px = dapt::embed::mean_pool(x.vectors).vector;
        const auto py = dapt::embed::mean_pool(y.vectors).vector;
        for (std::size_t i = 0; i < px.size(); ++i) {
            pad = std::max(pad, std::abs(px[i] - py[i]));
        }
    }
    o.require(pad <= 1e-10, "pad invariance");
    o.detail << "identity err " << worst_identity << ", scale err " << worst_scale << ", permutation err " << perm
             << ", pad err " << pad;
}

void hyperparameter_surface(Outcome& o) {
    const auto dir = scratch("hyper");
    auto p = [&](const std::string& name) { return (dir / name).string(); };
    const auto setup = domain_setup(4, 12);
    dapt::corpus::write_corpus(dir / "corpus.txt", setup.generic);
    bool ok = cli({"build-vocab", "--input", p("corpus.txt"), "--size", "200", "--output", p("vocab.txt")}) == 0;
    ok = ok && cli({"make-data", "--corpus", p("corpus.txt"), "--vocab", p("vocab.txt"), "--max-seq-length", "100",
                    "--mask-frac", "0.15", "--seed", "1", "--output", p("data")}) == 0;
    o.require(ok, "make-data");
    if (!ok) {
        return;
    }
    const auto ds = data::read_dataset(dir / "data");
    const bool all_100 = std::all_of(ds.examples.begin(), ds.examples.end(), [](const data::PretrainExample& e) {
        return e.length() == 100 && e.segment_ids.size() == 100 && e.pad_mask.size() == 100;
    });
    o.require(ds.header.max_seq_length == 100 && all_100, "every example has 100 positions");
    const std::size_t per_epoch = ds.examples.size() / 32;

    std::string out;
    ok = cli({"pretrain", "--data", p("data"), "--batch-size", "32", "--epochs", "1", "--seed", "2", "--output",
              p("base")},
             &out) == 0;
    o.require(ok, "pretrain at reduced epochs");
    if (!ok) {
        return;
    }
    const auto base = train::load_checkpoint(dir / "base");
    o.require(base.params.config.max_seq_length == 100, "model max_seq_length");
    o.require(base.meta.steps_completed == per_epoch, "steps = examples / 32");

    bool presets = true;
    for (std::size_t epochs : train::kEpochPresets) {
        const std::string e = std::to_string(epochs);
        presets = presets && cli({"pretrain", "--data", p("data"), "--batch-size", "32", "--epochs", e,
                                  "--output", p("unused"), "--dry-run"},
                                 &out) == 0;
        presets = presets && out.find("total_steps: " + std::to_string(per_epoch * epochs)) != std::string::npos;
        presets = presets && cli({"finetune", "--base", p("base"), "--data", p("data"), "--epochs", e,
                                  "--batch-size", "32", "--output", p("unused"), "--dry-run"},
                                 &out) == 0;
        presets = presets && out.find("epochs: " + e) != std::string::npos;
    }
    o.require(presets, "epoch presets 100/500/1000 accepted");
    ok = cli({"finetune", "--base", p("base"), "--data", p("data"), "--epochs", "1", "--batch-size", "32",
              "--output", p("tuned")}) == 0;
    o.require(ok && train::load_checkpoint(dir / "tuned").meta.steps_completed == per_epoch, "finetune run");
    o.detail << ds.examples.size() << " examples of " << ds.header.max_seq_length << " positions, "
             << per_epoch << " steps per epoch at batch 32; dry runs for 100/500/1000 epochs "
             << (presets ? "accepted" : "rejected");
    fs::remove_all(dir);
}

void parameter_count(Outcome& o) {
    const auto desk = model::desk_config(3000);
    const auto params = model::allocate_parameters(desk);
    std::size_t tally = 0;
    for (const auto& nt : params.named()) {
        tally += nt.tensor.size();
    }
    model::ModelConfig base;
    base.vocab_size = 30522;
    base.hidden_size = 768;
    base.num_layers = 12;
    base.num_heads = 12;
    base.intermediate_size = 3072;
    base.max_seq_length = 512;
    const std::size_t big = model::parameter_count(base);
    const double rel = std::abs(double(big) - 110e6) / 110e6;
    o.detail << "desk formula " << model::parameter_count(desk) << " vs tally " << tally << "; 12-layer/768 config "
             << big << " (" << fmt(100 * rel, 2) << "% from 110M)";
    o.require(tally == model::parameter_count(desk), "desk tally");
    o.require(rel <= 0.05, "within 5% of 110M");
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<void(Outcome&)> run;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "metric reproduction", 1, metric_reproduction},
        {2, "tokenizer conformance", 1, tokenizer_conformance},
        {3, "masking statistics", 5, masking_statistics},
        {4, "nsp balance", 5, nsp_balance},
        {5, "gradient correctness", 120, gradient_correctness},
        {6, "untrained loss calibration", 10, untrained_calibration},
        {7, "overfit / memorization", 600, overfit},
        {8, "domain-adaptation direction", 900, domain_direction},
        {9, "determinism and round trips", 120, determinism},
        {10, "cosine and pooling algebra", 10, cosine_pooling_algebra},
        {11, "hyperparameter surface", 60, hyperparameter_surface},
        {12, "parameter-count formula", 1, parameter_count},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.insert(std::atoi(argv[i]));
    }
    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) {
            continue;
        }
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs > c.budget_seconds) {
            o.require(false, "runtime " + fmt(secs, 1) + "s over " + fmt(c.budget_seconds, 0) + "s budget");
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << " (" << fmt(secs, 2)
                  << "s): " << o.detail.str() << std::endl;
        failures += o.pass ? 0 : 1;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
