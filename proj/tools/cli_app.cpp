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

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace dapt::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> layer;
    bool include_specials = false;
};

embed::PoolingPolicy pooling(const Globals& g) {
    embed::PoolingPolicy p;
    p.layer_index = g.layer;
    p.include_special_tokens = g.include_specials;
    return p;
}

fs::path package_dir(const fs::path& p) { return fs::is_directory(p) ? p : p.parent_path(); }

wordpiece::Vocabulary resolve_vocab(const std::string& flag, const fs::path& checkpoint) {
    if (!flag.empty()) {
        return wordpiece::load_vocab(flag);
    }
    const fs::path beside = package_dir(checkpoint) / data::kVocabFileName;
    if (!fs::exists(beside)) {
        throw std::runtime_error("no --vocab given and no " + std::string(data::kVocabFileName) + " next to " +
                                 checkpoint.string());
    }
    return wordpiece::load_vocab(beside);
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string file_hash(const fs::path& p) {
    if (fs::is_directory(p)) {
        // checkpoint or dataset directories are identified by their main file
        for (const char* name : {train::kCheckpointFileName, data::kDatasetFileName}) {
            if (fs::exists(p / name)) {
                return sha256_hex(read_file_bytes(p / name));
            }
        }
        return "";
    }
    return sha256_hex(read_file_bytes(p));
}

void write_manifest(const fs::path& dir, const std::string& command, const Globals& g,
                    const std::vector<std::pair<std::string, fs::path>>& inputs,
                    const std::vector<std::string>& outputs) {
    ordered_json j;
    j["tool"] = "dapt";
    j["version"] = kVersion;
    j["command"] = command;
    j["seed"] = g.seed ? ordered_json(*g.seed) : ordered_json(nullptr);
    j["layer"] = g.layer ? ordered_json(*g.layer) : ordered_json("final");
    j["include_special_tokens"] = g.include_specials;
    ordered_json in = ordered_json::object();
    for (const auto& [role, path] : inputs) {
        in[role] = {{"path", path.string()}, {"sha256", file_hash(path)}};
    }
    j["inputs"] = in;
    j["outputs"] = outputs;
    j["created_utc"] = utc_timestamp();
    write_file_bytes(dir / "run_manifest.json", j.dump(2) + "\n");
}

std::string python_list(const std::vector<std::string>& tokens) {
    std::string out = "[";
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        out += (i ? ", '" : "'") + tokens[i] + "'";
    }
    return out + "]";
}

void add_train_options(CLI::App* cmd, train::TrainConfig& tc, bool& dry_run) {
    cmd->add_option("--batch-size", tc.batch_size, "Examples per step")->capture_default_str();
    cmd->add_option("--lr", tc.learning_rate, "Peak learning rate")->capture_default_str();
    cmd->add_option("--warmup", tc.warmup_fraction, "Warmup fraction of total steps")->capture_default_str();
    cmd->add_option("--weight-decay", tc.weight_decay)->capture_default_str();
    cmd->add_flag("--dry-run", dry_run, "Validate inputs and print the step plan without training");
}

void print_plan(std::ostream& out, const data::Dataset& ds, const train::TrainConfig& tc) {
    const std::size_t per_epoch = ds.examples.size() / tc.batch_size;
    out << "examples: " << ds.examples.size() << "\n"
        << "max_seq_length: " << tc.max_seq_length << "\n"
        << "batch_size: " << tc.batch_size << "\n"
        << "epochs: " << tc.epochs << "\n"
        << "steps_per_epoch: " << per_epoch << "\n"
        << "total_steps: " << per_epoch * tc.epochs << "\n";
}

train::TrainHooks progress_hooks(std::ostream& out, const fs::path& output, std::size_t total_epochs) {
    train::TrainHooks hooks;
    const std::size_t every = std::max<std::size_t>(1, total_epochs / 20);
    hooks.on_epoch_end = [&out, every, total_epochs](std::size_t epoch, const train::Checkpoint& ck) {
        if (epoch % every == 0 || epoch == total_epochs) {
            out << "epoch " << epoch << "/" << total_epochs << " step " << ck.meta.steps_completed << " loss "
                << report::format_number(ck.meta.final_loss) << "\n";
        }
    };
    hooks.on_checkpoint = [output](std::size_t step, const train::Checkpoint& ck) {
        train::save_checkpoint(ck, output / ("step-" + std::to_string(step)) / train::kCheckpointFileName);
    };
    return hooks;
}

void write_package(const fs::path& out_dir, const train::TrainOutcome& outcome, const fs::path& vocab_source,
                   const train::TrainConfig& tc) {
    train::save_model_package(outcome.checkpoint, out_dir);
    if (fs::exists(vocab_source)) {
        fs::copy_file(vocab_source, out_dir / data::kVocabFileName, fs::copy_options::overwrite_existing);
    }
    write_file_bytes(out_dir / "loss.csv", train::format_loss_log(outcome.losses));
    ordered_json j;
    j["batch_size"] = tc.batch_size;
    j["epochs"] = tc.epochs;
    j["learning_rate"] = tc.learning_rate;
    j["warmup_fraction"] = tc.warmup_fraction;
    j["adam_beta1"] = tc.adam_beta1;
    j["adam_beta2"] = tc.adam_beta2;
    j["adam_epsilon"] = tc.adam_epsilon;
    j["weight_decay"] = tc.weight_decay;
    j["seed"] = tc.seed;
    j["max_seq_length"] = tc.max_seq_length;
    j["schedule_epochs"] = tc.schedule_epochs;
    write_file_bytes(out_dir / "train_config.json", j.dump(2) + "\n");
}

fs::path dataset_vocab(const fs::path& data_path) { return package_dir(data_path) / data::kVocabFileName; }

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Domain-adaptive pretraining toolkit: corpus preparation, WordPiece vocabularies, "
                 "MLM+NSP pretraining, fine-tuning and sentence-similarity evaluation."};
    app.name("dapt");
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Globals g;
    std::uint64_t seed_value = 0;
    std::size_t layer_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Random seed (each command has its own default)");
    auto* layer_opt = app.add_option("--layer", layer_value, "Hidden layer for token vectors (0 = embeddings)");
    app.add_flag("--include-specials", g.include_specials, "Pool [CLS] and [SEP] as well");

    std::function<void()> action;

    // preprocess
    std::string pre_input, pre_column, pre_output;
    auto* pre = app.add_subcommand("preprocess", "Clean raw CSV or line-per-record text into a corpus file");
    pre->fallthrough();
    pre->add_option("--input", pre_input)->required()->check(CLI::ExistingFile);
    pre->add_option("--text-column", pre_column, "CSV column holding the text (omit for plain text)");
    pre->add_option("--output", pre_output)->required();
    pre->callback([&] {
        action = [&] {
            const auto records =
                pre_column.empty() ? corpus::ingest_lines(pre_input) : corpus::ingest_csv(pre_input, pre_column);
            const auto split = corpus::split_documents(records);
            corpus::write_corpus(pre_output, split.documents);
            out << "records: " << records.size() << "\n"
                << "documents: " << split.documents.size() << "\n"
                << "dropped_records: " << split.dropped_records << "\n";
        };
    });

    // stats
    std::string stats_input;
    auto* stats = app.add_subcommand("stats", "Sentence and word statistics of a corpus file");
    stats->fallthrough();
    stats->add_option("--input", stats_input)->required()->check(CLI::ExistingFile);
    stats->callback([&] {
        action = [&] {
            const auto docs = corpus::read_corpus(stats_input);
            const auto s = corpus::corpus_stats(docs);
            out << "documents: " << docs.size() << "\n"
                << "sentences: " << s.sentence_count << "\n"
                << "mean_sentence_length_words: " << report::format_number(s.mean_sentence_length_words) << "\n"
                << "vocabulary_words: " << s.vocabulary_word_count << "\n"
                << "total_words: " << s.total_word_count << "\n";
        };
    });

    // build-vocab
    std::string bv_input, bv_output;
    wordpiece::BuildOptions bv_opts;
    bv_opts.target_size = 8000;
    auto* bv = app.add_subcommand("build-vocab", "Induce a WordPiece vocabulary from a corpus file");
    bv->fallthrough();
    bv->add_option("--input", bv_input)->required()->check(CLI::ExistingFile);
    bv->add_option("--size", bv_opts.target_size, "Target vocabulary size")->capture_default_str();
    bv->add_option("--min-freq", bv_opts.min_frequency, "Minimum pair count for a merge")->capture_default_str();
    bv->add_option("--output", bv_output)->required();
    bv->callback([&] {
        action = [&] {
            const auto vocab = wordpiece::build_vocab(corpus::read_corpus(bv_input), bv_opts);
            wordpiece::save_vocab(vocab, bv_output);
            out << "vocab_size: " << vocab.size() << "\n";
        };
    });

    // tokenize
    std::string tok_vocab, tok_text;
    bool tok_packed = false;
    auto* tok = app.add_subcommand("tokenize", "Print the WordPiece tokens of a sentence");
    tok->fallthrough();
    tok->add_option("--vocab", tok_vocab)->required()->check(CLI::ExistingFile);
    tok->add_option("--text", tok_text)->required();
    tok->add_flag("--packed", tok_packed, "Wrap the tokens in [CLS] ... [SEP]");
    tok->callback([&] {
        action = [&] {
            const auto vocab = wordpiece::load_vocab(tok_vocab);
            auto tokens = wordpiece::tokenize(corpus::clean_text(tok_text), vocab).tokens;
            if (tok_packed) {
                tokens.insert(tokens.begin(), std::string(wordpiece::kClsToken));
                tokens.push_back(std::string(wordpiece::kSepToken));
            }
            out << python_list(tokens) << "\n";
        };
    });

    // make-data
    std::string md_corpus, md_vocab, md_output;
    data::DatasetConfig md_cfg;
    auto* md = app.add_subcommand("make-data", "Build MLM+NSP pretraining examples");
    md->fallthrough();
    md->add_option("--corpus", md_corpus)->required()->check(CLI::ExistingFile);
    md->add_option("--vocab", md_vocab)->required()->check(CLI::ExistingFile);
    md->add_option("--max-seq-length", md_cfg.max_seq_length)->capture_default_str();
    md->add_option("--mask-frac", md_cfg.masking.mask_fraction)->capture_default_str();
    md->add_option("--random-pair-prob", md_cfg.random_pair_prob)->capture_default_str();
    md->add_option("--output", md_output)->required();
    md->callback([&] {
        action = [&] {
            if (g.seed) {
                md_cfg.seed = *g.seed;
            }
            const auto vocab = wordpiece::load_vocab(md_vocab);
            const auto result = data::build_dataset(corpus::read_corpus(md_corpus), vocab, md_cfg);
            data::write_dataset_dir(md_output, result, md_cfg, vocab);
            const auto& s = result.stats;
            out << "examples: " << result.dataset.examples.size() << "\n"
                << "is_next: " << s.is_next << "\n"
                << "not_next: " << s.not_next << "\n"
                << "skipped: " << s.skipped << "\n"
                << "truncated: " << s.truncated << "\n"
                << "masked_positions: " << s.masked_positions << "\n";
        };
    });

    // pretrain
    std::string pt_data, pt_config, pt_output;
    train::TrainConfig pt_tc;
    bool pt_dry = false;
    auto* pt = app.add_subcommand("pretrain", "Train an encoder from scratch on a dataset");
    pt->fallthrough();
    pt->add_option("--data", pt_data)->required()->check(CLI::ExistingPath);
    pt->add_option("--config", pt_config, "Model config JSON (default: desk-scale config)")->check(CLI::ExistingFile);
    pt->add_option("--epochs", pt_tc.epochs)->capture_default_str();
    pt->add_option("--checkpoint-every", pt_tc.checkpoint_every, "Save step-N/ checkpoints every N steps");
    pt->add_option("--output", pt_output)->required();
    add_train_options(pt, pt_tc, pt_dry);
    pt->callback([&] {
        action = [&] {
            if (g.seed) {
                pt_tc.seed = *g.seed;
            }
            const auto ds = data::read_dataset(pt_data);
            model::ModelConfig mc = model::desk_config(ds.header.vocab_size);
            mc.max_seq_length = ds.header.max_seq_length;
            if (!pt_config.empty()) {
                mc = model::config_from_json(read_file_bytes(pt_config));
            }
            pt_tc.max_seq_length = mc.max_seq_length;
            mc.validate();
            pt_tc.validate();
            out << "parameters: " << model::parameter_count(mc) << "\n";
            print_plan(out, ds, pt_tc);
            if (pt_dry) {
                return;
            }
            const auto outcome = train::pretrain(ds, mc, pt_tc, progress_hooks(out, pt_output, pt_tc.epochs));
            write_package(pt_output, outcome, dataset_vocab(pt_data), pt_tc);
            out << "checkpoint: " << train::checkpoint_hash(outcome.checkpoint) << "\n";
        };
    });

    // finetune
    std::string ft_base, ft_data, ft_output;
    train::TrainConfig ft_tc;
    bool ft_dry = false;
    auto* ft = app.add_subcommand("finetune", "Continue training a checkpoint on a domain dataset");
    ft->fallthrough();
    ft->add_option("--base", ft_base)->required()->check(CLI::ExistingPath);
    ft->add_option("--data", ft_data)->required()->check(CLI::ExistingPath);
    ft->add_option("--epochs", ft_tc.epochs, "Fine-tuning epochs (100, 500 and 1000 are the presets)")
        ->capture_default_str();
    ft->add_option("--checkpoint-every", ft_tc.checkpoint_every);
    ft->add_option("--output", ft_output)->required();
    add_train_options(ft, ft_tc, ft_dry);
    ft->callback([&] {
        action = [&] {
            if (g.seed) {
                ft_tc.seed = *g.seed;
            }
            const auto base = train::load_checkpoint(ft_base);
            const auto ds = data::read_dataset(ft_data);
            const fs::path base_vocab = package_dir(ft_base) / data::kVocabFileName;
            if (fs::exists(base_vocab) &&
                wordpiece::load_vocab(base_vocab).fingerprint() != ds.header.vocab_fingerprint) {
                throw std::runtime_error("dataset was built with a different vocabulary than the base checkpoint");
            }
            ft_tc.max_seq_length = base.params.config.max_seq_length;
            ft_tc.validate();
            print_plan(out, ds, ft_tc);
            if (ft_dry) {
                return;
            }
            const auto outcome = train::finetune(base, ds, ft_tc, progress_hooks(out, ft_output, ft_tc.epochs));
            write_package(ft_output, outcome, fs::exists(base_vocab) ? base_vocab : dataset_vocab(ft_data), ft_tc);
            out << "parent: " << outcome.checkpoint.meta.parent_hash << "\n"
                << "checkpoint: " << train::checkpoint_hash(outcome.checkpoint) << "\n";
        };
    });

    // inspect-model
    std::string im_ckpt;
    auto* im = app.add_subcommand("inspect-model", "Print a checkpoint's config and parameter count");
    im->fallthrough();
    im->add_option("--checkpoint", im_ckpt)->required()->check(CLI::ExistingPath);
    im->callback([&] {
        action = [&] {
            const auto ck = train::load_checkpoint(im_ckpt);
            out << model::config_to_json(ck.params.config) << "\n"
                << "parameters: " << model::parameter_count(ck.params.config) << "\n"
                << "phase: " << ck.meta.phase << "\n"
                << "steps: " << ck.meta.steps_completed << "\n"
                << "epochs: " << ck.meta.epochs_completed << "\n"
                << "final_loss: " << report::format_number(ck.meta.final_loss) << "\n"
                << "seed: " << ck.meta.seed << "\n"
                << "parent: " << (ck.meta.parent_hash.empty() ? "-" : ck.meta.parent_hash) << "\n"
                << "hash: " << train::checkpoint_hash(ck) << "\n";
        };
    });

    // embed
    std::string em_ckpt, em_vocab, em_input, em_output;
    auto* em = app.add_subcommand("embed", "Mean-pooled sentence vectors, one per input line");
    em->fallthrough();
    em->add_option("--checkpoint", em_ckpt)->required()->check(CLI::ExistingPath);
    em->add_option("--vocab", em_vocab, "Vocabulary (default: vocab.txt beside the checkpoint)");
    em->add_option("--input", em_input, "One sentence per line, optionally `id<TAB>sentence`")
        ->required()
        ->check(CLI::ExistingFile);
    em->add_option("--output", em_output)->required();
    em->callback([&] {
        action = [&] {
            const auto ck = train::load_checkpoint(em_ckpt);
            const auto vocab = resolve_vocab(em_vocab, em_ckpt);
            const auto policy = pooling(g);
            std::istringstream in(read_file_bytes(em_input));
            std::string line, tsv;
            std::size_t line_no = 0, written = 0, failed = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (!line.empty() && line.back() == '\r') {
                    line.pop_back();
                }
                if (line.find_first_not_of(" \t") == std::string::npos) {
                    continue;
                }
                std::string id = "s" + std::to_string(line_no);
                std::string sentence = line;
                if (const auto tab = line.find('\t'); tab != std::string::npos) {
                    id = line.substr(0, tab);
                    sentence = line.substr(tab + 1);
                }
                try {
                    const auto tv = embed::token_embeddings(ck.params, sentence, vocab, policy);
                    if (tv.truncated) {
                        err << "warning: " << id << " truncated to " << ck.params.config.max_seq_length - 2
                            << " tokens\n";
                    }
                    const auto e = embed::mean_pool(tv.vectors);
                    tsv += id + "\t" + std::to_string(e.token_count);
                    for (double v : e.vector) {
                        tsv += "\t" + report::format_number(v);
                    }
                    tsv += "\n";
                    ++written;
                } catch (const embed::EmbeddingError& e) {
                    err << "warning: " << id << " skipped: " << e.what() << "\n";
                    ++failed;
                }
            }
            write_file_bytes(em_output, tsv);
            out << "embedded: " << written << "\n"
                << "skipped: " << failed << "\n";
        };
    });

    // evaluate
    std::string ev_pairs, ev_base, ev_tuned, ev_vocab, ev_out;
    auto* ev = app.add_subcommand("evaluate", "Compare pair similarities under a base and a tuned checkpoint");
    ev->fallthrough();
    ev->add_option("--pairs", ev_pairs, "TSV: pair_id, source, target")->required()->check(CLI::ExistingFile);
    ev->add_option("--base", ev_base)->required()->check(CLI::ExistingPath);
    ev->add_option("--tuned", ev_tuned)->required()->check(CLI::ExistingPath);
    ev->add_option("--vocab", ev_vocab);
    ev->add_option("--out", ev_out)->required();
    ev->callback([&] {
        action = [&] {
            const auto pairs = eval::read_pairs(ev_pairs);
            const auto base = train::load_checkpoint(ev_base);
            const auto tuned = train::load_checkpoint(ev_tuned);
            const auto vocab = resolve_vocab(ev_vocab, ev_base);
            const auto policy = pooling(g);
            const auto rows = eval::compare_models(pairs, base.params, tuned.params, vocab, policy);
            for (const auto& r : rows) {
                if (!r.ok()) {
                    err << "warning: pair " << r.pair_id << ": " << r.error << "\n";
                }
            }
            const auto summary = eval::summarize(rows);
            const fs::path dir = ev_out;
            fs::create_directories(dir);
            write_file_bytes(dir / "comparison.csv", report::comparison_csv(rows));
            write_file_bytes(dir / "summary.csv", report::summary_csv(summary));
            write_file_bytes(dir / "comparison.svg", report::comparison_chart(rows));
            report::BarChart improvement;
            improvement.title = "Improvement rate per pair";
            improvement.x_label = "pair";
            improvement.y_label = "improvement (%)";
            improvement.values.emplace_back();
            for (const auto& r : rows) {
                if (r.ok() && r.cos_base != 0.0) {
                    improvement.labels.push_back(r.pair_id);
                    improvement.values[0].push_back(r.improvement_pct());
                }
            }
            write_file_bytes(dir / "improvement.svg", report::render_bar_chart(improvement));
            std::vector<std::string> outputs = {"comparison.csv", "summary.csv", "comparison.svg", "improvement.svg"};
            if (pairs.size() >= 2) {
                const auto profile = eval::difference_profile(pairs, base.params, tuned.params, vocab, policy);
                write_file_bytes(dir / "profile.csv", report::profile_csv(profile));
                report::BarChart chart;
                chart.title = "Mean and spread of cosine differences per sentence";
                chart.x_label = "sentence";
                chart.y_label = "cosine difference";
                chart.series_names = {"mean", "std"};
                chart.values.assign(2, {});
                for (const auto& p : profile) {
                    chart.labels.push_back(p.id);
                    chart.values[0].push_back(p.mean_difference);
                    chart.values[1].push_back(p.std_difference);
                }
                write_file_bytes(dir / "profile.svg", report::render_bar_chart(chart));
                outputs.push_back("profile.csv");
                outputs.push_back("profile.svg");
            }
            write_manifest(dir, "evaluate", g, {{"pairs", ev_pairs}, {"base", ev_base}, {"tuned", ev_tuned}},
                           outputs);
            out << "pairs: " << summary.n_pairs << "\n"
                << "errors: " << summary.n_errors << "\n"
                << "mean_difference: " << report::format_number(summary.mean_difference) << "\n"
                << "std_difference: " << report::format_number(summary.std_difference) << "\n"
                << "mean_improvement_pct: " << report::format_number(summary.mean_improvement_pct) << "\n";
        };
    });

    // anchor
    std::string an_id, an_pairs, an_base, an_tuned, an_vocab, an_out;
    auto* an = app.add_subcommand("anchor", "Cosine differences between one sentence and all others");
    an->fallthrough();
    an->add_option("--id", an_id)->required();
    an->add_option("--pairs", an_pairs)->required()->check(CLI::ExistingFile);
    an->add_option("--base", an_base)->required()->check(CLI::ExistingPath);
    an->add_option("--tuned", an_tuned)->required()->check(CLI::ExistingPath);
    an->add_option("--vocab", an_vocab);
    an->add_option("--out", an_out)->required();
    an->callback([&] {
        action = [&] {
            const auto pairs = eval::read_pairs(an_pairs);
            const auto base = train::load_checkpoint(an_base);
            const auto tuned = train::load_checkpoint(an_tuned);
            const auto vocab = resolve_vocab(an_vocab, an_base);
            const auto rows = eval::anchor_differences(an_id, pairs, base.params, tuned.params, vocab, pooling(g));
            const fs::path dir = an_out;
            fs::create_directories(dir);
            const std::string stem = "anchor_" + an_id;
            write_file_bytes(dir / (stem + ".csv"), report::anchor_csv(rows));
            write_file_bytes(dir / (stem + ".svg"), report::anchor_chart(an_id, rows));
            write_manifest(dir, "anchor", g, {{"pairs", an_pairs}, {"base", an_base}, {"tuned", an_tuned}},
                           {stem + ".csv", stem + ".svg"});
            for (const auto& r : rows) {
                out << r.other_id << " " << report::format_number(r.difference()) << "\n";
            }
        };
    });

    // sweep
    std::vector<std::size_t> sw_budgets;
    std::string sw_base, sw_data, sw_pairs, sw_vocab, sw_out;
    train::TrainConfig sw_tc;
    bool sw_dry = false;
    bool sw_save = false;
    auto* sw = app.add_subcommand("sweep", "Fine-tune for several epoch budgets and compare pair similarities");
    sw->fallthrough();
    sw->add_option("--budgets", sw_budgets, "Comma-separated epoch budgets")->required()->delimiter(',');
    sw->add_option("--base", sw_base)->required()->check(CLI::ExistingPath);
    sw->add_option("--data", sw_data)->required()->check(CLI::ExistingPath);
    sw->add_option("--pairs", sw_pairs)->required()->check(CLI::ExistingFile);
    sw->add_option("--vocab", sw_vocab);
    sw->add_option("--out", sw_out)->required();
    sw->add_flag("--save-models", sw_save, "Also write a model package per budget");
    add_train_options(sw, sw_tc, sw_dry);
    sw->callback([&] {
        action = [&] {
            if (g.seed) {
                sw_tc.seed = *g.seed;
            }
            const auto base = train::load_checkpoint(sw_base);
            const auto ds = data::read_dataset(sw_data);
            const auto pairs = eval::read_pairs(sw_pairs);
            const auto vocab = resolve_vocab(sw_vocab, sw_base);
            sw_tc.max_seq_length = base.params.config.max_seq_length;
            sw_tc.epochs = *std::max_element(sw_budgets.begin(), sw_budgets.end());
            sw_tc.validate();
            print_plan(out, ds, sw_tc);
            if (sw_dry) {
                return;
            }
            const auto rep = eval::epochs_sweep(sw_budgets, base, ds, pairs, vocab, sw_tc, pooling(g));
            const fs::path dir = sw_out;
            fs::create_directories(dir);
            write_file_bytes(dir / "sweep.csv", report::sweep_csv(rep));
            write_file_bytes(dir / "sweep.svg", report::sweep_chart(rep));
            std::vector<std::string> outputs = {"sweep.csv", "sweep.svg"};
            if (sw_save) {
                for (std::size_t i = 0; i < rep.budgets.size(); ++i) {
                    const std::string sub = "epochs_" + std::to_string(rep.budgets[i]);
                    train::save_model_package(rep.models[i], dir / sub);
                    wordpiece::save_vocab(vocab, dir / sub / data::kVocabFileName);
                    outputs.push_back(sub);
                }
            }
            write_manifest(dir, "sweep", g, {{"base", sw_base}, {"data", sw_data}, {"pairs", sw_pairs}}, outputs);
            out << "mean_cosine base " << report::format_number(rep.column_means[0]) << "\n";
            for (std::size_t i = 0; i < rep.budgets.size(); ++i) {
                out << "mean_cosine epochs_" << rep.budgets[i] << " "
                    << report::format_number(rep.column_means[i + 1]) << "\n";
            }
        };
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }
    if (seed_opt->count() > 0) {
        g.seed = seed_value;
    }
    if (layer_opt->count() > 0) {
        g.layer = layer_value;
    }
    try {
        action();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace dapt::cli
