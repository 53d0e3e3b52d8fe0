#include "dapt/wordpiece.hpp"

#include "dapt/hashing.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace dapt::wordpiece {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u) != 0;
}

std::size_t utf8_length(unsigned char lead) {
    if (lead < 0x80) {
        return 1;
    }
    if ((lead & 0xE0) == 0xC0) {
        return 2;
    }
    if ((lead & 0xF0) == 0xE0) {
        return 3;
    }
    if ((lead & 0xF8) == 0xF0) {
        return 4;
    }
    return 1;
}

// Byte offsets of code point boundaries, including the end offset.
std::vector<std::size_t> char_boundaries(std::string_view word) {
    std::vector<std::size_t> bounds;
    std::size_t i = 0;
    while (i < word.size()) {
        bounds.push_back(i);
        i += utf8_length(static_cast<unsigned char>(word[i]));
    }
    bounds.push_back(std::min(i, word.size()));
    return bounds;
}

std::vector<std::string> split_chars(std::string_view word) {
    const auto bounds = char_boundaries(word);
    std::vector<std::string> chars;
    for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
        chars.emplace_back(word.substr(bounds[k], bounds[k + 1] - bounds[k]));
    }
    return chars;
}

std::string strip_prefix(const std::string& piece) {
    if (piece.starts_with(kContinuationPrefix)) {
        return piece.substr(kContinuationPrefix.size());
    }
    return piece;
}

} // namespace

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    static const std::string_view specials[] = {kPadToken, kUnkToken, kClsToken, kSepToken, kMaskToken};
    Vocabulary v;
    v.index_.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].empty()) {
            throw VocabError("empty token at line " + std::to_string(i + 1));
        }
        const auto [it, inserted] = v.index_.emplace(tokens[i], static_cast<TokenId>(i));
        if (!inserted) {
            throw VocabError("duplicate token '" + tokens[i] + "' at line " + std::to_string(i + 1));
        }
    }
    for (TokenId id = 0; id < kNumSpecialTokens; ++id) {
        const auto it = v.index_.find(std::string(specials[id]));
        if (it == v.index_.end()) {
            throw VocabError("missing special token " + std::string(specials[id]));
        }
        if (it->second != id) {
            throw VocabError("special token " + std::string(specials[id]) + " must have id " +
                             std::to_string(id) + ", found " + std::to_string(it->second));
        }
    }
    v.tokens_ = std::move(tokens);
    return v;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw VocabError("token id out of range: " + std::to_string(id));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::uint64_t Vocabulary::fingerprint() const { return short_hash(format_vocab(*this)); }

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) {
        ids.push_back(find(t).value_or(kUnkId));
    }
    return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<TokenId>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (TokenId id : ids) {
        out.push_back(token(id));
    }
    return out;
}

std::vector<std::string> pre_split(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    };
    for (char c : text) {
        if (is_space(c)) {
            flush();
        } else if (is_punct(c)) {
            flush();
            words.emplace_back(1, c);
        } else {
            current.push_back(c);
        }
    }
    flush();
    return words;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_word_chars) {
    TokenSequence seq;
    const std::string unk(kUnkToken);
    for (const auto& word : pre_split(text)) {
        const auto bounds = char_boundaries(word);
        const std::size_t n_chars = bounds.size() - 1;
        if (n_chars > max_word_chars) {
            seq.tokens.push_back(unk);
            seq.ids.push_back(kUnkId);
            continue;
        }
        std::vector<std::string> pieces;
        std::vector<TokenId> piece_ids;
        std::size_t start = 0;
        bool bad = false;
        while (start < n_chars) {
            std::size_t end = n_chars;
            std::optional<TokenId> found;
            std::string candidate;
            while (end > start) {
                candidate = word.substr(bounds[start], bounds[end] - bounds[start]);
                if (start > 0) {
                    candidate.insert(0, kContinuationPrefix);
                }
                found = vocab.find(candidate);
                if (found) {
                    break;
                }
                --end;
            }
            if (!found) {
                bad = true;
                break;
            }
            pieces.push_back(std::move(candidate));
            piece_ids.push_back(*found);
            start = end;
        }
        if (bad) {
            seq.tokens.push_back(unk);
            seq.ids.push_back(kUnkId);
        } else {
            seq.tokens.insert(seq.tokens.end(), pieces.begin(), pieces.end());
            seq.ids.insert(seq.ids.end(), piece_ids.begin(), piece_ids.end());
        }
    }
    return seq;
}

std::vector<std::string> join_pieces(const std::vector<std::string>& tokens) {
    std::vector<std::string> words;
    for (const auto& t : tokens) {
        if (t.starts_with(kContinuationPrefix) && !words.empty()) {
            words.back() += t.substr(kContinuationPrefix.size());
        } else {
            words.push_back(t);
        }
    }
    return words;
}

Vocabulary build_vocab(const std::vector<corpus::Document>& docs, const BuildOptions& options) {
    std::map<std::string, std::size_t> word_counts;
    for (const auto& doc : docs) {
        for (const auto& sentence : doc.sentences) {
            for (auto& w : pre_split(sentence)) {
                ++word_counts[std::move(w)];
            }
        }
    }
    if (word_counts.empty()) {
        throw VocabError("build_vocab: empty corpus");
    }

    std::set<std::string> initial;
    std::set<std::string> continuation;
    struct WordEntry {
        std::vector<std::string> symbols;
        std::size_t count;
    };
    std::vector<WordEntry> words;
    words.reserve(word_counts.size());
    for (const auto& [word, count] : word_counts) {
        auto chars = split_chars(word);
        // Both forms of every character, so any seen word decomposes.
        for (std::size_t k = 0; k < chars.size(); ++k) {
            initial.insert(chars[k]);
            continuation.insert(std::string(kContinuationPrefix) + chars[k]);
            if (k > 0) {
                chars[k].insert(0, kContinuationPrefix);
            }
        }
        words.push_back({std::move(chars), count});
    }
    const std::size_t alphabet = initial.size() + continuation.size();
    if (options.target_size <= static_cast<std::size_t>(kNumSpecialTokens) + alphabet) {
        throw VocabError("build_vocab: target size " + std::to_string(options.target_size) +
                         " must exceed special tokens + alphabet (" +
                         std::to_string(kNumSpecialTokens + alphabet) + ")");
    }

    std::vector<std::string> tokens{std::string(kPadToken), std::string(kUnkToken), std::string(kClsToken),
                                    std::string(kSepToken), std::string(kMaskToken)};
    std::set<std::string> present(tokens.begin(), tokens.end());
    for (const auto& c : initial) {
        if (present.insert(c).second) {
            tokens.push_back(c);
        }
    }
    for (const auto& c : continuation) {
        if (present.insert(c).second) {
            tokens.push_back(c);
        }
    }

    while (tokens.size() < options.target_size) {
        std::map<std::pair<std::string, std::string>, std::size_t> pair_counts;
        for (const auto& entry : words) {
            for (std::size_t k = 0; k + 1 < entry.symbols.size(); ++k) {
                pair_counts[{entry.symbols[k], entry.symbols[k + 1]}] += entry.count;
            }
        }
        // Highest count wins; ties resolve to the lexicographically smallest pair.
        const std::pair<std::string, std::string>* best = nullptr;
        std::size_t best_count = 0;
        for (const auto& [pair, count] : pair_counts) {
            if (count > best_count) {
                best = &pair;
                best_count = count;
            }
        }
        if (best == nullptr || best_count < options.min_frequency) {
            break;
        }
        const std::string left = best->first;
        const std::string right = best->second;
        const std::string merged = left + strip_prefix(right);
        for (auto& entry : words) {
            auto& syms = entry.symbols;
            std::vector<std::string> next;
            next.reserve(syms.size());
            for (std::size_t k = 0; k < syms.size(); ++k) {
                if (k + 1 < syms.size() && syms[k] == left && syms[k + 1] == right) {
                    next.push_back(merged);
                    ++k;
                } else {
                    next.push_back(std::move(syms[k]));
                }
            }
            syms = std::move(next);
        }
        if (present.insert(merged).second) {
            tokens.push_back(merged);
        }
    }
    return Vocabulary::from_tokens(std::move(tokens));
}

std::string format_vocab(const Vocabulary& vocab) {
    std::string out;
    for (const auto& t : vocab.tokens()) {
        out.append(t);
        out.push_back('\n');
    }
    return out;
}

void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path) {
    write_file_bytes(path, format_vocab(vocab));
}

Vocabulary parse_vocab(std::string_view content) {
    std::vector<std::string> tokens;
    std::size_t pos = 0;
    while (pos < content.size()) {
        auto end = content.find('\n', pos);
        if (end == std::string_view::npos) {
            end = content.size();
        }
        std::string_view line = content.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        tokens.emplace_back(line);
        pos = end + 1;
    }
    return Vocabulary::from_tokens(std::move(tokens));
}

Vocabulary load_vocab(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw VocabError("vocabulary file not found: " + path.string());
    }
    return parse_vocab(read_file_bytes(path));
}

} // namespace dapt::wordpiece
