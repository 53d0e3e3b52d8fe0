#pragma once

#include "dapt/corpus.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dapt::wordpiece {

class VocabError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr TokenId kMaskId = 4;
inline constexpr TokenId kNumSpecialTokens = 5;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";

inline constexpr std::string_view kContinuationPrefix = "##";
inline constexpr std::size_t kDefaultMaxWordChars = 100;

/// Immutable token <-> id map. The five special tokens always occupy ids 0-4.
class Vocabulary {
public:
    /// Validates uniqueness, non-empty tokens and the fixed special-token ids.
    static Vocabulary from_tokens(std::vector<std::string> tokens);

    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(TokenId id) const;
    std::optional<TokenId> find(std::string_view token) const;
    bool contains(std::string_view token) const { return find(token).has_value(); }

    static bool is_special(TokenId id) { return id >= 0 && id < kNumSpecialTokens; }

    /// Stable fingerprint of the token list, stored in dataset headers.
    std::uint64_t fingerprint() const;

    std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<TokenId>& ids) const;

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

struct TokenSequence {
    std::vector<std::string> tokens;
    std::vector<TokenId> ids;

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
};

/// Splits on whitespace, then isolates every ASCII punctuation character.
std::vector<std::string> pre_split(std::string_view text);

/// Greedy longest-match-first decomposition of each pre-split word.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab,
                       std::size_t max_word_chars = kDefaultMaxWordChars);

/// Rejoins `##` continuation pieces into words.
std::vector<std::string> join_pieces(const std::vector<std::string>& tokens);

struct BuildOptions {
    std::size_t target_size = 0;
    std::size_t min_frequency = 2;
};

/// Character inventory (both word-initial and `##` forms) followed by
/// merged subwords from frequency-ranked pair merging.
Vocabulary build_vocab(const std::vector<corpus::Document>& docs, const BuildOptions& options);

void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path);
std::string format_vocab(const Vocabulary& vocab);
Vocabulary load_vocab(const std::filesystem::path& path);
Vocabulary parse_vocab(std::string_view content);

} // namespace dapt::wordpiece
