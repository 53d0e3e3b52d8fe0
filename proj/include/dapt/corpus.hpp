#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dapt::corpus {

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RawRecord {
    std::string source_id;
    std::string text;
};

struct Document {
    std::string doc_id;
    std::vector<std::string> sentences;
};

struct CorpusStats {
    std::size_t sentence_count = 0;
    double mean_sentence_length_words = 0.0;
    std::size_t vocabulary_word_count = 0;
    std::size_t total_word_count = 0;
};

/// Reads a UTF-8 CSV with a header row. Quoted fields may contain commas,
/// doubled quotes and newlines. Records are returned in file order and the
/// source id is "row-<n>" with n the 1-based data row number.
std::vector<RawRecord> ingest_csv(const std::filesystem::path& path, std::string_view text_column);

/// Same as ingest_csv over an in-memory buffer; `origin` names the input in errors.
std::vector<RawRecord> parse_csv(std::string_view content, std::string_view text_column,
                                 std::string_view origin = "<memory>");

/// One record per non-blank line.
std::vector<RawRecord> ingest_lines(const std::filesystem::path& path);

/// Punctuation kept by clean_text; everything else that is not an ASCII
/// letter or whitespace is dropped.
bool is_retained_punctuation(char c);
bool is_terminal_punctuation(char c);

/// Strips `<...>` spans, folds accents, lowercases, drops digits and any
/// character outside [a-z], whitespace and the retained punctuation, then
/// collapses whitespace. Total and idempotent.
std::string clean_text(std::string_view raw);

struct SplitResult {
    std::vector<Document> documents;
    std::size_t dropped_records = 0;
};

/// One document per record (after cleaning); sentences end at a run of
/// `.`, `!` or `?` followed by a space or the end of the text.
SplitResult split_documents(const std::vector<RawRecord>& records);

std::vector<std::string> split_sentences(std::string_view cleaned);

/// Whitespace-delimited words.
std::vector<std::string_view> split_words(std::string_view text);

CorpusStats corpus_stats(const std::vector<Document>& docs);

/// Cleaned corpus file: one sentence per line, a blank line between documents.
void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs);
std::string format_corpus(const std::vector<Document>& docs);
std::vector<Document> read_corpus(const std::filesystem::path& path);
std::vector<Document> parse_corpus(std::string_view content);

} // namespace dapt::corpus
