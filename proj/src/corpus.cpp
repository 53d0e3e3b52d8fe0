#include "dapt/corpus.hpp"

#include "dapt/hashing.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_set>

namespace dapt::corpus {

namespace {

// ---------------------------------------------------------------- CSV

struct CsvRow {
    std::vector<std::string> fields;
    std::size_t row_number = 0;  // 1-based, header is row 1
    std::size_t line_number = 0; // line where the row starts
};

std::string row_context(std::string_view origin, std::size_t row, std::size_t line) {
    std::ostringstream ss;
    ss << origin << ": row " << row << " (line " << line << ")";
    return ss.str();
}

std::vector<CsvRow> parse_csv_rows(std::string_view content, std::string_view origin) {
    if (content.substr(0, 3) == "\xEF\xBB\xBF") {
        content.remove_prefix(3);
    }
    std::vector<CsvRow> rows;
    std::size_t i = 0;
    std::size_t line = 1;
    const std::size_t n = content.size();
    while (i < n) {
        CsvRow row;
        row.row_number = rows.size() + 1;
        row.line_number = line;
        // Blank line: skip.
        if (content[i] == '\n' || (content[i] == '\r' && i + 1 < n && content[i + 1] == '\n')) {
            i += content[i] == '\r' ? 2 : 1;
            ++line;
            continue;
        }
        bool end_of_row = false;
        while (!end_of_row) {
            std::string field;
            if (i < n && content[i] == '"') {
                ++i;
                bool closed = false;
                while (i < n) {
                    const char c = content[i];
                    if (c == '"') {
                        if (i + 1 < n && content[i + 1] == '"') {
                            field.push_back('"');
                            i += 2;
                            continue;
                        }
                        ++i;
                        closed = true;
                        break;
                    }
                    if (c == '\n') {
                        ++line;
                    }
                    field.push_back(c);
                    ++i;
                }
                if (!closed) {
                    throw CorpusError("malformed quoting: unterminated quoted field in " +
                                      row_context(origin, row.row_number, row.line_number));
                }
                if (i < n && content[i] != ',' && content[i] != '\n' && content[i] != '\r') {
                    throw CorpusError("malformed quoting: text after closing quote in " +
                                      row_context(origin, row.row_number, row.line_number));
                }
            } else {
                while (i < n && content[i] != ',' && content[i] != '\n' && content[i] != '\r') {
                    if (content[i] == '"') {
                        throw CorpusError("malformed quoting: stray quote in unquoted field in " +
                                          row_context(origin, row.row_number, row.line_number));
                    }
                    field.push_back(content[i]);
                    ++i;
                }
            }
            row.fields.push_back(std::move(field));
            if (i >= n) {
                end_of_row = true;
            } else if (content[i] == ',') {
                ++i;
            } else {
                if (content[i] == '\r') {
                    ++i;
                }
                if (i < n && content[i] == '\n') {
                    ++i;
                }
                ++line;
                end_of_row = true;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------- UTF-8

// Decodes one code point; returns nullopt for an invalid sequence and
// advances by one byte in that case.
std::optional<char32_t> decode_utf8(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
        ++i;
        return b0;
    } else if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return std::nullopt;
    }
    if (i + static_cast<std::size_t>(len) > s.size()) {
        ++i;
        return std::nullopt;
    }
    for (int k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((b & 0xC0) != 0x80) {
            ++i;
            return std::nullopt;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

// U+00C0..U+00FF, lowercase base letters; empty = not a letter.
constexpr std::string_view kLatin1[64] = {
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i",  "i",
    "d", "n", "o", "o", "o", "o", "o",  "",  "o", "u", "u", "u", "u", "y", "th", "ss",
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i",  "i",
    "d", "n", "o", "o", "o", "o", "o",  "",  "o", "u", "u", "u", "u", "y", "th", "y",
};

// U+0100..U+017F; 'J' stands for "ij" and 'Q' for "oe".
constexpr std::string_view kLatinExtA =
    "aaaaaaccccccccddddeeeeeeeeeegggggggghhhhiiiiiiiiiiJJjjkkkllllllllllnnnnnnnnnooooooQQ"
    "rrrrrrssssssssttttttuuuuuuuuuuuuwwyyyzzzzzzs";

static_assert(kLatinExtA.size() == 128);

// Maps a code point to its folded ASCII replacement. Returns false when the
// character is not a letter or known punctuation (i.e. a special character).
bool fold_code_point(char32_t cp, std::string& out) {
    if (cp >= 0xC0 && cp <= 0xFF) {
        const auto r = kLatin1[cp - 0xC0];
        out.append(r);
        return !r.empty();
    }
    if (cp >= 0x100 && cp <= 0x17F) {
        const char c = kLatinExtA[cp - 0x100];
        if (c == 'J') {
            out.append("ij");
        } else if (c == 'Q') {
            out.append("oe");
        } else {
            out.push_back(c);
        }
        return true;
    }
    switch (cp) {
    case 0x2018:
    case 0x2019:
        out.push_back('\'');
        return true;
    case 0x2010:
    case 0x2011:
    case 0x2012:
    case 0x2013:
    case 0x2014:
        out.push_back('-');
        return true;
    case 0x2026:
        out.push_back('.');
        return true;
    default:
        return false;
    }
}

bool is_combining_mark(char32_t cp) {
    return (cp >= 0x0300 && cp <= 0x036F) || (cp >= 0x1AB0 && cp <= 0x1AFF) ||
           (cp >= 0x1DC0 && cp <= 0x1DFF) || (cp >= 0x20D0 && cp <= 0x20FF) ||
           (cp >= 0xFE20 && cp <= 0xFE2F);
}

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string strip_tags(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        if (raw[i] == '<') {
            const auto close = raw.find('>', i + 1);
            if (close != std::string_view::npos) {
                out.push_back(' ');
                i = close + 1;
                continue;
            }
        }
        out.push_back(raw[i]);
        ++i;
    }
    return out;
}

} // namespace

std::vector<RawRecord> parse_csv(std::string_view content, std::string_view text_column,
                                 std::string_view origin) {
    auto rows = parse_csv_rows(content, origin);
    if (rows.empty()) {
        throw CorpusError(std::string(origin) + ": missing header row");
    }
    const auto& header = rows.front().fields;
    const auto it = std::find(header.begin(), header.end(), text_column);
    if (it == header.end()) {
        throw CorpusError(std::string(origin) + ": missing column '" + std::string(text_column) + "'");
    }
    const auto column = static_cast<std::size_t>(it - header.begin());
    std::vector<RawRecord> records;
    records.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto& row = rows[r];
        if (row.fields.size() != header.size()) {
            std::ostringstream ss;
            ss << "malformed row: " << row.fields.size() << " fields, expected " << header.size()
               << " in " << row_context(origin, row.row_number, row.line_number);
            throw CorpusError(ss.str());
        }
        records.push_back({"row-" + std::to_string(row.row_number), std::move(row.fields[column])});
    }
    return records;
}

std::vector<RawRecord> ingest_csv(const std::filesystem::path& path, std::string_view text_column) {
    if (!std::filesystem::exists(path)) {
        throw CorpusError("input file not found: " + path.string());
    }
    return parse_csv(read_file_bytes(path), text_column, path.string());
}

std::vector<RawRecord> ingest_lines(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw CorpusError("input file not found: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    std::vector<RawRecord> records;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (std::all_of(line.begin(), line.end(), [](char c) { return is_ascii_space(c); })) {
            continue;
        }
        records.push_back({"line-" + std::to_string(number), line});
    }
    return records;
}

bool is_retained_punctuation(char c) {
    switch (c) {
    case '.':
    case '!':
    case '?':
    case ',':
    case ':':
    case ';':
    case '\'':
    case '-':
        return true;
    default:
        return false;
    }
}

bool is_terminal_punctuation(char c) { return c == '.' || c == '!' || c == '?'; }

std::string clean_text(std::string_view raw) {
    const std::string untagged = strip_tags(raw);
    std::string folded;
    folded.reserve(untagged.size());
    std::size_t i = 0;
    while (i < untagged.size()) {
        const auto cp = decode_utf8(untagged, i);
        if (!cp) {
            folded.push_back(' ');
            continue;
        }
        const char32_t c = *cp;
        if (c < 0x80) {
            const auto ch = static_cast<char>(c);
            if (ch >= 'A' && ch <= 'Z') {
                folded.push_back(static_cast<char>(ch - 'A' + 'a'));
            } else if ((ch >= 'a' && ch <= 'z') || is_retained_punctuation(ch)) {
                folded.push_back(ch);
            } else if (ch >= '0' && ch <= '9') {
                // numbers are removed outright
            } else {
                folded.push_back(' ');
            }
        } else if (is_combining_mark(c)) {
            // accents left over from decomposed input
        } else if (c == 0xA0) {
            folded.push_back(' ');
        } else if (!fold_code_point(c, folded)) {
            folded.push_back(' ');
        }
    }
    std::string out;
    out.reserve(folded.size());
    bool pending_space = false;
    for (char ch : folded) {
        if (is_ascii_space(ch)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(ch);
    }
    return out;
}

std::vector<std::string> split_sentences(std::string_view cleaned) {
    std::vector<std::string> sentences;
    std::size_t start = 0;
    std::size_t i = 0;
    const std::size_t n = cleaned.size();
    while (i < n) {
        if (is_terminal_punctuation(cleaned[i])) {
            std::size_t j = i;
            while (j < n && is_terminal_punctuation(cleaned[j])) {
                ++j;
            }
            if (j == n || cleaned[j] == ' ') {
                sentences.emplace_back(cleaned.substr(start, j - start));
                start = j == n ? n : j + 1;
            }
            i = j;
            continue;
        }
        ++i;
    }
    if (start < n) {
        sentences.emplace_back(cleaned.substr(start));
    }
    return sentences;
}

SplitResult split_documents(const std::vector<RawRecord>& records) {
    SplitResult result;
    for (const auto& record : records) {
        const std::string cleaned = clean_text(record.text);
        if (cleaned.empty()) {
            ++result.dropped_records;
            continue;
        }
        result.documents.push_back({record.source_id, split_sentences(cleaned)});
    }
    return result;
}

std::vector<std::string_view> split_words(std::string_view text) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_ascii_space(text[i])) {
            ++i;
        }
        const std::size_t start = i;
        while (i < text.size() && !is_ascii_space(text[i])) {
            ++i;
        }
        if (i > start) {
            words.push_back(text.substr(start, i - start));
        }
    }
    return words;
}

CorpusStats corpus_stats(const std::vector<Document>& docs) {
    CorpusStats stats;
    std::unordered_set<std::string_view> vocabulary;
    for (const auto& doc : docs) {
        for (const auto& sentence : doc.sentences) {
            ++stats.sentence_count;
            for (auto word : split_words(sentence)) {
                ++stats.total_word_count;
                vocabulary.insert(word);
            }
        }
    }
    if (stats.sentence_count == 0) {
        throw CorpusError("corpus_stats: empty corpus");
    }
    stats.vocabulary_word_count = vocabulary.size();
    stats.mean_sentence_length_words =
        static_cast<double>(stats.total_word_count) / static_cast<double>(stats.sentence_count);
    return stats;
}

std::string format_corpus(const std::vector<Document>& docs) {
    std::string out;
    bool first = true;
    for (const auto& doc : docs) {
        if (doc.sentences.empty()) {
            continue;
        }
        if (!first) {
            out.push_back('\n');
        }
        first = false;
        for (const auto& sentence : doc.sentences) {
            out.append(sentence);
            out.push_back('\n');
        }
    }
    return out;
}

void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
    write_file_bytes(path, format_corpus(docs));
}

std::vector<Document> parse_corpus(std::string_view content) {
    std::vector<Document> docs;
    Document current;
    auto flush = [&] {
        if (!current.sentences.empty()) {
            current.doc_id = "doc-" + std::to_string(docs.size() + 1);
            docs.push_back(std::move(current));
            current = Document{};
        }
    };
    std::size_t pos = 0;
    while (pos <= content.size()) {
        auto end = content.find('\n', pos);
        if (end == std::string_view::npos) {
            end = content.size();
        }
        std::string_view line = content.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            flush();
        } else {
            current.sentences.emplace_back(line);
        }
        pos = end + 1;
    }
    flush();
    return docs;
}

std::vector<Document> read_corpus(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw CorpusError("corpus file not found: " + path.string());
    }
    return parse_corpus(read_file_bytes(path));
}

} // namespace dapt::corpus
