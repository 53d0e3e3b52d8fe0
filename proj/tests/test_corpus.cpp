#include "doctest.h"

#include "dapt/corpus.hpp"
#include "dapt/hashing.hpp"

#include <filesystem>
#include <set>
#include <sstream>

using namespace dapt::corpus;

TEST_CASE("csv: rows in order, quoted commas and newlines") {
    const auto recs = parse_csv("id,text\n1,first row\n2,\"a, b\"\n3,\"multi\nline \"\"q\"\"\"\n", "text");
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].text == "first row");
    CHECK(recs[1].text == "a, b");
    CHECK(recs[2].text == "multi\nline \"q\"");
    CHECK(recs[0].source_id != recs[1].source_id);
}

TEST_CASE("csv: first column, header only, missing column") {
    CHECK(parse_csv("text,other\n\"a, b\",x\n", "text").at(0).text == "a, b");
    CHECK(parse_csv("text\n", "text").empty());
    CHECK_THROWS_AS(parse_csv("id,body\n1,x\n", "text"), CorpusError);
}

TEST_CASE("csv: malformed quoting names the row") {
    try {
        parse_csv("id,text\n1,ok\n2,\"unterminated\n", "text");
        FAIL("expected an error");
    } catch (const CorpusError& e) {
        CHECK(std::string(e.what()).find("row") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_csv("id,text\n1,\"closed\"junk\n", "text"), CorpusError);
}

TEST_CASE("csv and lines: missing file") {
    CHECK_THROWS_AS(ingest_csv("/nonexistent/input.csv", "text"), CorpusError);
    CHECK_THROWS_AS(ingest_lines("/nonexistent/input.txt"), CorpusError);
}

TEST_CASE("clean_text examples") {
    CHECK(clean_text("<p>Hello World 123!</p>") == "hello world !");
    CHECK(clean_text("already clean text") == "already clean text");
    CHECK(clean_text("Caf\xC3\xA9") == "cafe");
    CHECK(clean_text("Cafe\xCC\x81") == "cafe"); // combining acute
    CHECK(clean_text("  many \t spaces\n\nhere ") == "many spaces here");
    CHECK(clean_text("don't stop-here; ok: fine, yes? no.") == "don't stop-here; ok: fine, yes? no.");
    CHECK(clean_text("") == "");
    CHECK(clean_text("12345") == "");
    CHECK(clean_text("a<b>c") == "a c");
}

TEST_CASE("clean_text is idempotent and emits only allowed characters") {
    const char* inputs[] = {"<div class=\"x\">Über   Straße 42</div>", "ÀÉÎÕÜ çñ", "A&B #tag @user 3.14",
                            "<<nested>> tags > < here", "Tab\tNew\nLine\r\n", "mixed UPPER lower",
                            "emoji \xF0\x9F\x98\x80 text", "x = y + z * 2 / 3", "...!!!???", ""};
    for (const char* in : inputs) {
        const std::string once = clean_text(in);
        CHECK(clean_text(once) == once);
        for (char c : once) {
            const bool ok = (c >= 'a' && c <= 'z') || c == ' ' || is_retained_punctuation(c);
            CHECK_MESSAGE(ok, "unexpected character in '" << once << "'");
        }
        CHECK(once.find("  ") == std::string::npos);
        if (!once.empty()) {
            CHECK(once.front() != ' ');
            CHECK(once.back() != ' ');
        }
    }
}

TEST_CASE("split_documents examples") {
    const auto split = split_documents({{"r1", "a b. c d."}, {"r2", "one sentence"}, {"r3", "1234 <br>"}});
    REQUIRE(split.documents.size() == 2);
    CHECK(split.dropped_records == 1);
    CHECK(split.documents[0].sentences == std::vector<std::string>{"a b.", "c d."});
    CHECK(split.documents[1].sentences == std::vector<std::string>{"one sentence"});
}

TEST_CASE("split_documents: joining sentences recovers the cleaned text") {
    const std::vector<RawRecord> recs = {{"a", "Hello there! How are you? Fine... thanks. 3.5 is a number"},
                                         {"b", "e.g. this is tricky. ok"},
                                         {"c", "Why?! Because."}};
    const auto split = split_documents(recs);
    REQUIRE(split.documents.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        std::string joined;
        for (const auto& s : split.documents[i].sentences) {
            CHECK(!s.empty());
            joined += (joined.empty() ? "" : " ") + s;
        }
        CHECK(joined == clean_text(recs[i].text));
    }
}

TEST_CASE("corpus_stats examples and brute-force recount") {
    const std::vector<Document> docs = {{"d1", {"a b", "c d e f"}}};
    const auto s = corpus_stats(docs);
    CHECK(s.sentence_count == 2);
    CHECK(s.mean_sentence_length_words == doctest::Approx(3.0));
    CHECK(s.vocabulary_word_count == 6);

    const auto rep = corpus_stats({{"d", {"a a a"}}});
    CHECK(rep.sentence_count == 1);
    CHECK(rep.mean_sentence_length_words == doctest::Approx(3.0));
    CHECK(rep.vocabulary_word_count == 1);

    CHECK_THROWS_AS(corpus_stats({}), CorpusError);

    const std::vector<Document> more = {{"x", {"the cat sat", "on the mat ."}}, {"y", {"the end"}}};
    std::size_t words = 0, sentences = 0;
    std::set<std::string> distinct;
    for (const auto& d : more) {
        for (const auto& sent : d.sentences) {
            ++sentences;
            std::istringstream in(sent);
            std::string w;
            while (in >> w) {
                ++words;
                distinct.insert(w);
            }
        }
    }
    const auto ms = corpus_stats(more);
    CHECK(ms.sentence_count == sentences);
    CHECK(ms.total_word_count == words);
    CHECK(ms.vocabulary_word_count == distinct.size());
    CHECK(ms.mean_sentence_length_words == doctest::Approx(double(words) / double(sentences)));
    CHECK(ms.vocabulary_word_count <= ms.total_word_count);
}

TEST_CASE("corpus file round trip") {
    const std::vector<Document> docs = {{"doc-1", {"first one.", "second one."}}, {"doc-2", {"only"}}};
    const std::string text = format_corpus(docs);
    CHECK(text == "first one.\nsecond one.\n\nonly\n");
    const auto back = parse_corpus(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].sentences == docs[0].sentences);
    CHECK(back[1].sentences == docs[1].sentences);

    const auto path = std::filesystem::temp_directory_path() / "dapt_test_corpus.txt";
    write_corpus(path, docs);
    CHECK(read_corpus(path).size() == 2);
    std::filesystem::remove(path);
}

TEST_CASE("plain lines ingestion skips blanks") {
    const auto path = std::filesystem::temp_directory_path() / "dapt_test_lines.txt";
    dapt::write_file_bytes(path, "first line\n\n  \nsecond line\n");
    const auto recs = ingest_lines(path);
    REQUIRE(recs.size() == 2);
    CHECK(recs[1].text == "second line");
    std::filesystem::remove(path);
}
