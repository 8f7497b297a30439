#include <doctest.h>

#include "robassist/document.hpp"
#include "robassist/error.hpp"

using namespace rob;

namespace {

std::string fixture(const char* name) { return read_file(std::string(ROB_TEST_DATA) + "/" + name); }

// Reference ingester written directly against the raw JSON: abstract
// paragraphs first, then body paragraphs, whitespace-only entries dropped.
std::vector<std::pair<std::string, std::string>> reference_paragraphs(const json& raw) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const char* key : {"abstract", "body_text"}) {
        for (const auto& p : raw[key]) {
            std::string t = p["text"].get<std::string>();
            auto b = t.find_first_not_of(" \t\r\n");
            if (b == std::string::npos) continue;
            auto e = t.find_last_not_of(" \t\r\n");
            std::string sec = p["section"].get<std::string>();
            out.emplace_back(sec, t.substr(b, e - b + 1));
        }
    }
    return out;
}

}  // namespace

TEST_CASE("two body paragraphs are indexed in order") {
    auto doc = ingest_document(R"({"title":"T","body_text":[{"text":"first","section":"A"},{"text":"second","section":"B"}]})");
    CHECK(doc.title == "T");
    REQUIRE(doc.paragraphs.size() == 2);
    CHECK(doc.paragraphs[0].index == 0);
    CHECK(doc.paragraphs[0].text == "first");
    CHECK(doc.paragraphs[1].index == 1);
    CHECK(doc.paragraphs[1].section_header == "B");
}

TEST_CASE("abstract paragraph is prepended at index 0") {
    auto doc = ingest_document(
        R"({"title":"T","abstract":[{"text":"abs","section":""}],"body_text":[{"text":"b1","section":"M"},{"text":"b2","section":"R"}]})");
    REQUIRE(doc.paragraphs.size() == 3);
    CHECK(doc.paragraphs[0].text == "abs");
    CHECK(doc.paragraphs[0].section_header == "Abstract");
    CHECK(doc.paragraphs[1].text == "b1");
    CHECK(doc.abstract == "abs");
}

TEST_CASE("fixture file matches the reference ingester") {
    auto raw = fixture("fixture_trial.json");
    auto doc = ingest_document(raw);
    auto expected = reference_paragraphs(json::parse(raw));
    REQUIRE(doc.paragraphs.size() == expected.size());
    CHECK(doc.paragraphs.size() == 10);  // 2 abstract + 8 non-empty body
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(doc.paragraphs[i].index == i);
        CHECK(doc.paragraphs[i].text == expected[i].second);
        CHECK(doc.paragraphs[i].section_header == expected[i].first);
    }
    CHECK(doc.doc_id == "fixture-zinc-2019");
    REQUIRE(doc.authors.size() == 3);
    CHECK(doc.authors[0] == "Amina R. Okafor");
    CHECK(doc.authors[1] == "Tomás Ibáñez");  // unicode preserved verbatim
    CHECK(validate_document(doc).empty());
}

TEST_CASE("empty body is an empty-document error") {
    try {
        ingest_document(R"({"title":"T","body_text":[]})");
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyDocument);
    }
    CHECK_THROWS_AS(ingest_document(R"({"title":"T","body_text":[{"text":"  "}]})"), Error);
}

TEST_CASE("malformed JSON is a parse error") {
    try {
        ingest_document(R"({"title": "T", "body_text": [)");
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Parse);
    }
    try {
        ingest_document(R"({"title": "no body"})");
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Parse);
    }
}

TEST_CASE("doc2json nesting under pdf_parse is accepted") {
    auto doc = ingest_document(
        R"({"paper_id":"p1","title":"T","pdf_parse":{"abstract":[{"text":"a","section":"Abstract"}],"body_text":[{"text":"b","section":"S"}]}})");
    CHECK(doc.doc_id == "p1");
    CHECK(doc.paragraphs.size() == 2);
}

TEST_CASE("content-hash id when no identifier is present") {
    std::string raw = R"({"title":"T","body_text":[{"text":"x","section":""}]})";
    auto a = ingest_document(raw);
    auto b = ingest_document(raw);
    CHECK(a.doc_id.rfind("doc-", 0) == 0);
    CHECK(a.doc_id == b.doc_id);
    CHECK(a == b);
    auto c = ingest_document(R"({"title":"T2","body_text":[{"text":"x","section":""}]})");
    CHECK(c.doc_id != a.doc_id);
}

TEST_CASE("validate_document reports violations") {
    TrialDocument doc;
    doc.doc_id = "d";
    doc.paragraphs = {{0, "", "a"}, {1, "", "b"}, {2, "", "c"}};
    CHECK(validate_document(doc).empty());

    doc.paragraphs = {{0, "", "a"}, {2, "", "b"}};
    auto v = validate_document(doc);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("non-contiguous index") != std::string::npos);

    doc.paragraphs = {{0, "", "a"}, {1, "", " "}};
    v = validate_document(doc);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("empty paragraph") != std::string::npos);
}

TEST_CASE("canonical export re-ingests to an equal document") {
    for (const char* f : {"fixture_trial.json", "bm25_fixture.json"}) {
        auto doc = ingest_document(fixture(f));
        auto again = ingest_document(serialize_document(doc));
        CHECK(again == doc);
        CHECK(serialize_document(again) == serialize_document(doc));
    }
}

TEST_CASE("paragraph count equals abstract plus body count") {
    // generated inputs: vary counts, include blank entries that must be dropped
    for (int na = 0; na < 4; ++na)
        for (int nb = 1; nb < 6; ++nb) {
            json raw = {{"title", "T"}, {"abstract", json::array()}, {"body_text", json::array()}};
            for (int i = 0; i < na; ++i) raw["abstract"].push_back({{"text", "a" + std::to_string(i)}, {"section", ""}});
            for (int i = 0; i < nb; ++i) raw["body_text"].push_back({{"text", "b" + std::to_string(i)}, {"section", "S"}});
            raw["body_text"].push_back({{"text", "\n\t"}, {"section", "S"}});
            auto doc = ingest_document(raw.dump());
            CHECK(doc.paragraphs.size() == static_cast<std::size_t>(na + nb));
            CHECK(validate_document(doc).empty());
        }
}
