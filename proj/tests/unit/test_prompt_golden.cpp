#include <doctest.h>

#include "robassist/document.hpp"
#include "robassist/qa.hpp"
#include "robassist/util.hpp"

using namespace rob;
namespace fs = std::filesystem;

// Expected prompts come from tests/golden/generate.py, a separate renderer
// of the published template over the fixture trial.

namespace {

const fs::path kPrompts = fs::path(ROB_GOLDEN_DIR) / "prompts";

struct Fixture {
    TrialDocument doc = ingest_document(read_file(fs::path(ROB_TEST_DATA) / "fixture_trial.json"));
    HashEmbedder emb{64};
    ParagraphIndex index = build_index(doc, emb);
    Retriever bm25 = bm25_retriever(index);
};

std::size_t oracle_index(const SignalingQuestion& q, std::size_t n) {
    auto [d, m] = *parse_qid(q.qid);
    return static_cast<std::size_t>(d + m) % n;
}

std::vector<FewShotExample> examples(const SignalingQuestion& q, const TrialDocument& doc) {
    const std::size_t n = doc.paragraphs.size();
    const auto d = static_cast<std::size_t>(q.domain);
    const Answer answers[3] = {Answer::Yes, Answer::No, Answer::NoInformation};
    std::vector<FewShotExample> out;
    for (std::size_t j = 0; j < 3; ++j)
        out.push_back({"example-doc", q.qid, q.text, doc.paragraphs[(d + j) % n].text, answers[j]});
    return out;
}

void check_prompt(const std::string& mode_dir, const SignalingQuestion& q, const std::string& actual) {
    auto expected = read_file(kPrompts / mode_dir / (q.qid + ".txt"));
    INFO(mode_dir, "/", q.qid);
    CHECK(actual == expected);
}

}  // namespace

TEST_CASE("prompts match the rendered template for every question and mode") {
    Fixture f;
    const auto& qn = default_questionnaire();
    REQUIRE(qn.questions().size() == 22);
    for (const auto& q : qn.questions()) {
        QaOptions o;
        o.mode = ContextMode::oracle();
        o.oracle_evidence[q.qid] = oracle_index(q, f.doc.paragraphs.size());
        check_prompt("oracle", q, prepare_prompt(f.doc, q, f.bm25, o).text);

        for (std::size_t k : {1u, 3u, 5u}) {
            QaOptions t;
            t.mode = ContextMode::top_k(k);
            check_prompt("topk" + std::to_string(k), q, prepare_prompt(f.doc, q, f.bm25, t).text);
        }

        QaOptions full;
        full.mode = ContextMode::full_paper();
        check_prompt("full", q, prepare_prompt(f.doc, q, f.bm25, full).text);

        QaOptions fs;
        fs.mode = ContextMode::top_k(3);
        fs.fewshot = true;
        fs.fewshot_examples[q.qid] = examples(q, f.doc);
        check_prompt("fewshot", q, prepare_prompt(f.doc, q, f.bm25, fs).text);
    }
}

TEST_CASE("few-shot prompts drop the elaboration and end each example with its label") {
    Fixture f;
    const auto& q = default_questionnaire().question("1.1");
    QaOptions o;
    o.mode = ContextMode::top_k(3);
    o.fewshot = true;
    o.fewshot_examples[q.qid] = examples(q, f.doc);
    auto text = prepare_prompt(f.doc, q, f.bm25, o).text;
    CHECK(text.find("Elaboration:") == std::string::npos);
    CHECK(text.find("Answer:yes\n") != std::string::npos);
    CHECK(text.find("Answer:no information\n") != std::string::npos);
}
