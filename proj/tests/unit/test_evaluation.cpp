#include <doctest.h>

#include <atomic>
#include <random>

#include "robassist/benchmark.hpp"
#include "robassist/dataset.hpp"
#include "robassist/error.hpp"

using namespace rob;
namespace fs = std::filesystem;

namespace {

const Questionnaire& qn() { return default_questionnaire(); }
const RuleSet& rules() { return default_rule_set(); }

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("rob-eval-" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// p0 is unrelated, p1..p3 restate questions 1.1, 1.2 and 2.1.
std::string document_json(const std::string& id, bool extra) {
    json body = json::array();
    body.push_back({{"text", "Cats sleep most of the day in warm places."}, {"section", "Background"}});
    for (const char* qid : {"1.1", "1.2", "2.1"})
        body.push_back({{"text", qn().question(qid).text}, {"section", "Methods"}});
    if (extra) body.push_back({{"text", "Dogs bark at passing cyclists."}, {"section", "Discussion"}});
    return json{{"paper_id", id}, {"title", "Trial " + id}, {"abstract", json::array()}, {"body_text", body}}.dump();
}

const std::map<std::string, std::size_t> kEvidence = {{"1.1", 1}, {"1.2", 2}, {"2.1", 3}, {"1.3", 0}};

AssessmentSession session(const std::string& id, const std::string& doc, const std::string& annotator,
                          Provenance prov, const AnswerMap& overrides = {}) {
    AnswerMap raw;
    for (const auto& q : qn().questions()) raw[q.qid] = Answer::Yes;
    for (const auto& [k, v] : overrides) raw[k] = v;
    auto answers = apply_gating(qn(), raw);
    AssessmentSession s;
    s.session_id = id;
    s.doc_id = doc;
    s.annotator_id = annotator;
    s.provenance = prov;
    s.created_at = s.updated_at = "t0";
    for (const auto& [qid, a] : answers) {
        QuestionRecord r;
        r.qid = qid;
        r.final_answer = a;
        r.answer_source = r.rationale_source = Source::Expert;
        if (auto e = kEvidence.find(qid); e != kEvidence.end()) r.gold_evidence = e->second;
        r.created_at = r.updated_at = "t0";
        s.records[qid] = r;
    }
    s.domain_judgments = rules().judge(answers);
    s.overall = overall_judgment(*s.domain_judgments);
    s.status = SessionStatus::Complete;
    return s;
}

// Two manual sessions (doc-1, doc-2), one assisted; optionally a second
// annotator on doc-1 who differs on 1.2 and 5.1.
fs::path write_dataset(const fs::path& root, bool dual) {
    fs::create_directories(root / "documents");
    fs::create_directories(root / "assessments");
    write_file(root / "documents" / "doc-1.json", document_json("doc-1", false));
    write_file(root / "documents" / "doc-2.json", document_json("doc-2", true));
    ordered_json all = ordered_json::array();
    all.push_back(export_session(session("as-01", "doc-1", "ann-a", Provenance::Manual)));
    all.push_back(export_session(session("as-02", "doc-2", "ann-a", Provenance::Manual)));
    write_file(root / "assessments" / "manual.json", all.dump(2));
    auto assisted = session("as-03", "doc-2", "ann-c", Provenance::Assisted);
    write_file(root / "assessments" / "assisted.jsonl", export_session(assisted).dump() + "\n");
    if (dual) {
        auto b = session("as-04", "doc-1", "ann-b", Provenance::Manual,
                         {{"1.2", Answer::No}, {"5.1", Answer::NoInformation}});
        write_file(root / "assessments" / "second.json", export_session_text(b));
    }
    return root;
}

// Answers every question with the gold label of that qid (shared by all
// sessions of the single-annotator dataset).
std::string echo_gold(const std::string& prompt) {
    auto at = prompt.rfind("Question: \"");
    auto end = prompt.find("\"\n", at);
    auto text = prompt.substr(at + 11, end - at - 11);
    AnswerMap raw;
    for (const auto& q : qn().questions()) raw[q.qid] = Answer::Yes;
    for (const auto& q : qn().questions())
        if (q.text == text) return std::string(answer_label(apply_gating(qn(), raw).at(q.qid))) + ". As reported.";
    return "no match";
}

BenchmarkOptions opts(ContextMode mode, std::size_t jobs = 1) {
    BenchmarkOptions o;
    o.mode = mode;
    o.jobs = jobs;
    return o;
}

}  // namespace

TEST_CASE("missing dataset gives an actionable not-found error") {
    TempDir t;
    try {
        load_dataset(t.path / "nowhere");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotFound);
        CHECK(std::string(e.what()).find("ROB_DATASET_DIR") != std::string::npos);
        CHECK(std::string(e.what()).find("documents/") != std::string::npos);
    }
}

TEST_CASE("dataset loads documents and sessions in id order") {
    TempDir t;
    auto ds = load_dataset(write_dataset(t.path, true));
    CHECK(ds.documents.size() == 2);
    REQUIRE(ds.sessions.size() == 4);
    CHECK(ds.sessions[0].session_id == "as-01");
    CHECK(ds.sessions[3].session_id == "as-04");
    CHECK(ds.with_provenance(Provenance::Manual).size() == 3);
    CHECK(!ds.sidecar);

    write_file(t.path / "assessments" / "broken.json", "{\"schema_version\": 1");
    try {
        load_dataset(t.path);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("broken.json") != std::string::npos);
    }
}

TEST_CASE("gold items skip NotApplicable answers and assisted sessions") {
    TempDir t;
    auto ds = load_dataset(write_dataset(t.path, false));
    auto items = gold_items(ds, qn());
    // All-Yes sessions gate off 2.7, 3.2-3.4 and 4.3-4.5: 15 items each.
    CHECK(items.size() == 30);
    auto c = gold_counts(items);
    CHECK(c.total == std::array<std::size_t, 5>{6, 12, 2, 4, 6});
    CHECK(c.oracle == std::array<std::size_t, 5>{6, 2, 0, 0, 0});
    CHECK(c.to_json()["n_total"]["all"] == 30);
}

TEST_CASE("echoing the gold label scores 1.0 in every mode") {
    TempDir t;
    auto ds = load_dataset(write_dataset(t.path, false));
    for (auto mode : {ContextMode::oracle(), ContextMode::top_k(1), ContextMode::top_k(3), ContextMode::full_paper()}) {
        CAPTURE(mode.to_string());
        FunctionClient llm(echo_gold);
        auto res = run_benchmark(ds, qn(), llm, opts(mode), FixedClock());
        auto f = f1_scores(res.run.items);
        CHECK(f.micro == 1.0);
        CHECK(f.macro == 1.0);
        CHECK(f.coverage() == 1.0);
        CHECK(res.run.items.size() == (mode.kind == ContextMode::Kind::Oracle ? 8u : 30u));
        CHECK(res.llm_calls + res.cache_hits == res.run.items.size());
    }
}

TEST_CASE("benchmark output does not depend on the job count") {
    TempDir t;
    auto ds = load_dataset(write_dataset(t.path, false));
    FunctionClient llm([](const std::string& p) { return HashStubClient().complete(p, {}); }, "stub-hash");
    FixedClock clock;
    auto one = run_benchmark(ds, qn(), llm, opts(ContextMode::top_k(3), 1), clock);
    auto four = run_benchmark(ds, qn(), llm, opts(ContextMode::top_k(3), 4), clock);
    CHECK(run_to_json(one.run).dump() == run_to_json(four.run).dump());
    CHECK(one.report().dump() == four.report().dump());
}

TEST_CASE("cached responses are re-scored without calling the model") {
    TempDir t;
    auto ds = load_dataset(write_dataset(t.path, false));
    auto o = opts(ContextMode::full_paper());
    o.cache_path = t.path / "cache.jsonl";
    FunctionClient llm([](const std::string& p) { return HashStubClient().complete(p, {}); }, "stub-hash");
    auto first = run_benchmark(ds, qn(), llm, o, FixedClock());
    CHECK(first.llm_calls == 30);  // doc-2 has an extra paragraph, so no prompt repeats

    FunctionClient broken([](const std::string&) -> std::string { fail(ErrorCode::Upstream, "offline"); },
                          "stub-hash");
    auto second = run_benchmark(ds, qn(), broken, o, FixedClock());
    CHECK(second.llm_calls == 0);
    CHECK(second.cache_hits == 30);
    CHECK(run_to_json(first.run).dump() == run_to_json(second.run).dump());

    auto line = json::parse(read_file(o.cache_path).substr(0, read_file(o.cache_path).find('\n')));
    for (const char* k : {"doc_id", "qid", "gold", "pred", "raw_response_digest"}) CHECK(line.contains(k));
}

TEST_CASE("failures lower coverage and are kept per question") {
    TempDir t;
    auto ds = load_dataset(write_dataset(t.path, false));
    std::atomic<int> calls{0};
    FunctionClient llm([&](const std::string& p) -> std::string {
        ++calls;
        if (p.find(qn().question("1.1").text + "\"") != std::string::npos) fail(ErrorCode::Upstream, "timeout");
        if (p.find(qn().question("1.2").text + "\"") != std::string::npos) return "I cannot tell.";
        return echo_gold(p);
    });
    auto res = run_benchmark(ds, qn(), llm, opts(ContextMode::oracle()), FixedClock());
    // 8 oracle items, identical prompts on both documents: 1.1 fails twice,
    // 1.2 twice with one retry each, 1.3 and 2.1 are answered once and
    // reused for the second document.
    CHECK(calls.load() == 8);
    CHECK(res.cache_hits == 2);
    auto f = f1_scores(res.run.items);
    CHECK(f.scored == 4);
    CHECK(f.coverage() == doctest::Approx(0.5));
    CHECK(f.micro == 1.0);
    std::size_t upstream = 0, unparseable = 0;
    for (const auto& r : res.records) {
        upstream += r.error_code == ErrorCode::Upstream;
        unparseable += r.error_code == ErrorCode::Unparseable;
    }
    CHECK(upstream == 2);
    CHECK(unparseable == 2);

    FunctionClient down([](const std::string&) -> std::string { fail(ErrorCode::Upstream, "down"); });
    auto none = run_benchmark(ds, qn(), down, opts(ContextMode::oracle()), FixedClock());
    CHECK(none.report()["scores"].is_null());
    std::vector<BenchmarkRun> runs{none.run};
    CHECK(table2_csv(runs).find("stub-function,oracle,,,,,,,,,0.0000,0,8\n") != std::string::npos);
}

TEST_CASE("few-shot examples are removed from the evaluation set") {
    TempDir t;
    auto ds = load_dataset(write_dataset(t.path, false));
    auto o = opts(ContextMode::top_k(3));
    o.fewshot = true;
    o.seed = 7;
    FunctionClient llm(echo_gold);
    auto res = run_benchmark(ds, qn(), llm, o, FixedClock());
    // Only Y/PY carries evidence: one example each for 1.1, 1.2, 1.3, 2.1.
    CHECK(res.fewshot_pool.size() == 4);
    CHECK(res.run.items.size() == 26);
    for (const auto& r : res.records) {
        CHECK(!r.error_code);
        CHECK(std::find(res.fewshot_pool.begin(), res.fewshot_pool.end(), ItemKey{r.doc_id, r.qid}) ==
              res.fewshot_pool.end());
    }
    auto again = run_benchmark(ds, qn(), llm, o, FixedClock());
    CHECK(again.fewshot_pool == res.fewshot_pool);
    auto ex = sample_fewshot(ds, qn(), gold_items(ds, qn()), 7);
    REQUIRE(ex.at("1.1").size() == 1);
    CHECK(ex.at("1.1")[0].passage == qn().question("1.1").text);
    CHECK(ex.at("1.1")[0].answer == Answer::Yes);
}

TEST_CASE("run files round-trip and feed the table reports") {
    BenchmarkRun run;
    run.model_id = "m1";
    run.mode = ContextMode::top_k(3);
    run.items = {{"d", "1.1", Class3::YPY, Class3::YPY},
                 {"d", "2.1", Class3::NPN, Class3::NI},
                 {"d", "5.1", Class3::NI, std::nullopt}};
    auto back = run_from_json(json::parse(run_to_json(run).dump()));
    CHECK(back.items.size() == 3);
    CHECK(back.items[1].pred == Class3::NI);
    CHECK(!back.items[2].pred);
    CHECK(back.mode == run.mode);

    auto full = run;
    full.mode = ContextMode::full_paper();
    full.items[1].pred = Class3::NPN;
    std::vector<BenchmarkRun> runs{run, full};
    auto csv = table2_csv(runs);
    CHECK(csv.find("m1,topk:3,1.0000,0.0000,,,,0.5000,") != std::string::npos);
    CHECK(csv.find("m1,full,1.0000,1.0000,,,,1.0000,1.0000,1.0000,0.6667,2,3\n") != std::string::npos);

    auto sev = severity_report(runs, "model");
    REQUIRE(sev.size() == 1);
    CHECK(sev[0]["modes"].size() == 2);
    // N/PN row: TP 0 in one run, 1 in the other; FN towards NI 1 then 0.
    CHECK(sev[0]["rows"][1]["tp"] == 0.5);
    CHECK(sev[0]["rows"][1]["fn_class1"] == 0.5);
    CHECK(severity_report(runs, "run").size() == 2);
    CHECK(severity_csv(runs, "model").find("m1,topk:3;full,N/PN,0.5,0.0,0.0,0.5,0.0\n") != std::string::npos);
    CHECK_THROWS_AS(severity_report(runs, "week"), Error);
}

TEST_CASE("stored judgment tables and consistency diagnostic") {
    TempDir t;
    write_dataset(t.path, true);
    auto tampered = session("as-05", "doc-2", "ann-d", Provenance::Assisted);
    auto stored = (*tampered.domain_judgments)[0];
    (*tampered.domain_judgments)[0] = stored == RiskLevel::High ? RiskLevel::Low : RiskLevel::High;
    write_file(t.path / "assessments" / "tampered.json", export_session_text(tampered));
    auto ds = load_dataset(t.path);

    auto dist = judgment_distribution(ds.sessions);
    CHECK(dist.sessions == 5);
    std::size_t overall = dist.overall[0] + dist.overall[1] + dist.overall[2];
    CHECK(overall == 5);
    for (const auto& d : dist.domains) CHECK(d[0] + d[1] + d[2] == 5);

    auto rep = consistency_report(ds.sessions, qn(), rules());
    CHECK(rep.checked == std::array<std::size_t, 5>{5, 5, 5, 5, 5});
    CHECK(rep.mismatched == std::array<std::size_t, 5>{1, 0, 0, 0, 0});
    REQUIRE(rep.mismatches.size() == 1);
    CHECK(rep.mismatches[0].session_id == "as-05");
    CHECK(rep.mismatches[0].derived == stored);
}

TEST_CASE("dual annotations pair the first two annotators per paper") {
    TempDir t;
    auto ds = load_dataset(write_dataset(t.path, true));
    auto dual = dual_annotations(ds.sessions, qn());
    CHECK(dual.doc_ids == std::vector<std::string>{"doc-1"});
    CHECK(dual.a.size() == 22);
    // 20 of 22 agree; marginals Y 15/13, N 0/1, NI 0/1, NA 7/7:
    // (440 - 244) / (484 - 244)
    CHECK(cohens_kappa_4class(dual.a, dual.b) == doctest::Approx(196.0 / 240).epsilon(1e-12));
    CHECK(dual.to_json()["papers"] == 1);
}

TEST_CASE("retrieval recall over annotator evidence") {
    TempDir t;
    write_dataset(t.path, true);
    // One-hot paragraph vectors, query vectors pointing at the evidence.
    VectorSidecar sc;
    sc.set_model("onehot", 5);
    auto onehot = [](std::size_t i) {
        Vector v(5, 0.0f);
        v[i] = 1.0f;
        return v;
    };
    for (const char* d : {"doc-1", "doc-2"})
        for (std::size_t i = 0; i < (std::string(d) == "doc-1" ? 4u : 5u); ++i) sc.set_paragraph(d, i, onehot(i));
    for (const auto& [qid, p] : kEvidence) sc.set_query(qid, onehot(p));
    write_file(t.path / "vectors.json", sc.to_json().dump());
    auto ds = load_dataset(t.path);

    const std::vector<std::size_t> ks{1, 3, 10};
    auto bm = eval_retrieval(ds, qn(), "bm25", ks);
    CHECK(bm.questions == 12);  // 3 manual sessions x 4 evidence-bearing questions
    CHECK(bm.documents == 2);
    // The restated questions rank first; p0 shares no term with 1.3 and
    // lands behind every paragraph that does.
    CHECK(bm.recall[0] == doctest::Approx(0.75));
    CHECK(bm.recall[2] == doctest::Approx(1.0));

    auto side = eval_retrieval(ds, qn(), "sidecar", ks, nullptr, {}, 3);
    CHECK(side.recall[0] == doctest::Approx(1.0));
    CHECK(side.retriever == "sidecar:onehot");

    HashEmbedder emb(64);
    auto dense = eval_retrieval(ds, qn(), "dense", ks, &emb);
    CHECK(dense.recall[2] == doctest::Approx(1.0));
    CHECK_THROWS_AS(eval_retrieval(ds, qn(), "dense", ks), Error);
    CHECK_THROWS_AS(eval_retrieval(ds, qn(), "tfidf", ks), Error);
}
