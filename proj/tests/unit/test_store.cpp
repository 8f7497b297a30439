#include <doctest.h>

#include <algorithm>
#include <thread>

#include "robassist/store.hpp"

using namespace rob;

namespace {

const Questionnaire& qn() { return default_questionnaire(); }
const RuleSet& rules() { return default_rule_set(); }

ModelAnswer model(const std::string& qid, Answer a, std::vector<std::size_t> evidence = {7, 2, 4}) {
    ModelAnswer m;
    m.qid = qid;
    m.answer = a;
    m.rationale = "model says " + std::string(answer_label(a)) + " for " + qid;
    m.raw_response = std::string(answer_label(a)) + ". " + m.rationale;
    m.model_id = "stub";
    m.context_mode = ContextMode::top_k(3);
    double score = 0.9;
    for (auto p : evidence) m.evidence.push_back({p, score -= 0.1});
    return m;
}

AssessmentSession fresh() {
    AssessmentSession s;
    s.session_id = "as-test";
    s.doc_id = "fixture-zinc-2019";
    s.annotator_id = "rater-1";
    s.model_id = "stub";
    s.context_mode = ContextMode::top_k(3);
    s.created_at = s.updated_at = "t0";
    return s;
}

// Answers every active question in qid order with `pick(qid)`.
void answer_all(AssessmentSession& s, const std::function<Answer(const std::string&)>& pick) {
    for (const auto& q : qn().questions()) {
        auto* r = s.record(q.qid);
        if (r && r->final_answer) continue;
        record_model_answer(s, qn(), model(q.qid, pick(q.qid)), "t1");
    }
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("model answers fill gated-off questions with NotApplicable") {
    auto s = fresh();
    record_model_answer(s, qn(), model("2.1", Answer::No), "t1");
    CHECK(!s.record("2.3"));  // 2.2 still open
    record_model_answer(s, qn(), model("2.2", Answer::ProbablyNo), "t1");
    for (auto qid : {"2.3", "2.4", "2.5"}) {
        REQUIRE(s.record(qid));
        CHECK(s.record(qid)->final_answer == Answer::NotApplicable);
        CHECK(!s.record(qid)->model_answer);
    }
    CHECK(code_of([&] { record_model_answer(s, qn(), model("2.3", Answer::Yes), "t2"); }) == ErrorCode::Gating);
    CHECK(code_of([&] { record_model_answer(s, qn(), model("2.7", Answer::Yes), "t2"); }) == ErrorCode::Sequencing);
    CHECK(code_of([&] { record_model_answer(s, qn(), model("2.1", Answer::Yes), "t2"); }) == ErrorCode::State);
}

TEST_CASE("override 2.1 from No to Yes reactivates 2.3 as unanswered") {
    auto s = fresh();
    record_model_answer(s, qn(), model("2.1", Answer::No), "t1");
    record_model_answer(s, qn(), model("2.2", Answer::No), "t1");
    REQUIRE(s.record("2.3")->final_answer == Answer::NotApplicable);
    record_override(s, qn(), "2.1", Answer::Yes, std::nullopt, "t2");
    CHECK(s.record("2.1")->final_answer == Answer::Yes);
    CHECK(s.record("2.1")->answer_source == Source::Expert);
    CHECK(s.record("2.1")->model_answer->answer == Answer::No);  // original kept
    CHECK(!s.record("2.3")->final_answer);
    CHECK(!s.record("2.4")->final_answer);  // depends on 2.3, undetermined
    CHECK(is_active(qn().question("2.3"), s.final_answers()));
    // now answerable again
    record_model_answer(s, qn(), model("2.3", Answer::Yes), "t3");
    CHECK(s.record("2.3")->final_answer == Answer::Yes);
}

TEST_CASE("override gating invalidates answered downstream questions") {
    auto s = fresh();
    record_model_answer(s, qn(), model("2.1", Answer::Yes), "t1");
    record_model_answer(s, qn(), model("2.2", Answer::No), "t1");
    record_model_answer(s, qn(), model("2.3", Answer::Yes), "t1");
    record_model_answer(s, qn(), model("2.4", Answer::ProbablyYes), "t1");
    record_model_answer(s, qn(), model("2.5", Answer::No), "t1");
    record_override(s, qn(), "2.1", Answer::No, "Open label trial", "t2");
    for (auto qid : {"2.3", "2.4", "2.5"}) {
        const auto* r = s.record(qid);
        CHECK(r->final_answer == Answer::NotApplicable);
        CHECK(!r->model_answer);
        REQUIRE(r->superseded.size() == 1);  // model original retained
        CHECK(r->superseded[0].qid == qid);
    }
    CHECK(code_of([&] { record_override(s, qn(), "2.4", Answer::Yes, std::nullopt, "t3"); }) == ErrorCode::Gating);
}

TEST_CASE("override answer only keeps the model rationale source") {
    auto s = fresh();
    record_model_answer(s, qn(), model("1.1", Answer::Yes), "t1");
    record_override(s, qn(), "1.1", Answer::ProbablyYes, std::nullopt, "t2");
    const auto* r = s.record("1.1");
    CHECK(r->answer_source == Source::Expert);
    CHECK(r->rationale_source == Source::Model);
    CHECK(r->final_rationale == r->model_rationale());

    record_override(s, qn(), "1.1", Answer::Yes, "Computer generated list.", "t3");
    CHECK(r->answer_source == Source::Model);  // restated the model's answer
    CHECK(r->rationale_source == Source::Expert);
    CHECK(r->model_answer->answer == Answer::Yes);

    edit_rationale(s, "1.1", r->model_rationale(), "t4");
    CHECK(r->rationale_source == Source::Model);
    CHECK(code_of([&] { record_override(s, qn(), "1.1", Answer::NotApplicable, std::nullopt, "t5"); }) ==
          ErrorCode::Argument);
}

TEST_CASE("expert answers without a model answer are expert throughout") {
    auto s = fresh();
    record_override(s, qn(), "1.2", Answer::NoInformation, std::nullopt, "t1");
    CHECK(s.record("1.2")->answer_source == Source::Expert);
    CHECK(s.record("1.2")->rationale_source == Source::Expert);
}

TEST_CASE("votes: latest wins, evidence only") {
    auto s = fresh();
    record_model_answer(s, qn(), model("1.1", Answer::Yes, {7, 2, 4}), "t1");
    record_vote(s, "1.1", 7, VoteDirection::Up, "t2");
    CHECK(s.record("1.1")->votes == std::vector<Vote>{{7, VoteDirection::Up}});
    record_vote(s, "1.1", 7, VoteDirection::Down, "t3");
    record_vote(s, "1.1", 2, VoteDirection::Up, "t3");
    CHECK(s.record("1.1")->votes == std::vector<Vote>{{2, VoteDirection::Up}, {7, VoteDirection::Down}});
    CHECK(code_of([&] { record_vote(s, "1.1", 3, VoteDirection::Up, "t4"); }) == ErrorCode::State);
    CHECK(code_of([&] { record_vote(s, "1.2", 7, VoteDirection::Up, "t4"); }) == ErrorCode::NotFound);
}

TEST_CASE("added paragraphs stay disjoint from evidence") {
    auto s = fresh();
    record_model_answer(s, qn(), model("1.3", Answer::No, {1, 2, 3}), "t1");
    add_paragraph(s, "1.3", 9, "t2");
    add_paragraph(s, "1.3", 5, "t2");
    add_paragraph(s, "1.3", 9, "t2");
    CHECK(s.record("1.3")->added_paragraphs == std::vector<std::size_t>{5, 9});
    CHECK(code_of([&] { add_paragraph(s, "1.3", 2, "t3"); }) == ErrorCode::State);
}

TEST_CASE("complete derives judgments from final answers") {
    auto s = fresh();
    CHECK(code_of([&] { complete_session(s, qn(), rules(), "t"); }) == ErrorCode::State);
    answer_all(s, [](const std::string& qid) { return qid == "1.2" ? Answer::No : Answer::ProbablyYes; });
    complete_session(s, qn(), rules(), "t9");
    CHECK(s.status == SessionStatus::Complete);
    std::size_t present = 0;
    for (const auto& q : qn().questions()) present += s.record(q.qid) && s.record(q.qid)->final_answer ? 1 : 0;
    CHECK(present == 22);
    CHECK(s.domain_judgments == rules().judge(s.final_answers()));
    CHECK(s.overall == overall_judgment(*s.domain_judgments));
    CHECK((*s.domain_judgments)[0] == RiskLevel::High);  // 1.2 = No
    CHECK(code_of([&] { record_override(s, qn(), "1.1", Answer::No, std::nullopt, "t10"); }) == ErrorCode::State);
    CHECK(code_of([&] { record_vote(s, "1.1", 7, VoteDirection::Up, "t10"); }) == ErrorCode::State);
}

TEST_CASE("summary reports finished domains only") {
    auto s = fresh();
    for (auto qid : {"1.1", "1.2", "1.3"}) record_model_answer(s, qn(), model(qid, Answer::Yes), "t");
    auto sum = summarize(s, qn(), rules());
    CHECK(sum.domains[0] == domain_judgment(rules().table(1), s.final_answers()));
    CHECK(!sum.domains[1]);
    CHECK(!sum.overall);
    CHECK(sum.answered == 3);
    CHECK(sum.total == 22);
}

TEST_CASE("export then import is the identity") {
    auto s = fresh();
    answer_all(s, [](const std::string& qid) { return qid[0] == '2' ? Answer::No : Answer::ProbablyYes; });
    record_vote(s, "1.1", 7, VoteDirection::Up, "t5");
    record_vote(s, "1.1", 4, VoteDirection::Down, "t5");
    add_paragraph(s, "1.1", 11, "t5");
    record_override(s, qn(), "2.1", Answer::Yes, "changed", "t6");
    s.records["1.2"].gold_evidence = 3;
    auto text = export_session_text(s);
    auto back = import_session_text(text);
    CHECK(back == s);
    CHECK(export_session_text(back) == text);
    answer_all(s, [](const std::string&) { return Answer::NoInformation; });
    complete_session(s, qn(), rules(), "t7");
    CHECK(import_session_text(export_session_text(s)) == s);
}

TEST_CASE("import rejects truncated input and unknown schema versions") {
    auto text = export_session_text(fresh());
    CHECK(code_of([&] { import_session_text(text.substr(0, text.size() / 2)); }) == ErrorCode::Import);
    auto j = json::parse(text);
    j["schema_version"] = 2;
    CHECK(code_of([&] { import_session(j); }) == ErrorCode::Import);
    j.erase("schema_version");
    CHECK(code_of([&] { import_session(j); }) == ErrorCode::Import);
    auto k = json::parse(text);
    k["records"] = {{"1.1", {{"final_answer", "maybe"}}}};
    CHECK(code_of([&] { import_session(k); }) == ErrorCode::Import);
}

TEST_CASE("manual dataset record imports with expert sources everywhere") {
    auto j = json::parse(R"({
      "schema_version": 1, "session_id": "manual-0001", "doc_id": "trial-0001",
      "annotator_id": "A3", "provenance": "manual", "status": "complete",
      "records": {
        "1.1": {"final_answer": "Y", "final_rationale": "computer generated", "gold_evidence": 4},
        "1.2": {"final_answer": "PY"},
        "1.3": {"final_answer": "N", "answer_source": "model"},
        "2.3": {"final_answer": "NA"}
      },
      "domain_judgments": {"1": "low", "2": "some_concerns", "3": "low", "4": "high", "5": "low"},
      "overall": "high"
    })");
    auto s = import_session(j);
    CHECK(s.provenance == Provenance::Manual);
    for (const auto& [qid, r] : s.records) {
        CHECK(r.answer_source == Source::Expert);
        CHECK(r.rationale_source == Source::Expert);
    }
    CHECK(s.records["1.1"].gold_evidence == 4u);
    CHECK(s.records["1.2"].final_answer == Answer::ProbablyYes);
    CHECK(s.records["2.3"].final_answer == Answer::NotApplicable);
    CHECK((*s.domain_judgments)[3] == RiskLevel::High);
    CHECK(s.overall == RiskLevel::High);
}

TEST_CASE("usage stats of no sessions are all zero") {
    auto st = usage_stats({});
    CHECK(st.total == UsageRow{});
    for (const auto& row : st.domains) CHECK(row == UsageRow{});
    auto j = st.to_json();
    CHECK(j["total"]["predictions"]["model_pct"] == 0.0);
}

TEST_CASE("usage stats reproduce the published per-domain table arithmetic") {
    // Per domain: kept/changed answers, kept/edited rationales, questions
    // with downvotes, upvotes, added paragraphs.
    struct Row { std::size_t am, ae, rm, re, down, up, added; double am_pct, rm_pct; };
    const Row table[5] = {
        {377, 390, 430, 337, 43, 207, 74, 49.2, 56.1},
        {853, 588, 1117, 324, 40, 120, 84, 59.2, 77.5},
        {432, 231, 494, 169, 12, 48, 24, 65.2, 74.5},
        {591, 325, 717, 199, 22, 64, 112, 64.5, 78.3},  // 591/916 = 64.52%
        {368, 396, 485, 279, 18, 41, 62, 48.2, 63.5},
    };
    std::map<std::size_t, AssessmentSession> sessions;
    std::size_t raw_up = 0;
    for (int d = 1; d <= 5; ++d) {
        const auto& row = table[d - 1];
        auto nq = kQuestionsPerDomain[d - 1];
        for (std::size_t i = 0; i < row.am + row.ae; ++i) {
            auto qid = std::to_string(d) + "." + std::to_string(i % nq + 1);
            auto& s = sessions[i / nq];
            auto& r = s.records[qid];
            r.qid = qid;
            r.model_answer = model(qid, Answer::Yes, {0, 1, 2});
            r.final_answer = i < row.am ? Answer::Yes : Answer::No;
            r.answer_source = i < row.am ? Source::Model : Source::Expert;
            r.rationale_source = i < row.rm ? Source::Model : Source::Expert;
            if (i < row.up) {
                r.votes.push_back({0, VoteDirection::Up});
                ++raw_up;
                if (i % 2 == 0) {
                    r.votes.push_back({1, VoteDirection::Up});
                    ++raw_up;
                }
            }
            if (i >= row.am + row.ae - row.down) r.votes.push_back({2, VoteDirection::Down});
            if (i < row.added) r.added_paragraphs = i % 3 == 0 ? std::vector<std::size_t>{5, 6} : std::vector<std::size_t>{5};
        }
    }
    std::vector<AssessmentSession> list;
    for (auto& [k, s] : sessions) list.push_back(s);
    auto st = usage_stats(list);
    for (int d = 0; d < 5; ++d) {
        CAPTURE(d + 1);
        const auto& got = st.domains[d];
        CHECK(got.answers_model == table[d].am);
        CHECK(got.answers_expert == table[d].ae);
        CHECK(got.rationales_model == table[d].rm);
        CHECK(got.rationales_expert == table[d].re);
        CHECK(got.questions_downvoted == table[d].down);
        CHECK(got.questions_upvoted == table[d].up);
        CHECK(got.questions_with_added == table[d].added);
        CHECK(percent(got.answers_model, got.answers_model + got.answers_expert) == table[d].am_pct);
        CHECK(percent(got.rationales_model, got.rationales_model + got.rationales_expert) == table[d].rm_pct);
    }
    CHECK(st.total.answers_model == 2621);
    CHECK(st.total.answers_expert == 1930);
    CHECK(st.total.rationales_model == 3243);
    CHECK(st.total.rationales_expert == 1308);
    CHECK(st.total.questions_upvoted == 480);
    CHECK(st.total.questions_downvoted == 135);
    CHECK(st.total.questions_with_added == 356);
    CHECK(st.total.upvotes == raw_up);
    CHECK(st.total.upvotes > st.total.questions_upvoted);
    auto j = st.to_json();
    CHECK(j["total"]["predictions"]["model_pct"] == 57.6);
    CHECK(j["total"]["predictions"]["expert_pct"] == 42.4);
    CHECK(j["total"]["rationales"]["model_pct"] == 71.3);
    CHECK(j["total"]["rationales"]["expert_pct"] == 28.7);
    CHECK(j["positive_share_questions_pct"] == 78.0);

    UsageRow sum;
    for (const auto& row : st.domains) sum += row;
    CHECK(sum == st.total);
}

TEST_CASE("store journals events and replay reproduces the snapshot") {
    auto journal = std::make_shared<MemoryJournal>();
    FixedClock clock("2025-01-01T00:00:00Z");
    SessionStore store(journal, qn(), rules(), clock);
    auto s = store.create({"doc-1", "rater", Provenance::Assisted, "stub", ContextMode::top_k(3)});
    for (const auto& q : qn().questions()) {
        if (auto cur = store.get(s.session_id); cur.record(q.qid) && cur.record(q.qid)->final_answer) continue;
        store.apply(s.session_id, "model_answer", {{"model_answer", model(q.qid, Answer::No).to_json()}});
    }
    store.apply(s.session_id, "vote", {{"qid", "1.1"}, {"paragraph_index", 7}, {"direction", "up"}});
    store.apply(s.session_id, "override", {{"qid", "2.2"}, {"answer", "yes"}, {"rationale", nullptr}});
    store.apply(s.session_id, "add_paragraph", {{"qid", "1.1"}, {"paragraph_index", 0}});

    // rejected mutation leaves no trace
    auto before = journal->events(s.session_id).size();
    CHECK_THROWS_AS(store.apply(s.session_id, "vote", {{"qid", "1.1"}, {"paragraph_index", 99}, {"direction", "up"}}),
                    Error);
    CHECK(journal->events(s.session_id).size() == before);

    auto events = journal->events(s.session_id);
    CHECK(events.front().event == "create");
    CHECK(replay(events, qn(), rules()) == store.get(s.session_id));
    CHECK(journal->load_snapshots().front() == store.get(s.session_id));
    CHECK(code_of([&] { store.get("nope"); }) == ErrorCode::NotFound);
}

TEST_CASE("file journal persists sessions across store instances") {
    auto root = std::filesystem::temp_directory_path() / "rob_store_test";
    std::filesystem::remove_all(root);
    FixedClock clock("2025-02-02T00:00:00Z");
    std::string id;
    {
        SessionStore store(std::make_shared<FileJournal>(root), qn(), rules(), clock);
        id = store.create({"doc-2", "rater", Provenance::Assisted, std::nullopt, std::nullopt}).session_id;
        store.apply(id, "model_answer", {{"model_answer", model("1.1", Answer::Yes).to_json()}});
    }
    SessionStore reopened(std::make_shared<FileJournal>(root), qn(), rules(), clock);
    REQUIRE(reopened.contains(id));
    CHECK(reopened.get(id).record("1.1")->final_answer == Answer::Yes);
    auto events = reopened.journal().events(id);
    REQUIRE(events.size() == 2);
    CHECK(events[1].ts == "2025-02-02T00:00:00Z");
    CHECK(replay(events, qn(), rules()) == reopened.get(id));
    auto second = reopened.create({"doc-2", "rater", Provenance::Assisted, std::nullopt, std::nullopt});
    CHECK(second.session_id != id);
    std::filesystem::remove_all(root);
}

TEST_CASE("concurrent writers on one session are serialized") {
    FixedClock clock;
    SessionStore store(std::make_shared<MemoryJournal>(), qn(), rules(), clock);
    auto id = store.create({"doc-3", "r", Provenance::Assisted, std::nullopt, std::nullopt}).session_id;
    std::vector<std::string> qids{"1.1", "1.2", "1.3", "3.1", "4.1", "4.2", "5.1", "5.2"};
    for (const auto& q : qids) store.apply(id, "model_answer", {{"model_answer", model(q, Answer::Yes, {0, 1, 2}).to_json()}});
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < qids.size(); ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 20; ++i) {
                store.apply(id, "vote", {{"qid", qids[t]}, {"paragraph_index", i % 3}, {"direction", i % 2 ? "down" : "up"}});
                (void)store.get(id);
            }
        });
    }
    for (auto& th : threads) th.join();
    auto s = store.get(id);
    for (const auto& q : qids) CHECK(s.record(q)->votes.size() == 3);
    CHECK(store.journal().events(id).size() == 1 + qids.size() + qids.size() * 20);
}
