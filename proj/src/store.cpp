#include "robassist/store.hpp"

#include <algorithm>
#include <cmath>

#include "robassist/error.hpp"

namespace rob {

std::string_view source_key(Source s) noexcept { return s == Source::Model ? "model" : "expert"; }
std::string_view vote_key(VoteDirection v) noexcept { return v == VoteDirection::Up ? "up" : "down"; }
std::string_view provenance_key(Provenance p) noexcept { return p == Provenance::Manual ? "manual" : "assisted"; }
std::string_view status_key(SessionStatus s) noexcept {
    return s == SessionStatus::Complete ? "complete" : "in_progress";
}

const std::string& QuestionRecord::model_rationale() const {
    static const std::string empty;
    return model_answer ? model_answer->rationale : empty;
}

bool QuestionRecord::shown_as_evidence(std::size_t paragraph) const {
    if (!model_answer) return false;
    return std::any_of(model_answer->evidence.begin(), model_answer->evidence.end(),
                       [&](const EvidenceItem& e) { return e.paragraph_index == paragraph; });
}

AnswerMap AssessmentSession::final_answers() const {
    AnswerMap m;
    for (const auto& [qid, r] : records)
        if (r.final_answer) m[qid] = *r.final_answer;
    return m;
}

const QuestionRecord* AssessmentSession::record(const std::string& qid) const {
    auto it = records.find(qid);
    return it == records.end() ? nullptr : &it->second;
}

namespace {

void require_in_progress(const AssessmentSession& s) {
    if (s.status != SessionStatus::InProgress)
        fail(ErrorCode::State, "session " + s.session_id + " is complete");
}

QuestionRecord& touch(AssessmentSession& s, const std::string& qid, const std::string& ts) {
    auto [it, inserted] = s.records.try_emplace(qid);
    if (inserted) {
        it->second.qid = qid;
        it->second.created_at = ts;
    }
    it->second.updated_at = ts;
    return it->second;
}

QuestionRecord& existing(AssessmentSession& s, const std::string& qid) {
    auto it = s.records.find(qid);
    if (it == s.records.end()) fail(ErrorCode::NotFound, "no record for question " + qid);
    return it->second;
}

void invalidate(QuestionRecord& r, const std::string& ts) {
    if (r.model_answer) {
        r.superseded.push_back(std::move(*r.model_answer));
        r.model_answer.reset();
    }
    r.final_answer.reset();
    r.final_rationale.clear();
    r.answer_source = Source::Model;
    r.rationale_source = Source::Model;
    r.updated_at = ts;
}

// Active-state check used by the mutating operations.
void require_active(const AssessmentSession& s, const SignalingQuestion& q) {
    if (!q.gate) return;
    auto finals = s.final_answers();
    for (const auto& c : q.gate->antecedents)
        if (!finals.contains(c.qid))
            fail(ErrorCode::Sequencing, q.qid + " depends on unanswered " + c.qid);
    if (!is_active(q, finals)) fail(ErrorCode::Gating, q.qid + " is gated off by earlier answers");
}

}  // namespace

void refresh_gating(AssessmentSession& s, const Questionnaire& qn, const std::string& ts) {
    AnswerMap finals;
    for (const auto& q : qn.questions()) {
        auto it = s.records.find(q.qid);
        QuestionRecord* rec = it == s.records.end() ? nullptr : &it->second;
        if (!q.gate) {
            if (rec && rec->final_answer) finals[q.qid] = *rec->final_answer;
            continue;
        }
        bool determinable = std::all_of(q.gate->antecedents.begin(), q.gate->antecedents.end(),
                                        [&](const GateCondition& c) { return finals.contains(c.qid); });
        if (!determinable) {
            if (rec && rec->final_answer) invalidate(*rec, ts);
            continue;
        }
        if (!is_active(q, finals)) {
            if (!rec || rec->final_answer != Answer::NotApplicable) {
                auto& r = touch(s, q.qid, ts);
                invalidate(r, ts);
                r.final_answer = Answer::NotApplicable;
            }
            finals[q.qid] = Answer::NotApplicable;
        } else if (rec && rec->final_answer == Answer::NotApplicable) {
            invalidate(*rec, ts);
        } else if (rec && rec->final_answer) {
            finals[q.qid] = *rec->final_answer;
        }
    }
}

void record_model_answer(AssessmentSession& s, const Questionnaire& qn, const ModelAnswer& answer,
                         const std::string& ts) {
    require_in_progress(s);
    const auto& q = qn.question(answer.qid);
    if (answer.answer == Answer::NotApplicable)
        fail(ErrorCode::Argument, "model answers are one of the five response options");
    require_active(s, q);
    if (auto* r = s.record(q.qid); r && r->final_answer)
        fail(ErrorCode::State, q.qid + " is already answered; override it instead");
    auto& r = touch(s, q.qid, ts);
    if (r.model_answer) r.superseded.push_back(std::move(*r.model_answer));
    r.model_answer = answer;
    r.final_answer = answer.answer;
    r.final_rationale = answer.rationale;
    r.answer_source = Source::Model;
    r.rationale_source = Source::Model;
    refresh_gating(s, qn, ts);
}

void record_override(AssessmentSession& s, const Questionnaire& qn, const std::string& qid, Answer answer,
                     const std::optional<std::string>& rationale, const std::string& ts) {
    require_in_progress(s);
    const auto& q = qn.question(qid);
    if (answer == Answer::NotApplicable)
        fail(ErrorCode::Argument, "not_applicable is assigned by gating, not by override");
    require_active(s, q);
    auto& r = touch(s, qid, ts);
    r.final_answer = answer;
    // restating the model's own answer keeps it model-originated
    r.answer_source = r.model_answer && r.model_answer->answer == answer ? Source::Model : Source::Expert;
    if (rationale) {
        r.final_rationale = *rationale;
        r.rationale_source =
            r.model_answer && r.model_answer->rationale == *rationale ? Source::Model : Source::Expert;
    } else if (!r.model_answer) {
        r.rationale_source = Source::Expert;
    }
    refresh_gating(s, qn, ts);
}

void edit_rationale(AssessmentSession& s, const std::string& qid, const std::string& rationale,
                    const std::string& ts) {
    require_in_progress(s);
    auto& r = existing(s, qid);
    if (!r.final_answer) fail(ErrorCode::State, qid + " is unanswered");
    if (*r.final_answer == Answer::NotApplicable) fail(ErrorCode::Gating, qid + " is gated off");
    r.final_rationale = rationale;
    r.rationale_source = r.model_answer && r.model_answer->rationale == rationale ? Source::Model : Source::Expert;
    r.updated_at = ts;
}

void record_vote(AssessmentSession& s, const std::string& qid, std::size_t paragraph, VoteDirection dir,
                 const std::string& ts) {
    require_in_progress(s);
    auto& r = existing(s, qid);
    if (!r.shown_as_evidence(paragraph))
        fail(ErrorCode::State, "paragraph " + std::to_string(paragraph) + " was not shown as evidence for " + qid);
    auto it = std::lower_bound(r.votes.begin(), r.votes.end(), paragraph,
                               [](const Vote& v, std::size_t p) { return v.paragraph_index < p; });
    if (it != r.votes.end() && it->paragraph_index == paragraph)
        it->direction = dir;
    else
        r.votes.insert(it, Vote{paragraph, dir});
    r.updated_at = ts;
}

void add_paragraph(AssessmentSession& s, const std::string& qid, std::size_t paragraph, const std::string& ts) {
    require_in_progress(s);
    auto& r = existing(s, qid);
    if (r.shown_as_evidence(paragraph))
        fail(ErrorCode::State, "paragraph " + std::to_string(paragraph) + " is already evidence for " + qid);
    auto it = std::lower_bound(r.added_paragraphs.begin(), r.added_paragraphs.end(), paragraph);
    if (it == r.added_paragraphs.end() || *it != paragraph) r.added_paragraphs.insert(it, paragraph);
    r.updated_at = ts;
}

void complete_session(AssessmentSession& s, const Questionnaire& qn, const RuleSet& rules, const std::string& ts) {
    require_in_progress(s);
    refresh_gating(s, qn, ts);
    std::string missing;
    for (const auto& q : qn.questions()) {
        auto* r = s.record(q.qid);
        if (!r || !r->final_answer) missing += (missing.empty() ? "" : ", ") + q.qid;
    }
    if (!missing.empty()) fail(ErrorCode::State, "cannot complete; unanswered: " + missing);
    auto levels = rules.judge(s.final_answers());
    s.domain_judgments = levels;
    s.overall = overall_judgment(levels);
    s.status = SessionStatus::Complete;
    s.updated_at = ts;
}

ordered_json SessionSummary::to_json() const {
    ordered_json d = ordered_json::object();
    for (int i = 0; i < kDomainCount; ++i) {
        auto key = std::to_string(i + 1);
        if (domains[i])
            d[key] = risk_key(*domains[i]);
        else
            d[key] = nullptr;
    }
    ordered_json j{{"domains", std::move(d)}};
    j["overall"] = overall ? ordered_json(risk_key(*overall)) : ordered_json(nullptr);
    j["answered"] = answered;
    j["total"] = total;
    return j;
}

SessionSummary summarize(const AssessmentSession& s, const Questionnaire& qn, const RuleSet& rules) {
    SessionSummary out;
    auto finals = s.final_answers();
    out.total = qn.questions().size();
    DomainLevels levels{};
    bool all = true;
    for (int d = 1; d <= kDomainCount; ++d) {
        auto qs = qn.domain_questions(d);
        bool done = std::all_of(qs.begin(), qs.end(), [&](const SignalingQuestion* q) { return finals.contains(q->qid); });
        for (auto* q : qs) out.answered += finals.contains(q->qid) ? 1 : 0;
        if (done) {
            levels[d - 1] = domain_judgment(rules.table(d), finals);
            out.domains[d - 1] = levels[d - 1];
        } else {
            all = false;
        }
    }
    if (all) out.overall = overall_judgment(levels);
    return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

ordered_json opt_string(const std::optional<std::string>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json record_to_json(const QuestionRecord& r) {
    ordered_json j;
    j["final_answer"] = r.final_answer ? ordered_json(answer_key(*r.final_answer)) : ordered_json(nullptr);
    j["final_rationale"] = r.final_rationale;
    j["answer_source"] = source_key(r.answer_source);
    j["rationale_source"] = source_key(r.rationale_source);
    j["model_answer"] = r.model_answer ? r.model_answer->to_json() : ordered_json(nullptr);
    j["model_rationale"] = r.model_rationale();
    ordered_json sup = ordered_json::array();
    for (const auto& m : r.superseded) sup.push_back(m.to_json());
    j["superseded_model_answers"] = std::move(sup);
    ordered_json votes = ordered_json::array();
    for (const auto& v : r.votes) votes.push_back({{"paragraph_index", v.paragraph_index}, {"direction", vote_key(v.direction)}});
    j["votes"] = std::move(votes);
    j["added_paragraphs"] = r.added_paragraphs;
    j["gold_evidence"] = r.gold_evidence ? ordered_json(*r.gold_evidence) : ordered_json(nullptr);
    j["created_at"] = r.created_at;
    j["updated_at"] = r.updated_at;
    return j;
}

Source source_from(const json& j, const char* key) {
    auto v = j.value(key, std::string("model"));
    if (v == "model") return Source::Model;
    if (v == "expert") return Source::Expert;
    fail(ErrorCode::Import, std::string("bad ") + key + ": " + v);
}

QuestionRecord record_from_json(const std::string& qid, const json& j) {
    QuestionRecord r;
    r.qid = qid;
    if (!parse_qid(qid)) fail(ErrorCode::Import, "bad question id in records: " + qid);
    if (j.contains("final_answer") && !j["final_answer"].is_null()) {
        auto a = answer_from_text(j["final_answer"].get<std::string>());
        if (!a) fail(ErrorCode::Import, "unknown answer for " + qid + ": " + j["final_answer"].dump());
        r.final_answer = *a;
    }
    r.final_rationale = j.value("final_rationale", "");
    r.answer_source = source_from(j, "answer_source");
    r.rationale_source = source_from(j, "rationale_source");
    if (j.contains("model_answer") && !j["model_answer"].is_null()) r.model_answer = ModelAnswer::from_json(j["model_answer"]);
    for (const auto& m : j.value("superseded_model_answers", json::array())) r.superseded.push_back(ModelAnswer::from_json(m));
    for (const auto& v : j.value("votes", json::array())) {
        auto dir = v.at("direction").get<std::string>();
        if (dir != "up" && dir != "down") fail(ErrorCode::Import, "bad vote direction: " + dir);
        Vote vote{v.at("paragraph_index").get<std::size_t>(), dir == "up" ? VoteDirection::Up : VoteDirection::Down};
        auto it = std::lower_bound(r.votes.begin(), r.votes.end(), vote.paragraph_index,
                                   [](const Vote& a, std::size_t p) { return a.paragraph_index < p; });
        if (it != r.votes.end() && it->paragraph_index == vote.paragraph_index)
            *it = vote;
        else
            r.votes.insert(it, vote);
    }
    r.added_paragraphs = j.value("added_paragraphs", std::vector<std::size_t>{});
    std::sort(r.added_paragraphs.begin(), r.added_paragraphs.end());
    r.added_paragraphs.erase(std::unique(r.added_paragraphs.begin(), r.added_paragraphs.end()), r.added_paragraphs.end());
    if (j.contains("gold_evidence") && !j["gold_evidence"].is_null()) r.gold_evidence = j["gold_evidence"].get<std::size_t>();
    r.created_at = j.value("created_at", "");
    r.updated_at = j.value("updated_at", "");
    return r;
}

}  // namespace

ordered_json export_session(const AssessmentSession& s) {
    ordered_json j;
    j["schema_version"] = s.schema_version;
    j["session_id"] = s.session_id;
    j["doc_id"] = s.doc_id;
    j["annotator_id"] = s.annotator_id;
    j["provenance"] = provenance_key(s.provenance);
    j["model_id"] = opt_string(s.model_id);
    j["context_mode"] = s.context_mode ? ordered_json(s.context_mode->to_string()) : ordered_json(nullptr);
    j["status"] = status_key(s.status);
    ordered_json recs = ordered_json::object();
    for (const auto& [qid, r] : s.records) recs[qid] = record_to_json(r);
    j["records"] = std::move(recs);
    if (s.domain_judgments) {
        ordered_json d = ordered_json::object();
        for (int i = 0; i < kDomainCount; ++i) d[std::to_string(i + 1)] = risk_key((*s.domain_judgments)[i]);
        j["domain_judgments"] = std::move(d);
    } else {
        j["domain_judgments"] = nullptr;
    }
    j["overall"] = s.overall ? ordered_json(risk_key(*s.overall)) : ordered_json(nullptr);
    j["created_at"] = s.created_at;
    j["updated_at"] = s.updated_at;
    return j;
}

std::string export_session_text(const AssessmentSession& s) { return export_session(s).dump(2) + "\n"; }

AssessmentSession import_session(const json& j) {
    try {
        if (!j.is_object()) fail(ErrorCode::Import, "session must be a JSON object");
        if (!j.contains("schema_version")) fail(ErrorCode::Import, "session has no schema_version");
        auto version = j["schema_version"].get<int>();
        if (version != kSessionSchemaVersion)
            fail(ErrorCode::Import, "unsupported session schema version " + std::to_string(version));
        AssessmentSession s;
        s.session_id = j.at("session_id").get<std::string>();
        s.doc_id = j.at("doc_id").get<std::string>();
        s.annotator_id = j.value("annotator_id", "");
        auto prov = j.value("provenance", std::string("assisted"));
        if (prov == "manual")
            s.provenance = Provenance::Manual;
        else if (prov == "assisted")
            s.provenance = Provenance::Assisted;
        else
            fail(ErrorCode::Import, "unknown provenance " + prov);
        if (j.contains("model_id") && !j["model_id"].is_null()) s.model_id = j["model_id"].get<std::string>();
        if (j.contains("context_mode") && !j["context_mode"].is_null())
            s.context_mode = ContextMode::parse(j["context_mode"].get<std::string>());
        auto status = j.value("status", std::string("in_progress"));
        if (status == "complete")
            s.status = SessionStatus::Complete;
        else if (status == "in_progress")
            s.status = SessionStatus::InProgress;
        else
            fail(ErrorCode::Import, "unknown status " + status);
        const json records = j.value("records", json::object());
        for (const auto& [qid, r] : records.items()) s.records[qid] = record_from_json(qid, r);
        if (j.contains("domain_judgments") && !j["domain_judgments"].is_null()) {
            DomainLevels levels{};
            const auto& d = j["domain_judgments"];
            for (int i = 0; i < kDomainCount; ++i) {
                auto key = std::to_string(i + 1);
                if (!d.contains(key)) fail(ErrorCode::Import, "domain_judgments lacks domain " + key);
                auto r = risk_from_text(d[key].get<std::string>());
                if (!r) fail(ErrorCode::Import, "unknown risk level " + d[key].dump());
                levels[i] = *r;
            }
            s.domain_judgments = levels;
        }
        if (j.contains("overall") && !j["overall"].is_null()) {
            auto r = risk_from_text(j["overall"].get<std::string>());
            if (!r) fail(ErrorCode::Import, "unknown overall risk " + j["overall"].dump());
            s.overall = *r;
        }
        s.created_at = j.value("created_at", "");
        s.updated_at = j.value("updated_at", "");
        if (s.provenance == Provenance::Manual) {
            for (auto& [qid, r] : s.records) {
                r.answer_source = Source::Expert;
                r.rationale_source = Source::Expert;
            }
        }
        return s;
    } catch (const json::exception& e) {
        fail(ErrorCode::Import, std::string("malformed session: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Import) throw;
        fail(ErrorCode::Import, std::string("invalid session: ") + e.what());
    }
}

AssessmentSession import_session_text(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::Import, std::string("session is not valid JSON: ") + e.what());
    }
    return import_session(j);
}

// ---------------------------------------------------------------------------
// usage statistics

UsageRow& UsageRow::operator+=(const UsageRow& o) {
    answers_model += o.answers_model;
    answers_expert += o.answers_expert;
    rationales_model += o.rationales_model;
    rationales_expert += o.rationales_expert;
    questions_upvoted += o.questions_upvoted;
    questions_downvoted += o.questions_downvoted;
    questions_with_added += o.questions_with_added;
    upvotes += o.upvotes;
    downvotes += o.downvotes;
    added_paragraphs += o.added_paragraphs;
    return *this;
}

double percent(std::size_t part, std::size_t whole) {
    if (whole == 0) return 0.0;
    return std::round(1000.0 * static_cast<double>(part) / static_cast<double>(whole)) / 10.0;
}

UsageStats usage_stats(std::span<const AssessmentSession> sessions) {
    UsageStats st;
    st.sessions = sessions.size();
    for (const auto& s : sessions) {
        for (const auto& [qid, r] : s.records) {
            auto parsed = parse_qid(qid);
            if (!parsed || parsed->first < 1 || parsed->first > kDomainCount) continue;
            auto& row = st.domains[parsed->first - 1];
            if (r.model_answer && r.final_answer) {
                (r.answer_source == Source::Model ? row.answers_model : row.answers_expert)++;
                (r.rationale_source == Source::Model ? row.rationales_model : row.rationales_expert)++;
                st.shown_passages += r.model_answer->evidence.size();
            }
            std::size_t up = 0, down = 0;
            for (const auto& v : r.votes) (v.direction == VoteDirection::Up ? up : down)++;
            row.upvotes += up;
            row.downvotes += down;
            row.questions_upvoted += up > 0 ? 1 : 0;
            row.questions_downvoted += down > 0 ? 1 : 0;
            row.added_paragraphs += r.added_paragraphs.size();
            row.questions_with_added += r.added_paragraphs.empty() ? 0 : 1;
        }
    }
    for (const auto& row : st.domains) st.total += row;
    return st;
}

namespace {

ordered_json usage_row_json(const UsageRow& r) {
    auto pair = [](std::size_t model, std::size_t expert) {
        return ordered_json{{"model", model},
                            {"model_pct", percent(model, model + expert)},
                            {"expert", expert},
                            {"expert_pct", percent(expert, model + expert)}};
    };
    return {{"predictions", pair(r.answers_model, r.answers_expert)},
            {"rationales", pair(r.rationales_model, r.rationales_expert)},
            {"feedback_questions",
             {{"downvotes", r.questions_downvoted}, {"upvotes", r.questions_upvoted}, {"added_paragraphs", r.questions_with_added}}},
            {"feedback_raw", {{"downvotes", r.downvotes}, {"upvotes", r.upvotes}, {"added_paragraphs", r.added_paragraphs}}}};
}

}  // namespace

ordered_json UsageStats::to_json() const {
    ordered_json doms = ordered_json::array();
    for (int i = 0; i < kDomainCount; ++i) {
        auto row = usage_row_json(domains[i]);
        row["domain"] = i + 1;
        doms.push_back(std::move(row));
    }
    ordered_json j{{"sessions", sessions}, {"domains", std::move(doms)}, {"total", usage_row_json(total)}};
    j["positive_share_questions_pct"] =
        percent(total.questions_upvoted, total.questions_upvoted + total.questions_downvoted);
    j["positive_share_votes_pct"] = percent(total.upvotes, total.upvotes + total.downvotes);
    j["shown_passages"] = shown_passages;
    return j;
}

// ---------------------------------------------------------------------------
// events and journals

ordered_json SessionEvent::to_json() const {
    return {{"ts", ts}, {"session_id", session_id}, {"event", event}, {"payload", payload}};
}

SessionEvent SessionEvent::from_json(const json& j) {
    try {
        return {j.at("ts").get<std::string>(), j.at("session_id").get<std::string>(), j.at("event").get<std::string>(),
                ordered_json::parse(j.at("payload").dump())};
    } catch (const json::exception& e) {
        fail(ErrorCode::Import, std::string("malformed event: ") + e.what());
    }
}

namespace {

VoteDirection direction_from(const std::string& s) {
    if (s == "up") return VoteDirection::Up;
    if (s == "down") return VoteDirection::Down;
    fail(ErrorCode::Argument, "vote direction must be up or down, got " + s);
}

Answer answer_arg(const json& j) {
    auto text = j.get<std::string>();
    auto a = answer_from_text(text);
    if (!a) fail(ErrorCode::Argument, "unknown answer: " + text);
    return *a;
}

}  // namespace

void apply_event(AssessmentSession& s, const SessionEvent& e, const Questionnaire& qn, const RuleSet& rules) {
    const auto& p = e.payload;
    try {
        if (e.event == "create" || e.event == "import") {
            s = import_session(p);
        } else if (e.event == "model_answer") {
            record_model_answer(s, qn, ModelAnswer::from_json(p.at("model_answer")), e.ts);
        } else if (e.event == "override") {
            std::optional<std::string> rationale;
            if (p.contains("rationale") && !p["rationale"].is_null()) rationale = p["rationale"].get<std::string>();
            record_override(s, qn, p.at("qid").get<std::string>(), answer_arg(p.at("answer")), rationale, e.ts);
        } else if (e.event == "rationale") {
            edit_rationale(s, p.at("qid").get<std::string>(), p.at("rationale").get<std::string>(), e.ts);
        } else if (e.event == "vote") {
            record_vote(s, p.at("qid").get<std::string>(), p.at("paragraph_index").get<std::size_t>(),
                        direction_from(p.at("direction").get<std::string>()), e.ts);
        } else if (e.event == "add_paragraph") {
            add_paragraph(s, p.at("qid").get<std::string>(), p.at("paragraph_index").get<std::size_t>(), e.ts);
        } else if (e.event == "refresh_gating") {
            refresh_gating(s, qn, e.ts);
        } else if (e.event == "complete") {
            complete_session(s, qn, rules, e.ts);
        } else {
            fail(ErrorCode::Argument, "unknown event " + e.event);
        }
    } catch (const json::exception& ex) {
        fail(ErrorCode::Argument, "bad " + e.event + " payload: " + ex.what());
    }
    if (e.event != "import") s.updated_at = e.ts;
}

AssessmentSession replay(std::span<const SessionEvent> events, const Questionnaire& qn, const RuleSet& rules) {
    AssessmentSession s;
    for (const auto& e : events) apply_event(s, e, qn, rules);
    return s;
}

void MemoryJournal::append(const SessionEvent& e) {
    std::lock_guard lock(mu_);
    events_[e.session_id].push_back(e);
}

void MemoryJournal::write_snapshot(const AssessmentSession& s) {
    std::lock_guard lock(mu_);
    snapshots_[s.session_id] = export_session_text(s);
}

std::vector<AssessmentSession> MemoryJournal::load_snapshots() const {
    std::lock_guard lock(mu_);
    std::vector<AssessmentSession> out;
    for (const auto& [id, text] : snapshots_) out.push_back(import_session_text(text));
    return out;
}

std::vector<SessionEvent> MemoryJournal::events(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    auto it = events_.find(session_id);
    return it == events_.end() ? std::vector<SessionEvent>{} : it->second;
}

FileJournal::FileJournal(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) fail(ErrorCode::Io, "cannot create session directory " + root_.string() + ": " + ec.message());
}

void FileJournal::append(const SessionEvent& e) { append_line(root_ / e.session_id / "events.jsonl", e.to_json().dump()); }

void FileJournal::write_snapshot(const AssessmentSession& s) {
    auto dir = root_ / s.session_id;
    auto tmp = dir / "session.json.tmp";
    write_file(tmp, export_session_text(s));
    std::error_code ec;
    std::filesystem::rename(tmp, dir / "session.json", ec);
    if (ec) fail(ErrorCode::Io, "cannot publish snapshot for " + s.session_id + ": " + ec.message());
}

std::vector<AssessmentSession> FileJournal::load_snapshots() const {
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root_))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "session.json")) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<AssessmentSession> out;
    for (const auto& d : dirs) out.push_back(import_session_text(read_file(d / "session.json")));
    return out;
}

std::vector<SessionEvent> FileJournal::events(const std::string& session_id) const {
    std::vector<SessionEvent> out;
    auto path = root_ / session_id / "events.jsonl";
    if (!std::filesystem::exists(path)) return out;
    auto text = read_file(path);
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        if (end > start) out.push_back(SessionEvent::from_json(parse_json(text.substr(start, end - start), "event log")));
        start = end + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// store

SessionStore::SessionStore(std::shared_ptr<SessionJournal> journal, const Questionnaire& qn, const RuleSet& rules,
                           const Clock& clock)
    : journal_(std::move(journal)), qn_(qn), rules_(rules), clock_(clock) {
    for (auto& s : journal_->load_snapshots()) {
        auto e = std::make_unique<Entry>();
        auto id = s.session_id;
        e->snapshot = std::make_shared<const AssessmentSession>(std::move(s));
        entries_.emplace(id, std::move(e));
    }
    created_ = entries_.size();
}

SessionStore::Entry& SessionStore::entry(const std::string& id) const {
    std::shared_lock lock(map_mu_);
    auto it = entries_.find(id);
    if (it == entries_.end()) fail(ErrorCode::NotFound, "unknown session " + id);
    return *it->second;
}

AssessmentSession SessionStore::commit(Entry& e, const std::string& session_id, const std::string& event,
                                       ordered_json payload) {
    SessionEvent ev{clock_.now(), session_id, event, std::move(payload)};
    AssessmentSession next;
    {
        std::lock_guard lock(e.snap_mu);
        if (e.snapshot) next = *e.snapshot;
    }
    apply_event(next, ev, qn_, rules_);
    journal_->append(ev);
    journal_->write_snapshot(next);
    auto published = std::make_shared<const AssessmentSession>(next);
    {
        std::lock_guard lock(e.snap_mu);
        e.snapshot = std::move(published);
    }
    return next;
}

AssessmentSession SessionStore::create(const SessionHeader& h) {
    if (h.doc_id.empty()) fail(ErrorCode::Argument, "session needs a doc_id");
    auto ts = clock_.now();
    AssessmentSession s;
    s.doc_id = h.doc_id;
    s.annotator_id = h.annotator_id;
    s.provenance = h.provenance;
    s.model_id = h.model_id;
    s.context_mode = h.context_mode;
    s.created_at = ts;
    s.updated_at = ts;
    Entry* e = nullptr;
    {
        std::unique_lock lock(map_mu_);
        for (std::size_t salt = created_;; ++salt) {
            auto id = "as-" + sha256_hex(h.doc_id + "\n" + h.annotator_id + "\n" + ts + "\n" + std::to_string(salt)).substr(0, 16);
            if (!entries_.contains(id)) {
                s.session_id = id;
                break;
            }
        }
        ++created_;
        auto owned = std::make_unique<Entry>();
        e = owned.get();
        entries_.emplace(s.session_id, std::move(owned));
    }
    std::lock_guard writer(e->writer);
    try {
        return commit(*e, s.session_id, "create", export_session(s));
    } catch (...) {
        std::unique_lock lock(map_mu_);
        entries_.erase(s.session_id);
        throw;
    }
}

AssessmentSession SessionStore::import(AssessmentSession session) {
    if (session.session_id.empty()) fail(ErrorCode::Import, "imported session needs a session_id");
    Entry* e = nullptr;
    {
        std::unique_lock lock(map_mu_);
        if (entries_.contains(session.session_id))
            fail(ErrorCode::State, "session " + session.session_id + " already exists");
        auto owned = std::make_unique<Entry>();
        e = owned.get();
        entries_.emplace(session.session_id, std::move(owned));
        ++created_;
    }
    std::lock_guard writer(e->writer);
    auto id = session.session_id;
    try {
        return commit(*e, id, "import", export_session(session));
    } catch (...) {
        std::unique_lock lock(map_mu_);
        entries_.erase(id);
        throw;
    }
}

AssessmentSession SessionStore::get(const std::string& session_id) const {
    auto& e = entry(session_id);
    std::lock_guard lock(e.snap_mu);
    if (!e.snapshot) fail(ErrorCode::NotFound, "unknown session " + session_id);
    return *e.snapshot;
}

bool SessionStore::contains(const std::string& session_id) const {
    std::shared_lock lock(map_mu_);
    return entries_.contains(session_id);
}

std::vector<std::string> SessionStore::ids() const {
    std::shared_lock lock(map_mu_);
    std::vector<std::string> out;
    for (const auto& [id, e] : entries_) out.push_back(id);
    return out;
}

std::vector<AssessmentSession> SessionStore::all() const {
    std::vector<AssessmentSession> out;
    for (const auto& id : ids()) out.push_back(get(id));
    return out;
}

AssessmentSession SessionStore::apply(const std::string& session_id, const std::string& event, ordered_json payload) {
    auto& e = entry(session_id);
    std::lock_guard writer(e.writer);
    return commit(e, session_id, event, std::move(payload));
}

std::unique_lock<std::mutex> SessionStore::lock_session(const std::string& session_id) const {
    return std::unique_lock<std::mutex>(entry(session_id).writer);
}

AssessmentSession SessionStore::apply_locked(const std::string& session_id, const std::string& event,
                                             ordered_json payload) {
    return commit(entry(session_id), session_id, event, std::move(payload));
}

}  // namespace rob
