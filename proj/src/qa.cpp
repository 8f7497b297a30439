#include "robassist/qa.hpp"

namespace rob {

ordered_json ModelAnswer::to_json() const {
    ordered_json ev = ordered_json::array();
    for (const auto& e : evidence) ev.push_back({{"paragraph_index", e.paragraph_index}, {"score", e.score}});
    return {{"qid", qid},
            {"answer", answer_key(answer)},
            {"rationale", rationale},
            {"raw_response", raw_response},
            {"model_id", model_id},
            {"context_mode", context_mode.to_string()},
            {"evidence", std::move(ev)}};
}

ModelAnswer ModelAnswer::from_json(const json& j) {
    try {
        ModelAnswer m;
        m.qid = j.at("qid").get<std::string>();
        auto a = answer_from_key(j.at("answer").get<std::string>());
        if (!a || *a == Answer::NotApplicable)
            fail(ErrorCode::Schema, "model answer for " + m.qid + " must be one of the five response options");
        m.answer = *a;
        m.rationale = j.value("rationale", "");
        m.raw_response = j.value("raw_response", "");
        m.model_id = j.value("model_id", "");
        m.context_mode = ContextMode::parse(j.value("context_mode", "topk:3"));
        for (const auto& e : j.value("evidence", json::array()))
            m.evidence.push_back({e.at("paragraph_index").get<std::size_t>(), e.value("score", 0.0)});
        return m;
    } catch (const json::exception& e) {
        fail(ErrorCode::Schema, std::string("malformed model answer: ") + e.what());
    }
}

Retriever dense_retriever(const ParagraphIndex& index, const Embedder& embedder) {
    return [&index, &embedder](const SignalingQuestion& q, std::size_t k) {
        return index.query_vector(q.text, k, embedder);
    };
}

Retriever bm25_retriever(const ParagraphIndex& index) {
    return [&index](const SignalingQuestion& q, std::size_t k) { return index.query_bm25(q.text, k); };
}

Retriever sidecar_retriever(const ParagraphIndex& index, const VectorSidecar& sidecar) {
    return [&index, &sidecar](const SignalingQuestion& q, std::size_t k) {
        const Vector* v = sidecar.query(q.qid);
        if (!v) fail(ErrorCode::NotFound, "no query vector for " + q.qid + " in sidecar");
        return index.query_with_vector(*v, k);
    };
}

PreparedPrompt prepare_prompt(const TrialDocument& doc, const SignalingQuestion& q, const Retriever& retriever,
                              const QaOptions& options) {
    PreparedPrompt out;
    std::vector<Passage> passages;
    const auto& mode = options.mode;
    switch (mode.kind) {
        case ContextMode::Kind::Oracle: {
            auto it = options.oracle_evidence.find(q.qid);
            if (it == options.oracle_evidence.end())
                fail(ErrorCode::Argument, "no oracle evidence for " + q.qid);
            if (it->second >= doc.paragraphs.size())
                fail(ErrorCode::Argument, "oracle evidence for " + q.qid + " points past the last paragraph");
            const auto& p = doc.paragraphs[it->second];
            passages.push_back({p.section_header, p.text});
            out.evidence.push_back({it->second, 1.0});
            break;
        }
        case ContextMode::Kind::TopK: {
            for (const auto& r : retriever(q, mode.k)) {
                const auto& p = doc.paragraphs.at(r.paragraph_index);
                passages.push_back({p.section_header, p.text});
                out.evidence.push_back({r.paragraph_index, quantize(r.score)});
            }
            break;
        }
        case ContextMode::Kind::FullPaper:
            for (const auto& p : doc.paragraphs) {
                passages.push_back({p.section_header, p.text});
                out.evidence.push_back({p.index, 0.0});
            }
            break;
    }
    if (options.fewshot) {
        static const std::vector<FewShotExample> none;
        auto it = options.fewshot_examples.find(q.qid);
        const auto& examples = it == options.fewshot_examples.end() ? none : it->second;
        out.text = build_fewshot_prompt(q, mode, passages, examples, options.evaluation_items);
    } else {
        out.text = build_prompt(q, mode, passages);
    }
    check_context_budget(out.text, options.generation);
    return out;
}

ModelAnswer answer_question(const TrialDocument& doc, const SignalingQuestion& q, const Retriever& retriever,
                            LLMClient& llm, const QaOptions& options) {
    auto prepared = prepare_prompt(doc, q, retriever, options);
    for (int attempt = 0;; ++attempt) {
        auto raw = llm.complete(prepared.text, options.generation);
        try {
            auto parsed = parse_answer(raw);
            ModelAnswer m;
            m.qid = q.qid;
            m.answer = parsed.answer;
            m.rationale = std::move(parsed.rationale);
            m.raw_response = std::move(raw);
            m.model_id = options.generation.model.empty() ? llm.model_id() : options.generation.model;
            m.context_mode = options.mode;
            m.evidence = std::move(prepared.evidence);
            return m;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Unparseable || attempt >= options.unparseable_retries) throw;
        }
    }
}

Answer QuestionOutcome::answer() const {
    switch (status) {
        case OutcomeStatus::Answered: return model_answer->answer;
        case OutcomeStatus::NotApplicable: return Answer::NotApplicable;
        case OutcomeStatus::Failed: break;
    }
    fail(ErrorCode::State, qid + " has no answer: " + error);
}

std::string_view outcome_key(OutcomeStatus s) noexcept {
    switch (s) {
        case OutcomeStatus::Answered: return "answered";
        case OutcomeStatus::NotApplicable: return "not_applicable";
        case OutcomeStatus::Failed: return "failed";
    }
    return "failed";
}

ordered_json QuestionOutcome::to_json() const {
    ordered_json j{{"qid", qid}, {"status", outcome_key(status)}};
    if (status == OutcomeStatus::NotApplicable) j["answer"] = answer_key(Answer::NotApplicable);
    if (model_answer) j["model_answer"] = model_answer->to_json();
    if (error_code) {
        j["error_code"] = to_string(*error_code);
        j["error"] = error;
    }
    return j;
}

std::vector<QuestionOutcome> assess_document(const TrialDocument& doc, const Questionnaire& questionnaire,
                                             const Retriever& retriever, LLMClient& llm, const QaOptions& options,
                                             std::span<const QuestionOutcome> resume_from) {
    std::map<std::string, const QuestionOutcome*> previous;
    for (const auto& o : resume_from)
        if (o.status == OutcomeStatus::Answered) previous[o.qid] = &o;

    std::vector<QuestionOutcome> out;
    AnswerMap answers;
    for (const auto& q : questionnaire.questions()) {
        QuestionOutcome o;
        o.qid = q.qid;
        if (q.gate) {
            std::string missing;
            for (const auto& c : q.gate->antecedents)
                if (!answers.contains(c.qid)) missing += (missing.empty() ? "" : ", ") + c.qid;
            if (!missing.empty()) {
                o.error_code = ErrorCode::Sequencing;
                o.error = "blocked: antecedent " + missing + " unanswered";
                out.push_back(std::move(o));
                continue;
            }
            if (!is_active(q, answers)) {
                o.status = OutcomeStatus::NotApplicable;
                answers[q.qid] = Answer::NotApplicable;
                out.push_back(std::move(o));
                continue;
            }
        }
        if (auto it = previous.find(q.qid); it != previous.end()) {
            o = *it->second;
        } else {
            try {
                o.model_answer = answer_question(doc, q, retriever, llm, options);
                o.status = OutcomeStatus::Answered;
            } catch (const Error& e) {
                o.error_code = e.code();
                o.error = e.what();
            } catch (const std::exception& e) {
                o.error_code = ErrorCode::Upstream;
                o.error = e.what();
            }
        }
        if (o.status == OutcomeStatus::Answered) answers[q.qid] = o.model_answer->answer;
        out.push_back(std::move(o));
    }
    return out;
}

AnswerMap outcome_answers(std::span<const QuestionOutcome> outcomes) {
    AnswerMap m;
    for (const auto& o : outcomes)
        if (o.status != OutcomeStatus::Failed) m[o.qid] = o.answer();
    return m;
}

}  // namespace rob
