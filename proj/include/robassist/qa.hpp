#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robassist/document.hpp"
#include "robassist/error.hpp"
#include "robassist/llm.hpp"
#include "robassist/prompt.hpp"
#include "robassist/questionnaire.hpp"
#include "robassist/retrieval.hpp"

namespace rob {

struct EvidenceItem {
    std::size_t paragraph_index = 0;
    double score = 0.0;  // quantized when retrieved, so JSON round-trips exactly
    bool operator==(const EvidenceItem&) const = default;
};

struct ModelAnswer {
    std::string qid;
    Answer answer = Answer::NoInformation;  // never NotApplicable
    std::string rationale;
    std::string raw_response;
    std::string model_id;
    ContextMode context_mode;
    std::vector<EvidenceItem> evidence;

    ordered_json to_json() const;
    static ModelAnswer from_json(const json& j);
    bool operator==(const ModelAnswer&) const = default;
};

// Ranks a document's paragraphs for one question.
using Retriever = std::function<std::vector<RetrievalResult>(const SignalingQuestion&, std::size_t k)>;

Retriever dense_retriever(const ParagraphIndex& index, const Embedder& embedder);
Retriever bm25_retriever(const ParagraphIndex& index);
// Query vectors come from the sidecar, keyed by qid.
Retriever sidecar_retriever(const ParagraphIndex& index, const VectorSidecar& sidecar);

struct QaOptions {
    ContextMode mode = ContextMode::top_k(3);
    GenerationConfig generation;
    std::map<std::string, std::size_t> oracle_evidence;  // qid -> gold paragraph (Oracle mode)
    bool fewshot = false;
    std::map<std::string, std::vector<FewShotExample>> fewshot_examples;  // qid -> examples
    std::vector<ItemKey> evaluation_items;                               // contamination guard
    int unparseable_retries = 1;
};

struct PreparedPrompt {
    std::string text;
    std::vector<EvidenceItem> evidence;
};

// Selects context per mode and renders the prompt; no LLM call.
PreparedPrompt prepare_prompt(const TrialDocument& doc, const SignalingQuestion& q, const Retriever& retriever,
                              const QaOptions& options);

// One LLM round trip for an active question. An unparseable response is
// re-sent with the same prompt up to `unparseable_retries` times.
ModelAnswer answer_question(const TrialDocument& doc, const SignalingQuestion& q, const Retriever& retriever,
                            LLMClient& llm, const QaOptions& options);

enum class OutcomeStatus { Answered, NotApplicable, Failed };

struct QuestionOutcome {
    std::string qid;
    OutcomeStatus status = OutcomeStatus::Failed;
    std::optional<ModelAnswer> model_answer;
    std::optional<ErrorCode> error_code;
    std::string error;

    Answer answer() const;  // NotApplicable for gated-off; throws State for failures
    ordered_json to_json() const;
};

std::string_view outcome_key(OutcomeStatus s) noexcept;

// Walks the questionnaire in qid order. Gated-off questions get
// NotApplicable without an LLM call. Failures are recorded per question;
// questions whose gate depends on a failed answer fail as blocked. Answered
// outcomes in `resume_from` are kept, so a rerun only retries the rest.
std::vector<QuestionOutcome> assess_document(const TrialDocument& doc, const Questionnaire& questionnaire,
                                             const Retriever& retriever, LLMClient& llm, const QaOptions& options,
                                             std::span<const QuestionOutcome> resume_from = {});

// Final answers of the answered and gated-off outcomes.
AnswerMap outcome_answers(std::span<const QuestionOutcome> outcomes);

}  // namespace rob
