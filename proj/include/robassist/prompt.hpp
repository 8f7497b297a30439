#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "robassist/answer.hpp"
#include "robassist/questionnaire.hpp"

namespace rob {

struct ContextMode {
    enum class Kind { Oracle, TopK, FullPaper };
    Kind kind = Kind::TopK;
    std::size_t k = 3;  // TopK only

    static ContextMode oracle() { return {Kind::Oracle, 1}; }
    static ContextMode top_k(std::size_t k);
    static ContextMode full_paper() { return {Kind::FullPaper, 0}; }

    // "oracle" | "topk:K" | "full"
    static ContextMode parse(std::string_view text);
    std::string to_string() const;

    bool operator==(const ContextMode&) const = default;
};

struct Passage {
    std::string section_header;
    std::string text;
};

inline constexpr std::string_view kInstruction =
    "You are an expert scientific researcher. You will be given a passage from a scientific paper reporting on a "
    "randomized controlled trial along with a question and elaboration of the question. Your task is to return the "
    "answer to the question out of the following set of answers: \"yes\", \"no\", \"probably yes\", \"probably no\", "
    "\"no information\". You should use the given passage to answer the question.";

// Instruction, question, elaboration, then the passages in the given order.
// FullPaper passages are prefixed with their section header.
std::string build_prompt(const SignalingQuestion& q, const ContextMode& mode, std::span<const Passage> passages);

struct FewShotExample {
    std::string doc_id;  // source of the example, checked against the evaluation set
    std::string qid;
    std::string question;
    std::string passage;  // oracle evidence
    Answer answer = Answer::Yes;
};

using ItemKey = std::pair<std::string, std::string>;  // (doc_id, qid)

// Answered example blocks ("Answer:<label>") followed by the unanswered
// target block; elaboration omitted throughout. At most one example per
// 3-class label; an example whose (doc_id, qid) is in `evaluation_items`
// is a contamination error.
std::string build_fewshot_prompt(const SignalingQuestion& q, const ContextMode& mode, std::span<const Passage> passages,
                                 std::span<const FewShotExample> examples,
                                 std::span<const ItemKey> evaluation_items = {});

struct ParsedAnswer {
    Answer answer;
    std::string rationale;
};

// First label occurrence wins; at one position the longer label wins.
// Throws Unparseable when no label is present.
ParsedAnswer parse_answer(std::string_view raw);

// Rough token estimate (4 bytes per token, rounded up).
std::size_t estimate_tokens(std::string_view text);

}  // namespace rob
