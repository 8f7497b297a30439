#include "robassist/prompt.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>

#include "robassist/error.hpp"

namespace rob {

ContextMode ContextMode::top_k(std::size_t k) {
    if (k < 1) fail(ErrorCode::Argument, "top-k context needs k >= 1");
    return {Kind::TopK, k};
}

ContextMode ContextMode::parse(std::string_view text) {
    if (text == "oracle") return oracle();
    if (text == "full" || text == "full_paper" || text == "fullpaper") return full_paper();
    if (text.starts_with("topk:") || text.starts_with("k=")) {
        auto digits = text.substr(text.find_first_of(":=") + 1);
        std::size_t k = 0;
        auto r = std::from_chars(digits.data(), digits.data() + digits.size(), k);
        if (r.ec != std::errc{} || r.ptr != digits.data() + digits.size() || k == 0)
            fail(ErrorCode::Argument, "bad top-k mode: " + std::string(text));
        return top_k(k);
    }
    fail(ErrorCode::Argument, "context mode must be oracle|topk:K|full, got " + std::string(text));
}

std::string ContextMode::to_string() const {
    switch (kind) {
        case Kind::Oracle: return "oracle";
        case Kind::TopK: return "topk:" + std::to_string(k);
        case Kind::FullPaper: return "full";
    }
    return "";
}

namespace {

void check_passages(const ContextMode& mode, std::span<const Passage> passages) {
    if (passages.empty()) fail(ErrorCode::Argument, "prompt needs at least one passage for mode " + mode.to_string());
    if (mode.kind == ContextMode::Kind::Oracle && passages.size() != 1)
        fail(ErrorCode::Argument, "oracle mode takes exactly one evidence passage");
}

std::string passage_block(const ContextMode& mode, std::span<const Passage> passages) {
    std::string out = "Passage(s):\n";
    for (const auto& p : passages) {
        if (mode.kind == ContextMode::Kind::FullPaper && !p.section_header.empty()) {
            out += p.section_header;
            out += '\n';
        }
        out += p.text;
        out += '\n';
    }
    return out;
}

std::string question_line(std::string_view text) {
    std::string out = "Question: \"";
    out += text;
    out += "\"\n\n";
    return out;
}

}  // namespace

std::string build_prompt(const SignalingQuestion& q, const ContextMode& mode, std::span<const Passage> passages) {
    check_passages(mode, passages);
    std::string out(kInstruction);
    out += "\n\n";
    out += question_line(q.text);
    out += "Elaboration: \"";
    out += q.elaboration;
    out += "\"\n\n";
    out += passage_block(mode, passages);
    return out;
}

std::string build_fewshot_prompt(const SignalingQuestion& q, const ContextMode& mode, std::span<const Passage> passages,
                                 std::span<const FewShotExample> examples, std::span<const ItemKey> evaluation_items) {
    check_passages(mode, passages);
    std::array<bool, 3> seen{};
    for (const auto& ex : examples) {
        auto c = to_class3(ex.answer);
        if (!c) fail(ErrorCode::Argument, "few-shot example for " + ex.qid + " has no 3-class label");
        auto slot = static_cast<std::size_t>(*c);
        if (seen[slot])
            fail(ErrorCode::Argument, "few-shot examples need one instance per class; " +
                                          std::string(class3_label(*c)) + " appears twice");
        seen[slot] = true;
        ItemKey key{ex.doc_id, ex.qid};
        if (std::find(evaluation_items.begin(), evaluation_items.end(), key) != evaluation_items.end())
            fail(ErrorCode::Contamination,
                 "few-shot example " + ex.doc_id + "/" + ex.qid + " is part of the evaluation set");
    }

    std::string out(kInstruction);
    out += "\n\n";
    const ContextMode example_mode = ContextMode::oracle();
    for (const auto& ex : examples) {
        out += question_line(ex.question);
        Passage p{"", ex.passage};
        out += passage_block(example_mode, std::span<const Passage>(&p, 1));
        out += "Answer:";
        out += answer_label(ex.answer);
        out += "\n\n";
    }
    out += question_line(q.text);
    out += passage_block(mode, passages);
    return out;
}

namespace {

bool is_word_byte(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || (static_cast<unsigned char>(c) & 0x80) != 0;
}

constexpr std::array<std::pair<std::string_view, Answer>, 5> kLabels = {{
    {"probably yes", Answer::ProbablyYes},
    {"probably no", Answer::ProbablyNo},
    {"no information", Answer::NoInformation},
    {"yes", Answer::Yes},
    {"no", Answer::No},
}};

}  // namespace

ParsedAnswer parse_answer(std::string_view raw) {
    std::string lower(raw);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

    std::size_t best_pos = std::string::npos, best_len = 0;
    Answer best = Answer::NoInformation;
    for (const auto& [label, answer] : kLabels) {
        std::size_t from = 0;
        while (true) {
            auto pos = lower.find(label, from);
            if (pos == std::string::npos) break;
            bool left_ok = pos == 0 || !is_word_byte(lower[pos - 1]);
            std::size_t end = pos + label.size();
            bool right_ok = end >= lower.size() || !is_word_byte(lower[end]);
            if (left_ok && right_ok) {
                if (pos < best_pos || (pos == best_pos && label.size() > best_len)) {
                    best_pos = pos;
                    best_len = label.size();
                    best = answer;
                }
                break;
            }
            from = pos + 1;
        }
    }
    if (best_pos == std::string::npos)
        fail(ErrorCode::Unparseable, "no answer label in response: " + std::string(raw.substr(0, 200)));

    std::string_view rest = raw.substr(best_pos + best_len);
    std::size_t skip = 0;
    // drop closing quotes/markup and punctuation that trail the label
    while (skip < rest.size()) {
        char c = rest[skip];
        if (c == '.' || c == ':' || c == ',' || c == ';' || c == '-' || c == '"' || c == '\'' || c == '*' ||
            c == ')' || std::isspace(static_cast<unsigned char>(c)))
            ++skip;
        else if (rest.substr(skip).starts_with("\xE2\x80\x9D") || rest.substr(skip).starts_with("\xE2\x80\x99"))
            skip += 3;  // closing curly quotes
        else
            break;
    }
    return {best, trim(rest.substr(skip))};
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

}  // namespace rob
