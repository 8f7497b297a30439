#include "robassist/answer.hpp"

#include <algorithm>
#include <cctype>

#include "robassist/error.hpp"

namespace rob {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Parse: return "parse_error";
        case ErrorCode::EmptyDocument: return "empty_document";
        case ErrorCode::Schema: return "schema_error";
        case ErrorCode::Sequencing: return "sequencing_error";
        case ErrorCode::Totality: return "totality_error";
        case ErrorCode::Configuration: return "configuration_error";
        case ErrorCode::Argument: return "argument_error";
        case ErrorCode::Unparseable: return "unparseable_response";
        case ErrorCode::ContextOverflow: return "context_overflow";
        case ErrorCode::Contamination: return "contamination_error";
        case ErrorCode::Gating: return "gating_error";
        case ErrorCode::State: return "state_error";
        case ErrorCode::Import: return "import_error";
        case ErrorCode::IndexBuild: return "index_build_error";
        case ErrorCode::Upstream: return "upstream_error";
        case ErrorCode::NotFound: return "not_found";
        case ErrorCode::Io: return "io_error";
    }
    return "unknown";
}

std::string_view answer_key(Answer a) noexcept {
    switch (a) {
        case Answer::Yes: return "yes";
        case Answer::ProbablyYes: return "probably_yes";
        case Answer::ProbablyNo: return "probably_no";
        case Answer::No: return "no";
        case Answer::NoInformation: return "no_information";
        case Answer::NotApplicable: return "not_applicable";
    }
    return "";
}

std::string_view answer_label(Answer a) noexcept {
    switch (a) {
        case Answer::Yes: return "yes";
        case Answer::ProbablyYes: return "probably yes";
        case Answer::ProbablyNo: return "probably no";
        case Answer::No: return "no";
        case Answer::NoInformation: return "no information";
        case Answer::NotApplicable: return "not applicable";
    }
    return "";
}

std::optional<Answer> answer_from_key(std::string_view key) noexcept {
    for (Answer a : kAllAnswers)
        if (answer_key(a) == key) return a;
    return std::nullopt;
}

std::optional<Answer> answer_from_text(std::string_view text) {
    std::string s;
    for (char c : text) {
        if (c == '_' || c == '-' || c == '/') c = ' ';
        s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    auto b = s.find_first_not_of(' ');
    auto e = s.find_last_not_of(' ');
    if (b == std::string::npos) return std::nullopt;
    s = s.substr(b, e - b + 1);

    if (s == "y" || s == "yes") return Answer::Yes;
    if (s == "py" || s == "probably yes") return Answer::ProbablyYes;
    if (s == "pn" || s == "probably no") return Answer::ProbablyNo;
    if (s == "n" || s == "no") return Answer::No;
    if (s == "ni" || s == "no information") return Answer::NoInformation;
    if (s == "na" || s == "n a" || s == "not applicable") return Answer::NotApplicable;
    return std::nullopt;
}

std::string AnswerSet::to_string() const {
    std::string out = "{";
    bool first = true;
    for (Answer a : kAllAnswers) {
        if (!contains(a)) continue;
        if (!first) out += ",";
        out += answer_key(a);
        first = false;
    }
    return out + "}";
}

std::optional<Class3> to_class3(Answer a) noexcept {
    switch (a) {
        case Answer::Yes:
        case Answer::ProbablyYes: return Class3::YPY;
        case Answer::No:
        case Answer::ProbablyNo: return Class3::NPN;
        case Answer::NoInformation: return Class3::NI;
        case Answer::NotApplicable: return std::nullopt;
    }
    return std::nullopt;
}

std::string_view class3_label(Class3 c) noexcept {
    switch (c) {
        case Class3::YPY: return "Y/PY";
        case Class3::NPN: return "N/PN";
        case Class3::NI: return "NI";
    }
    return "";
}

std::optional<Class3> class3_from_label(std::string_view s) noexcept {
    for (Class3 c : kClasses3)
        if (class3_label(c) == s) return c;
    return std::nullopt;
}

Class4 to_class4(Answer a) noexcept {
    auto c = to_class3(a);
    if (!c) return Class4::NA;
    switch (*c) {
        case Class3::YPY: return Class4::YPY;
        case Class3::NPN: return Class4::NPN;
        case Class3::NI: return Class4::NI;
    }
    return Class4::NA;
}

std::string_view class4_label(Class4 c) noexcept {
    switch (c) {
        case Class4::YPY: return "Y/PY";
        case Class4::NPN: return "N/PN";
        case Class4::NI: return "NI";
        case Class4::NA: return "NA";
    }
    return "";
}

}  // namespace rob
