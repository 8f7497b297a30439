#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rob {

// Every failure raised by the library carries one of these codes. The HTTP
// layer maps each code to exactly one status + machine code.
enum class ErrorCode {
    Parse,            // malformed JSON / input bytes
    EmptyDocument,    // ingestion produced no paragraphs
    Schema,           // data file violates its schema
    Sequencing,       // an answer required by a gate or rule is missing
    Totality,         // rule table has no branch for a reachable combination
    Configuration,    // mismatched embedder, bad endpoint config, etc.
    Argument,         // caller passed an invalid argument
    Unparseable,      // LLM response contains no answer label
    ContextOverflow,  // full-paper prompt exceeds the context budget
    Contamination,    // few-shot example drawn from the evaluation set
    Gating,           // operation on a gated-off question
    State,            // operation not allowed in the session's state
    Import,           // session / dataset import failure
    IndexBuild,       // embedder failed while indexing a paragraph
    Upstream,         // LLM or embedding endpoint failure
    NotFound,         // unknown document / session / question id
    Io,               // filesystem failure
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace rob
