#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace rob {

// Five response options plus NotApplicable, which only cascade gating assigns.
enum class Answer {
    Yes,
    ProbablyYes,
    ProbablyNo,
    No,
    NoInformation,
    NotApplicable,
};

inline constexpr std::array<Answer, 5> kResponseOptions = {
    Answer::Yes, Answer::ProbablyYes, Answer::ProbablyNo, Answer::No, Answer::NoInformation};

inline constexpr std::array<Answer, 6> kAllAnswers = {
    Answer::Yes, Answer::ProbablyYes, Answer::ProbablyNo,
    Answer::No,  Answer::NoInformation, Answer::NotApplicable};

// Stable identifier used in every JSON file ("probably_yes", ...).
std::string_view answer_key(Answer a) noexcept;
std::optional<Answer> answer_from_key(std::string_view key) noexcept;

// Lower-case label as it appears in prompts ("probably yes").
std::string_view answer_label(Answer a) noexcept;

// Lenient parser for external data: accepts keys, labels, and the
// abbreviations used by the ROB2 tool (Y, PY, PN, N, NI, NA).
std::optional<Answer> answer_from_text(std::string_view text);

// Bit set over Answer values.
class AnswerSet {
public:
    constexpr AnswerSet() = default;
    constexpr AnswerSet(std::initializer_list<Answer> answers) {
        for (Answer a : answers) bits_ |= bit(a);
    }

    constexpr bool contains(Answer a) const noexcept { return (bits_ & bit(a)) != 0; }
    constexpr void insert(Answer a) noexcept { bits_ |= bit(a); }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    constexpr bool intersects(AnswerSet o) const noexcept { return (bits_ & o.bits_) != 0; }
    constexpr AnswerSet operator|(AnswerSet o) const noexcept { return from_bits(bits_ | o.bits_); }
    constexpr AnswerSet operator&(AnswerSet o) const noexcept { return from_bits(bits_ & o.bits_); }
    constexpr bool operator==(const AnswerSet&) const = default;
    constexpr unsigned bits() const noexcept { return bits_; }

    std::string to_string() const;

private:
    static constexpr unsigned bit(Answer a) noexcept { return 1u << static_cast<unsigned>(a); }
    static constexpr AnswerSet from_bits(unsigned b) noexcept {
        AnswerSet s;
        s.bits_ = b;
        return s;
    }
    unsigned bits_ = 0;
};

// Three-way aggregation used for scoring.
enum class Class3 { YPY, NPN, NI };

inline constexpr std::array<Class3, 3> kClasses3 = {Class3::YPY, Class3::NPN, Class3::NI};

// NotApplicable has no 3-class image.
std::optional<Class3> to_class3(Answer a) noexcept;
std::string_view class3_label(Class3 c) noexcept;
std::optional<Class3> class3_from_label(std::string_view s) noexcept;

// Four-way labels used for inter-rater agreement: the 3 classes plus NA.
enum class Class4 { YPY, NPN, NI, NA };
Class4 to_class4(Answer a) noexcept;
std::string_view class4_label(Class4 c) noexcept;

}  // namespace rob
