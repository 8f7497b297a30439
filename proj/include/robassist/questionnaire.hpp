#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "robassist/answer.hpp"
#include "robassist/util.hpp"

namespace rob {

inline constexpr int kDomainCount = 5;
inline constexpr std::array<std::size_t, kDomainCount> kQuestionsPerDomain = {3, 7, 4, 5, 3};
inline constexpr std::size_t kQuestionCount = 22;

using AnswerMap = std::map<std::string, Answer>;

enum class Combinator { Any, All };

struct GateCondition {
    std::string qid;
    AnswerSet allowed;  // never contains NotApplicable
};

struct CascadeGate {
    Combinator combinator = Combinator::Any;
    std::vector<GateCondition> antecedents;
};

struct SignalingQuestion {
    std::string qid;  // "D.N"
    int domain = 0;
    int number = 0;
    std::string text;
    std::string elaboration;
    std::optional<CascadeGate> gate;
};

// The 22 ROB2 signaling questions in qid order. Immutable after load.
class Questionnaire {
public:
    static Questionnaire from_json(const json& j);

    const std::string& version() const noexcept { return version_; }
    const std::vector<SignalingQuestion>& questions() const noexcept { return questions_; }
    const std::string& domain_name(int domain) const;

    // Throws NotFound for an unknown qid.
    const SignalingQuestion& question(std::string_view qid) const;
    const SignalingQuestion* find(std::string_view qid) const noexcept;
    std::vector<const SignalingQuestion*> domain_questions(int domain) const;

    // True when some other question's gate references qid's answers
    // or qid itself carries a gate (so it can be NotApplicable).
    bool can_be_gated(std::string_view qid) const;

    ordered_json to_json() const;

private:
    std::string version_;
    std::array<std::string, kDomainCount> domain_names_;
    std::vector<SignalingQuestion> questions_;
};

Questionnaire load_questionnaire(const std::filesystem::path& path);

// Directory holding questionnaire.json and rules/; $ROB_DATA_DIR overrides
// the build-time default.
std::filesystem::path default_data_dir();
const Questionnaire& default_questionnaire();

// Throws Sequencing when an antecedent answer is missing.
bool is_active(const SignalingQuestion& q, const AnswerMap& answers_so_far);

// Walks the questionnaire in qid order and returns the answers with every
// gated-off question set to NotApplicable. Active questions missing from
// `answers` are left absent.
AnswerMap apply_gating(const Questionnaire& questionnaire, const AnswerMap& answers);

// Parses "D.N" into (domain, number); nullopt when malformed.
std::optional<std::pair<int, int>> parse_qid(std::string_view qid);

}  // namespace rob
