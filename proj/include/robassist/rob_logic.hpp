#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "robassist/answer.hpp"
#include "robassist/questionnaire.hpp"
#include "robassist/util.hpp"

namespace rob {

// Ordered: Low < SomeConcerns < High.
enum class RiskLevel { Low = 0, SomeConcerns = 1, High = 2 };

std::string_view risk_key(RiskLevel r) noexcept;  // "low" | "some_concerns" | "high"
std::optional<RiskLevel> risk_from_text(std::string_view s) noexcept;

using DomainLevels = std::array<RiskLevel, kDomainCount>;

// Decision tree for one domain, loaded from configuration. Internal nodes
// test one qid's answer against disjoint answer sets; leaves are levels.
class RuleTable {
public:
    struct Branch {
        AnswerSet classes;
        std::size_t next = 0;  // node index
    };
    struct Node {
        std::string qid;  // empty for leaves
        std::vector<Branch> branches;
        RiskLevel risk = RiskLevel::Low;
        bool is_leaf() const noexcept { return qid.empty(); }
    };

    // Structural parse only; semantic checks live in validate_rule_table.
    static RuleTable from_json(const json& j);

    int domain() const noexcept { return domain_; }
    const std::string& provenance() const noexcept { return provenance_; }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::size_t root() const noexcept { return 0; }

    // Walks the tree. Sequencing error when a tested qid has no answer;
    // totality error when no branch admits the answer.
    RiskLevel judge(const AnswerMap& answers) const;

private:
    std::size_t parse_node(const json& j, const std::string& path);

    int domain_ = 0;
    std::string provenance_;
    std::vector<Node> nodes_;
};

RuleTable load_rule_table(const std::filesystem::path& path);

RiskLevel domain_judgment(const RuleTable& table, const AnswerMap& answers);

struct OverallRule {
    // Optional escalation: at least `escalation_threshold` SomeConcerns
    // domains make the overall judgment High.
    bool escalate = false;
    int escalation_threshold = 0;
};

// High if any domain is High; else SomeConcerns if any is; else Low.
RiskLevel overall_judgment(const DomainLevels& domains, const OverallRule& rule = {});

// Empty iff the table is total and deterministic over every gate-consistent
// answer assignment for its domain.
std::vector<std::string> validate_rule_table(const RuleTable& table, const Questionnaire& questionnaire);

// Calls `visit` once per gate-consistent assignment of the domain's questions
// (gated-off questions get NotApplicable). Returns the number visited.
template <typename Visit>
std::size_t for_each_consistent_assignment(const Questionnaire& questionnaire, int domain, Visit&& visit);

// The five domain tables.
class RuleSet {
public:
    static RuleSet load(const std::filesystem::path& rules_dir);

    const RuleTable& table(int domain) const;
    DomainLevels judge(const AnswerMap& answers) const;

private:
    std::vector<RuleTable> tables_;
};

const RuleSet& default_rule_set();

// ---------------------------------------------------------------------------

namespace detail {
template <typename Visit>
void enumerate(const std::vector<const SignalingQuestion*>& qs, std::size_t i, AnswerMap& answers,
               Visit& visit, std::size_t& count) {
    if (i == qs.size()) {
        visit(static_cast<const AnswerMap&>(answers));
        ++count;
        return;
    }
    const auto& q = *qs[i];
    if (!is_active(q, answers)) {
        answers[q.qid] = Answer::NotApplicable;
        enumerate(qs, i + 1, answers, visit, count);
    } else {
        for (Answer a : kResponseOptions) {
            answers[q.qid] = a;
            enumerate(qs, i + 1, answers, visit, count);
        }
    }
    answers.erase(q.qid);
}
}  // namespace detail

template <typename Visit>
std::size_t for_each_consistent_assignment(const Questionnaire& questionnaire, int domain, Visit&& visit) {
    auto qs = questionnaire.domain_questions(domain);
    AnswerMap answers;
    std::size_t count = 0;
    detail::enumerate(qs, 0, answers, visit, count);
    return count;
}

}  // namespace rob
