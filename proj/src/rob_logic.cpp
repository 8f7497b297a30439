#include "robassist/rob_logic.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "robassist/error.hpp"

namespace rob {

std::string_view risk_key(RiskLevel r) noexcept {
    switch (r) {
        case RiskLevel::Low: return "low";
        case RiskLevel::SomeConcerns: return "some_concerns";
        case RiskLevel::High: return "high";
    }
    return "";
}

std::optional<RiskLevel> risk_from_text(std::string_view s) noexcept {
    std::string t;
    for (char c : s) {
        if (c == ' ' || c == '-') c = '_';
        t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (t == "low" || t == "low_risk") return RiskLevel::Low;
    if (t == "some_concerns" || t == "some_concern") return RiskLevel::SomeConcerns;
    if (t == "high" || t == "high_risk") return RiskLevel::High;
    return std::nullopt;
}

RuleTable RuleTable::from_json(const json& j) {
    if (!j.is_object()) fail(ErrorCode::Schema, "rule file must be a JSON object");
    RuleTable t;
    if (!j.contains("domain") || !j["domain"].is_number_integer())
        fail(ErrorCode::Schema, "rule file needs an integer domain");
    t.domain_ = j["domain"].get<int>();
    t.provenance_ = j.value("provenance", std::string{});
    if (!j.contains("node")) fail(ErrorCode::Schema, "rule file needs a root node");
    t.parse_node(j["node"], "root");
    return t;
}

std::size_t RuleTable::parse_node(const json& j, const std::string& path) {
    if (!j.is_object()) fail(ErrorCode::Schema, "rule node at " + path + " must be an object");
    std::size_t id = nodes_.size();
    nodes_.emplace_back();
    if (j.contains("risk")) {
        auto r = j["risk"].is_string() ? risk_from_text(j["risk"].get<std::string>()) : std::nullopt;
        if (!r) fail(ErrorCode::Schema, "bad risk leaf at " + path);
        nodes_[id].risk = *r;
        return id;
    }
    if (j.contains("node")) {  // {"node": {...}} wrapper
        nodes_.pop_back();
        return parse_node(j["node"], path);
    }
    if (!j.contains("qid") || !j["qid"].is_string() || j["qid"].get<std::string>().empty())
        fail(ErrorCode::Schema, "rule node at " + path + " needs a qid or a risk");
    std::string qid = j["qid"].get<std::string>();
    nodes_[id].qid = qid;
    if (!j.contains("branches") || !j["branches"].is_array() || j["branches"].empty())
        fail(ErrorCode::Schema, "rule node " + qid + " at " + path + " needs branches");
    std::vector<Branch> branches;
    for (const auto& b : j["branches"]) {
        Branch br;
        if (!b.contains("classes") || !b["classes"].is_array())
            fail(ErrorCode::Schema, "branch of " + qid + " at " + path + " needs classes");
        for (const auto& c : b["classes"]) {
            auto a = c.is_string() ? answer_from_text(c.get<std::string>()) : std::nullopt;
            if (!a) fail(ErrorCode::Schema, "unknown answer class " + c.dump() + " at " + qid);
            br.classes.insert(*a);
        }
        if (!b.contains("next")) fail(ErrorCode::Schema, "branch of " + qid + " at " + path + " needs next");
        br.next = parse_node(b["next"], path + "/" + qid + br.classes.to_string());
        branches.push_back(br);
    }
    nodes_[id].branches = std::move(branches);
    return id;
}

RiskLevel RuleTable::judge(const AnswerMap& answers) const {
    std::size_t cur = root();
    std::string trail;
    while (!nodes_[cur].is_leaf()) {
        const Node& n = nodes_[cur];
        auto it = answers.find(n.qid);
        if (it == answers.end())
            fail(ErrorCode::Sequencing, "domain " + std::to_string(domain_) + " judgment needs an answer to " + n.qid);
        if (!trail.empty()) trail += ", ";
        trail += n.qid + "=" + std::string(answer_key(it->second));
        auto br = std::find_if(n.branches.begin(), n.branches.end(),
                               [&](const Branch& b) { return b.classes.contains(it->second); });
        if (br == n.branches.end())
            fail(ErrorCode::Totality,
                 "domain " + std::to_string(domain_) + " rule table has no branch for " + trail);
        cur = br->next;
    }
    return nodes_[cur].risk;
}

RuleTable load_rule_table(const std::filesystem::path& path) {
    return RuleTable::from_json(read_json_file(path));
}

RiskLevel domain_judgment(const RuleTable& table, const AnswerMap& answers) { return table.judge(answers); }

RiskLevel overall_judgment(const DomainLevels& domains, const OverallRule& rule) {
    auto worst = *std::max_element(domains.begin(), domains.end());
    if (worst == RiskLevel::High) return RiskLevel::High;
    if (worst == RiskLevel::SomeConcerns && rule.escalate && rule.escalation_threshold > 0) {
        auto n = std::count(domains.begin(), domains.end(), RiskLevel::SomeConcerns);
        if (n >= rule.escalation_threshold) return RiskLevel::High;
    }
    return worst;
}

std::vector<std::string> validate_rule_table(const RuleTable& table, const Questionnaire& questionnaire) {
    std::vector<std::string> out;
    const int d = table.domain();
    if (d < 1 || d > kDomainCount) {
        out.push_back("domain " + std::to_string(d) + " out of range");
        return out;
    }
    const auto& nodes = table.nodes();
    bool structural_ok = true;
    for (const auto& n : nodes) {
        if (n.is_leaf()) continue;
        const auto* q = questionnaire.find(n.qid);
        if (!q) {
            out.push_back("node tests unknown question " + n.qid);
            structural_ok = false;
            continue;
        }
        if (q->domain != d) {
            out.push_back("cross-domain node: " + n.qid + " tested inside domain " + std::to_string(d));
            structural_ok = false;
        }
        for (std::size_t i = 0; i < n.branches.size(); ++i)
            for (std::size_t k = i + 1; k < n.branches.size(); ++k) {
                auto both = n.branches[i].classes & n.branches[k].classes;
                if (!both.empty()) out.push_back("overlap at node " + n.qid + ": " + both.to_string());
            }
        if (questionnaire.can_be_gated(n.qid)) {
            bool routes_na = std::any_of(n.branches.begin(), n.branches.end(), [](const auto& b) {
                return b.classes.contains(Answer::NotApplicable);
            });
            if (!routes_na) out.push_back("node " + n.qid + " can be gated but does not route not_applicable");
        }
    }
    if (!structural_ok) return out;

    // Exhaustive walk over gate-consistent assignments; report each
    // (node, answer) gap once.
    std::set<std::pair<std::size_t, Answer>> reported;
    for_each_consistent_assignment(questionnaire, d, [&](const AnswerMap& answers) {
        std::size_t cur = table.root();
        std::string trail;
        while (!nodes[cur].is_leaf()) {
            const auto& n = nodes[cur];
            Answer a = answers.at(n.qid);
            if (!trail.empty()) trail += ", ";
            trail += n.qid + "=" + std::string(answer_key(a));
            auto br = std::find_if(n.branches.begin(), n.branches.end(),
                                   [&](const auto& b) { return b.classes.contains(a); });
            if (br == n.branches.end()) {
                if (reported.insert({cur, a}).second) out.push_back("gap: no branch for " + trail);
                return;
            }
            cur = br->next;
        }
    });
    return out;
}

RuleSet RuleSet::load(const std::filesystem::path& rules_dir) {
    RuleSet s;
    for (int d = 1; d <= kDomainCount; ++d) {
        auto t = load_rule_table(rules_dir / ("domain" + std::to_string(d) + ".json"));
        if (t.domain() != d)
            fail(ErrorCode::Schema, "rule file domain" + std::to_string(d) + ".json declares domain " +
                                        std::to_string(t.domain()));
        s.tables_.push_back(std::move(t));
    }
    return s;
}

const RuleTable& RuleSet::table(int domain) const {
    if (domain < 1 || domain > static_cast<int>(tables_.size())) fail(ErrorCode::Argument, "domain out of range");
    return tables_[domain - 1];
}

DomainLevels RuleSet::judge(const AnswerMap& answers) const {
    DomainLevels out{};
    for (int d = 1; d <= kDomainCount; ++d) out[d - 1] = table(d).judge(answers);
    return out;
}

const RuleSet& default_rule_set() {
    static const RuleSet s = RuleSet::load(default_data_dir() / "rules");
    return s;
}

}  // namespace rob
