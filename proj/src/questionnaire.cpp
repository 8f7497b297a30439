#include "robassist/questionnaire.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <set>

#include "robassist/error.hpp"

#ifndef ROB_DEFAULT_DATA_DIR
#define ROB_DEFAULT_DATA_DIR "data"
#endif

namespace rob {

std::optional<std::pair<int, int>> parse_qid(std::string_view qid) {
    auto dot = qid.find('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == qid.size()) return std::nullopt;
    int d = 0, n = 0;
    auto r1 = std::from_chars(qid.data(), qid.data() + dot, d);
    auto r2 = std::from_chars(qid.data() + dot + 1, qid.data() + qid.size(), n);
    if (r1.ec != std::errc{} || r1.ptr != qid.data() + dot) return std::nullopt;
    if (r2.ec != std::errc{} || r2.ptr != qid.data() + qid.size()) return std::nullopt;
    if (d < 1 || n < 1) return std::nullopt;
    return std::pair{d, n};
}

namespace {

AnswerSet parse_allowed(const json& list, const std::string& qid) {
    if (!list.is_array() || list.empty())
        fail(ErrorCode::Schema, "question " + qid + ": gate antecedent needs a non-empty allowed list");
    AnswerSet s;
    for (const auto& v : list) {
        auto a = v.is_string() ? answer_from_text(v.get<std::string>()) : std::nullopt;
        if (!a) fail(ErrorCode::Schema, "question " + qid + ": unknown answer in gate: " + v.dump());
        if (*a == Answer::NotApplicable)
            fail(ErrorCode::Schema, "question " + qid + ": gates cannot admit not_applicable");
        s.insert(*a);
    }
    return s;
}

std::string req_string(const json& obj, const char* key, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string())
        fail(ErrorCode::Schema, ctx + ": missing string field '" + key + "'");
    return it->get<std::string>();
}

}  // namespace

Questionnaire Questionnaire::from_json(const json& j) {
    Questionnaire qn;
    const json* list = &j;
    if (j.is_object()) {
        qn.version_ = j.value("version", std::string("unversioned"));
        if (auto it = j.find("domains"); it != j.end() && it->is_array()) {
            for (const auto& d : *it) {
                int id = d.value("domain", 0);
                if (id >= 1 && id <= kDomainCount) qn.domain_names_[id - 1] = d.value("name", "");
            }
        }
        if (!j.contains("questions")) fail(ErrorCode::Schema, "questionnaire has no questions list");
        list = &j["questions"];
    } else {
        qn.version_ = "unversioned";
    }
    if (!list->is_array()) fail(ErrorCode::Schema, "questionnaire questions must be a list");

    std::set<std::string> seen;
    for (const auto& e : *list) {
        if (!e.is_object()) fail(ErrorCode::Schema, "question entries must be objects");
        SignalingQuestion q;
        q.qid = req_string(e, "qid", "question");
        auto parsed = parse_qid(q.qid);
        if (!parsed) fail(ErrorCode::Schema, "question " + q.qid + ": qid must look like D.N");
        q.number = parsed->second;
        if (!e.contains("domain") || !e["domain"].is_number_integer())
            fail(ErrorCode::Schema, "question " + q.qid + ": missing integer domain");
        q.domain = e["domain"].get<int>();
        if (q.domain < 1 || q.domain > kDomainCount)
            fail(ErrorCode::Schema, "question " + q.qid + ": domain out of range");
        if (q.domain != parsed->first)
            fail(ErrorCode::Schema, "question " + q.qid + ": domain does not match qid prefix");
        if (!seen.insert(q.qid).second) fail(ErrorCode::Schema, "question " + q.qid + ": duplicate qid");
        q.text = req_string(e, "text", "question " + q.qid);
        q.elaboration = req_string(e, "elaboration", "question " + q.qid);
        if (trim(q.elaboration).empty())
            fail(ErrorCode::Schema, "question " + q.qid + ": elaboration is empty");

        if (auto g = e.find("gate"); g != e.end() && !g->is_null()) {
            CascadeGate gate;
            std::string comb = g->value("combinator", std::string("any"));
            std::transform(comb.begin(), comb.end(), comb.begin(), ::tolower);
            if (comb == "any") gate.combinator = Combinator::Any;
            else if (comb == "all") gate.combinator = Combinator::All;
            else fail(ErrorCode::Schema, "question " + q.qid + ": combinator must be any|all");
            if (!g->contains("antecedents") || !(*g)["antecedents"].is_array() ||
                (*g)["antecedents"].empty())
                fail(ErrorCode::Schema, "question " + q.qid + ": gate needs antecedents");
            for (const auto& a : (*g)["antecedents"]) {
                GateCondition c;
                c.qid = req_string(a, "qid", "question " + q.qid + " gate");
                auto ap = parse_qid(c.qid);
                if (!ap) fail(ErrorCode::Schema, "question " + q.qid + ": bad antecedent qid " + c.qid);
                if (ap->first != q.domain)
                    fail(ErrorCode::Schema, "question " + q.qid + ": cross-domain gate on " + c.qid);
                if (ap->second >= q.number)
                    fail(ErrorCode::Schema,
                         "question " + q.qid + ": gate antecedent " + c.qid + " does not precede it");
                c.allowed = parse_allowed(a.value("allowed", json()), q.qid);
                gate.antecedents.push_back(std::move(c));
            }
            q.gate = std::move(gate);
        }
        qn.questions_.push_back(std::move(q));
    }

    std::sort(qn.questions_.begin(), qn.questions_.end(), [](const auto& a, const auto& b) {
        return std::pair(a.domain, a.number) < std::pair(b.domain, b.number);
    });

    for (int d = 1; d <= kDomainCount; ++d) {
        auto count = static_cast<std::size_t>(std::count_if(
            qn.questions_.begin(), qn.questions_.end(), [d](const auto& q) { return q.domain == d; }));
        if (count != kQuestionsPerDomain[d - 1])
            fail(ErrorCode::Schema, "domain " + std::to_string(d) + " expects " +
                                        std::to_string(kQuestionsPerDomain[d - 1]) + " questions, found " +
                                        std::to_string(count));
    }
    for (const auto& q : qn.questions_) {
        if (q.number < 1 || static_cast<std::size_t>(q.number) > kQuestionsPerDomain[q.domain - 1])
            fail(ErrorCode::Schema, "question " + q.qid + ": number out of range for its domain");
        if (q.gate)
            for (const auto& c : q.gate->antecedents)
                if (!qn.find(c.qid))
                    fail(ErrorCode::Schema, "question " + q.qid + ": gate references unknown " + c.qid);
    }
    for (int d = 0; d < kDomainCount; ++d)
        if (qn.domain_names_[d].empty()) qn.domain_names_[d] = "Domain " + std::to_string(d + 1);
    return qn;
}

const std::string& Questionnaire::domain_name(int domain) const {
    if (domain < 1 || domain > kDomainCount) fail(ErrorCode::Argument, "domain out of range");
    return domain_names_[domain - 1];
}

const SignalingQuestion* Questionnaire::find(std::string_view qid) const noexcept {
    for (const auto& q : questions_)
        if (q.qid == qid) return &q;
    return nullptr;
}

const SignalingQuestion& Questionnaire::question(std::string_view qid) const {
    if (auto* q = find(qid)) return *q;
    fail(ErrorCode::NotFound, "unknown question " + std::string(qid));
}

std::vector<const SignalingQuestion*> Questionnaire::domain_questions(int domain) const {
    std::vector<const SignalingQuestion*> out;
    for (const auto& q : questions_)
        if (q.domain == domain) out.push_back(&q);
    return out;
}

bool Questionnaire::can_be_gated(std::string_view qid) const {
    auto* q = find(qid);
    return q && q->gate.has_value();
}

ordered_json Questionnaire::to_json() const {
    ordered_json j;
    j["version"] = version_;
    ordered_json domains = ordered_json::array();
    for (int d = 0; d < kDomainCount; ++d) domains.push_back({{"domain", d + 1}, {"name", domain_names_[d]}});
    j["domains"] = std::move(domains);
    ordered_json qs = ordered_json::array();
    for (const auto& q : questions_) {
        ordered_json e;
        e["qid"] = q.qid;
        e["domain"] = q.domain;
        e["text"] = q.text;
        e["elaboration"] = q.elaboration;
        if (q.gate) {
            ordered_json g;
            g["combinator"] = q.gate->combinator == Combinator::Any ? "any" : "all";
            ordered_json ants = ordered_json::array();
            for (const auto& c : q.gate->antecedents) {
                ordered_json allowed = ordered_json::array();
                for (Answer a : kResponseOptions)
                    if (c.allowed.contains(a)) allowed.push_back(answer_key(a));
                ants.push_back({{"qid", c.qid}, {"allowed", std::move(allowed)}});
            }
            g["antecedents"] = std::move(ants);
            e["gate"] = std::move(g);
        } else {
            e["gate"] = nullptr;
        }
        qs.push_back(std::move(e));
    }
    j["questions"] = std::move(qs);
    return j;
}

Questionnaire load_questionnaire(const std::filesystem::path& path) {
    return Questionnaire::from_json(read_json_file(path));
}

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("ROB_DATA_DIR"); env && *env) return env;
    return ROB_DEFAULT_DATA_DIR;
}

const Questionnaire& default_questionnaire() {
    static const Questionnaire q = load_questionnaire(default_data_dir() / "questionnaire.json");
    return q;
}

bool is_active(const SignalingQuestion& q, const AnswerMap& answers_so_far) {
    if (!q.gate) return true;
    bool any = false, all = true;
    for (const auto& c : q.gate->antecedents) {
        auto it = answers_so_far.find(c.qid);
        if (it == answers_so_far.end())
            fail(ErrorCode::Sequencing, "question " + q.qid + " needs an answer to " + c.qid + " first");
        bool ok = c.allowed.contains(it->second);  // NotApplicable is never admitted
        any = any || ok;
        all = all && ok;
    }
    return q.gate->combinator == Combinator::Any ? any : all;
}

AnswerMap apply_gating(const Questionnaire& questionnaire, const AnswerMap& answers) {
    AnswerMap out;
    for (const auto& q : questionnaire.questions()) {
        bool known = true;
        if (q.gate)
            for (const auto& c : q.gate->antecedents)
                if (!out.contains(c.qid)) known = false;
        if (!known) continue;
        if (!is_active(q, out)) {
            out[q.qid] = Answer::NotApplicable;
            continue;
        }
        auto it = answers.find(q.qid);
        if (it != answers.end() && it->second != Answer::NotApplicable) out[q.qid] = it->second;
    }
    return out;
}

}  // namespace rob
