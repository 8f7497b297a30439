#pragma once

// Independent reference implementations shared by the unit and
// acceptance suites. None of these call the code they check.

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "robassist/metrics.hpp"
#include "robassist/rob_logic.hpp"
#include "robassist/util.hpp"

namespace rob::oracle {

inline json rule_json(const std::string& data_dir, int d) {
    return read_json_file(data_dir + "/rules/domain" + std::to_string(d) + ".json");
}

// Oracle 1: walks the raw JSON directly, without the compiled table.
inline std::string walk_json(const json& node, const AnswerMap& answers) {
    const json* n = &node;
    while (!n->contains("risk")) {
        Answer a = answers.at((*n)["qid"].get<std::string>());
        const json* next = nullptr;
        for (const auto& b : (*n)["branches"])
            for (const auto& c : b["classes"])
                if (c.get<std::string>() == answer_key(a)) next = &b["next"];
        if (!next) return "gap";
        n = next;
    }
    return (*n)["risk"].get<std::string>();
}

// Oracle 2: the ROB2 algorithms written out as plain conditionals.
inline bool ypy(Answer a) { return a == Answer::Yes || a == Answer::ProbablyYes; }
inline bool npn(Answer a) { return a == Answer::No || a == Answer::ProbablyNo; }
inline bool ni(Answer a) { return a == Answer::NoInformation; }

inline RiskLevel flowchart(int d, const AnswerMap& m) {
    auto at = [&](const char* q) { return m.at(q); };
    using R = RiskLevel;
    switch (d) {
        case 1: {
            if (npn(at("1.2"))) return R::High;
            if (ni(at("1.2"))) return ypy(at("1.3")) ? R::High : R::SomeConcerns;
            if (npn(at("1.1"))) return R::SomeConcerns;
            return ypy(at("1.3")) ? R::SomeConcerns : R::Low;
        }
        case 2: {
            R p1;
            if (npn(at("2.1")) && npn(at("2.2"))) p1 = R::Low;
            else if (npn(at("2.3"))) p1 = R::Low;
            else if (ni(at("2.3"))) p1 = R::SomeConcerns;
            else if (npn(at("2.4"))) p1 = R::SomeConcerns;
            else if (ypy(at("2.5"))) p1 = R::SomeConcerns;
            else p1 = R::High;
            R p2;
            if (ypy(at("2.6"))) p2 = R::Low;
            else if (npn(at("2.7"))) p2 = R::SomeConcerns;
            else p2 = R::High;
            return std::max(p1, p2);
        }
        case 3: {
            if (ypy(at("3.1"))) return R::Low;
            if (ypy(at("3.2"))) return R::Low;
            if (at("3.3") == Answer::NotApplicable) return R::High;  // 3.2 = NI
            if (npn(at("3.3"))) return R::Low;
            return npn(at("3.4")) ? R::SomeConcerns : R::High;
        }
        case 4: {
            if (ypy(at("4.1")) || ypy(at("4.2"))) return R::High;
            bool clean = npn(at("4.2"));
            if (npn(at("4.3"))) return clean ? R::Low : R::SomeConcerns;
            if (npn(at("4.4"))) return clean ? R::Low : R::SomeConcerns;
            return npn(at("4.5")) ? R::SomeConcerns : R::High;
        }
        case 5: {
            if (ypy(at("5.2")) || ypy(at("5.3"))) return R::High;
            if (ni(at("5.2")) || ni(at("5.3"))) return R::SomeConcerns;
            return ypy(at("5.1")) ? R::Low : R::SomeConcerns;
        }
    }
    throw std::logic_error("bad domain");
}

// Brute-force references, written without the confusion matrix.
inline double ref_class_f1(const std::vector<ScoredItem>& items, Class3 c, bool& present) {
    double tp = 0, fp = 0, fn = 0;
    for (const auto& it : items) {
        if (!it.pred) continue;
        if (it.gold == c && *it.pred == c) tp++;
        if (it.gold != c && *it.pred == c) fp++;
        if (it.gold == c && *it.pred != c) fn++;
    }
    present = tp + fp + fn > 0;
    if (tp == 0) return 0;
    return 2 * tp / (2 * tp + fp + fn);
}

inline double ref_accuracy(const std::vector<ScoredItem>& items) {
    double ok = 0, n = 0;
    for (const auto& it : items) {
        if (!it.pred) continue;
        n++;
        ok += it.gold == *it.pred;
    }
    return ok / n;
}

inline double ref_kappa(const std::vector<Class4>& a, const std::vector<Class4>& b) {
    const double n = static_cast<double>(a.size());
    double agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == b[i];
    double expected = 0;
    for (int k = 0; k < 4; ++k) {
        double ca = static_cast<double>(std::count(a.begin(), a.end(), static_cast<Class4>(k)));
        double cb = static_cast<double>(std::count(b.begin(), b.end(), static_cast<Class4>(k)));
        expected += ca * cb / (n * n);
    }
    if (expected == 1.0) return 1.0;
    return (agree / n - expected) / (1 - expected);
}

// Per-class severity cells counted item by item.
struct SeverityRef {
    std::size_t tp = 0, fp1 = 0, fp2 = 0, fn1 = 0, fn2 = 0;
};
inline SeverityRef ref_severity(const std::vector<ScoredItem>& items, Class3 c) {
    SeverityRef r;
    for (const auto& it : items) {
        if (!it.pred) continue;
        if (it.gold == c && *it.pred == c) r.tp++;
        if (it.gold != c && *it.pred == c) (it.gold == alternatives(c)[0] ? r.fp1 : r.fp2)++;
        if (it.gold == c && *it.pred != c) (*it.pred == alternatives(c)[0] ? r.fn1 : r.fn2)++;
    }
    return r;
}

inline std::vector<ScoredItem> random_run(std::mt19937& rng) {
    static const char* qids[] = {"1.1", "1.2", "2.1", "2.6", "3.1", "3.3", "4.1", "4.5", "5.1", "5.3"};
    std::uniform_int_distribution<int> size(1, 40), cls(0, 2), q(0, 9), miss(0, 9);
    std::vector<ScoredItem> items(static_cast<std::size_t>(size(rng)));
    for (auto& it : items) {
        it.doc_id = "d";
        it.qid = qids[q(rng)];
        it.gold = static_cast<Class3>(cls(rng));
        if (miss(rng) != 0) it.pred = static_cast<Class3>(cls(rng));
    }
    if (std::none_of(items.begin(), items.end(), [](const auto& i) { return i.pred.has_value(); }))
        items[0].pred = Class3::NI;
    return items;
}

}  // namespace rob::oracle
