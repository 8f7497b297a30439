#include <doctest.h>

#include <algorithm>
#include <chrono>

#include "robassist/error.hpp"
#include "robassist/rob_logic.hpp"
#include "rob_oracles.hpp"

using namespace rob;
using namespace rob::oracle;

namespace {

const Questionnaire& qn() { return default_questionnaire(); }

}  // namespace

TEST_CASE("bundled tables validate cleanly") {
    for (int d = 1; d <= 5; ++d) {
        auto v = validate_rule_table(default_rule_set().table(d), qn());
        INFO("domain " << d << ": " << (v.empty() ? std::string{} : v.front()));
        CHECK(v.empty());
    }
}

TEST_CASE("domain judgments match both oracles on every gate-consistent combination") {
    auto start = std::chrono::steady_clock::now();
    std::size_t total = 0;
    for (int d = 1; d <= 5; ++d) {
        const auto& table = default_rule_set().table(d);
        auto raw = rule_json(ROB_DATA_DIR_DEFAULT, d)["node"];
        std::size_t mismatches = 0;
        auto n = for_each_consistent_assignment(qn(), d, [&](const AnswerMap& m) {
            RiskLevel got = domain_judgment(table, m);
            if (std::string(risk_key(got)) != walk_json(raw, m)) ++mismatches;
            if (got != flowchart(d, m)) ++mismatches;
        });
        INFO("domain " << d);
        CHECK(mismatches == 0);
        CHECK(n > 0);
        total += n;
    }
    // 27 + D2 + D3 + D4 + 125, all bounded by 5^7
    CHECK(total < 5u * 78125u);
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed < 1.0);
}

TEST_CASE("assignment counts are the gate-consistent ones") {
    // D1 and D5 have no gates
    CHECK(for_each_consistent_assignment(qn(), 1, [](const AnswerMap&) {}) == 125);
    CHECK(for_each_consistent_assignment(qn(), 5, [](const AnswerMap&) {}) == 125);
    // D3 by hand: 3.1 Y/PY (2 ways) stops the chain: 2*1*1*1 = 2;
    // 3.1 N/PN/NI (3): 3.2 Y/PY/NI (3) -> 3.3 NA -> 3.4 NA: 9;
    // 3.2 N/PN (2): 3.3 N/PN (2) -> 4 paths x3 = 12; 3.3 Y/PY/NI (3) x 3.4 (5): 15*2*3 = 90
    CHECK(for_each_consistent_assignment(qn(), 3, [](const AnswerMap&) {}) == 2 + 9 + 12 + 90);
}

TEST_CASE("missing answer is a sequencing error") {
    AnswerMap m = {{"4.2", Answer::No}, {"4.3", Answer::No}};
    try {
        domain_judgment(default_rule_set().table(4), m);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Sequencing);
        CHECK(std::string(e.what()).find("4.1") != std::string::npos);
    }
}

TEST_CASE("flipping 4.1 from N/PN to Y/PY never lowers the domain 4 level") {
    const auto& t = default_rule_set().table(4);
    std::size_t checked = 0;
    for_each_consistent_assignment(qn(), 4, [&](const AnswerMap& m) {
        if (!npn(m.at("4.1"))) return;
        RiskLevel before = domain_judgment(t, m);
        for (Answer up : {Answer::Yes, Answer::ProbablyYes}) {
            AnswerMap flipped = apply_gating(qn(), [&] {
                AnswerMap f = m;
                f["4.1"] = up;
                return f;
            }());
            CHECK(domain_judgment(t, flipped) >= before);
            ++checked;
        }
    });
    CHECK(checked > 0);
}

TEST_CASE("overall judgment policy") {
    using R = RiskLevel;
    CHECK(overall_judgment({R::High, R::High, R::High, R::Low, R::Low}) == R::High);
    CHECK(overall_judgment({R::Low, R::Low, R::Low, R::Low, R::Low}) == R::Low);
    CHECK(overall_judgment({R::SomeConcerns, R::Low, R::Low, R::Low, R::Low}) == R::SomeConcerns);
    OverallRule esc{true, 3};
    CHECK(overall_judgment({R::SomeConcerns, R::SomeConcerns, R::Low, R::Low, R::Low}, esc) == R::SomeConcerns);
    CHECK(overall_judgment({R::SomeConcerns, R::SomeConcerns, R::SomeConcerns, R::Low, R::Low}, esc) == R::High);
}

TEST_CASE("overall judgment is invariant under domain permutation") {
    using R = RiskLevel;
    const std::array<R, 3> levels = {R::Low, R::SomeConcerns, R::High};
    for (int code = 0; code < 243; ++code) {
        DomainLevels d{};
        int c = code;
        for (auto& x : d) {
            x = levels[c % 3];
            c /= 3;
        }
        RiskLevel base = overall_judgment(d);
        auto p = d;
        std::sort(p.begin(), p.end());
        do {
            CHECK(overall_judgment(p) == base);
        } while (std::next_permutation(p.begin(), p.end()));
    }
}

TEST_CASE("validator reports gaps") {
    json j = {{"domain", 1},
              {"node",
               {{"qid", "1.1"},
                {"branches",
                 {{{"classes", {"yes"}}, {"next", {{"risk", "low"}}}},
                  {{"classes", {"probably_yes", "probably_no"}}, {"next", {{"risk", "high"}}}}}}}}};
    auto v = validate_rule_table(RuleTable::from_json(j), qn());
    REQUIRE(v.size() == 2);
    CHECK(v[0].find("1.1=no") != std::string::npos);
    CHECK(v[1].find("1.1=no_information") != std::string::npos);
    try {
        domain_judgment(RuleTable::from_json(j), {{"1.1", Answer::No}});
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Totality);
    }
}

TEST_CASE("validator reports cross-domain nodes, overlaps, and unrouted NotApplicable") {
    json cross = rule_json(ROB_DATA_DIR_DEFAULT, 4);
    cross["node"]["branches"][1]["next"]["qid"] = "3.1";
    auto v = validate_rule_table(RuleTable::from_json(cross), qn());
    REQUIRE_FALSE(v.empty());
    CHECK(v[0].find("cross-domain") != std::string::npos);

    json overlap = rule_json(ROB_DATA_DIR_DEFAULT, 5);
    overlap["node"]["branches"][0]["classes"].push_back("no");
    v = validate_rule_table(RuleTable::from_json(overlap), qn());
    REQUIRE_FALSE(v.empty());
    CHECK(v[0].find("overlap at node 5.2") != std::string::npos);

    json na = rule_json(ROB_DATA_DIR_DEFAULT, 3);
    // 3.1 -> 3.2 node: drop not_applicable from its first branch
    auto& classes = na["node"]["branches"][1]["next"]["branches"][0]["classes"];
    classes.erase(std::remove(classes.begin(), classes.end(), json("not_applicable")), classes.end());
    v = validate_rule_table(RuleTable::from_json(na), qn());
    REQUIRE_FALSE(v.empty());
    CHECK(v[0].find("node 3.2 can be gated") != std::string::npos);
}

TEST_CASE("malformed rule files are schema errors") {
    CHECK_THROWS_AS(RuleTable::from_json(json::parse(R"({"domain":1,"node":{"qid":"1.1"}})")), Error);
    CHECK_THROWS_AS(RuleTable::from_json(json::parse(R"({"domain":1,"node":{"risk":"medium"}})")), Error);
    CHECK_THROWS_AS(
        RuleTable::from_json(json::parse(
            R"({"domain":1,"node":{"qid":"1.1","branches":[{"classes":["maybe"],"next":{"risk":"low"}}]}})")),
        Error);
}

TEST_CASE("RuleSet judges all five domains") {
    AnswerMap all_good = {
        {"1.1", Answer::Yes}, {"1.2", Answer::Yes}, {"1.3", Answer::No},
        {"2.1", Answer::No},  {"2.2", Answer::No},  {"2.6", Answer::Yes},
        {"3.1", Answer::Yes}, {"4.1", Answer::No},  {"4.2", Answer::No},
        {"4.3", Answer::No},  {"5.1", Answer::Yes}, {"5.2", Answer::No}, {"5.3", Answer::No}};
    auto full = apply_gating(qn(), all_good);
    CHECK(full.size() == 22);
    auto levels = default_rule_set().judge(full);
    for (auto l : levels) CHECK(l == RiskLevel::Low);
    CHECK(overall_judgment(levels) == RiskLevel::Low);
}
