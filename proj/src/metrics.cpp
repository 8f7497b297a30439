#include "robassist/metrics.hpp"

#include <map>

#include "robassist/error.hpp"

namespace rob {

std::size_t ConfusionMatrix::total() const noexcept {
    std::size_t n = 0;
    for (const auto& row : counts)
        for (auto c : row) n += c;
    return n;
}

ConfusionMatrix confusion(std::span<const ScoredItem> items) {
    ConfusionMatrix m;
    for (const auto& it : items)
        if (it.pred) ++m.counts[static_cast<std::size_t>(it.gold)][static_cast<std::size_t>(*it.pred)];
    return m;
}

namespace {

// Pooled micro-F1 from per-class TP/FP/FN.
double micro_f1(const ConfusionMatrix& m) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t o = 0; o < 3; ++o) {
            if (o == c) {
                tp += m.counts[c][c];
            } else {
                fn += m.counts[c][o];
                fp += m.counts[o][c];
            }
        }
    }
    if (tp == 0) return 0.0;
    double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2 * p * r / (p + r);
}

std::optional<double> class_f1(const ConfusionMatrix& m, std::size_t c) {
    std::size_t tp = m.counts[c][c], fp = 0, fn = 0;
    for (std::size_t o = 0; o < 3; ++o) {
        if (o == c) continue;
        fn += m.counts[c][o];
        fp += m.counts[o][c];
    }
    if (tp + fp + fn == 0) return std::nullopt;
    if (tp == 0) return 0.0;
    double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2 * p * r / (p + r);
}

int domain_of(const std::string& qid) {
    auto p = parse_qid(qid);
    return p ? p->first : 0;
}

}  // namespace

F1Scores f1_scores(std::span<const ScoredItem> items) {
    F1Scores out;
    out.total = items.size();
    std::vector<ScoredItem> scored;
    for (const auto& it : items)
        if (it.pred) scored.push_back(it);
    out.scored = scored.size();
    if (scored.empty()) fail(ErrorCode::Argument, "benchmark run has no scored items");

    auto all = confusion(scored);
    out.micro = micro_f1(all);
    double sum = 0;
    int present = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        out.per_class[c] = class_f1(all, c);
        if (out.per_class[c]) {
            sum += *out.per_class[c];
            ++present;
        }
    }
    out.macro = sum / present;

    std::array<std::vector<ScoredItem>, kDomainCount> by_domain;
    std::map<std::string, std::vector<ScoredItem>> by_question;
    for (const auto& it : scored) {
        int d = domain_of(it.qid);
        if (d >= 1 && d <= kDomainCount) by_domain[d - 1].push_back(it);
        by_question[it.qid].push_back(it);
    }
    for (int d = 0; d < kDomainCount; ++d) {
        out.domain_n[d] = by_domain[d].size();
        if (!by_domain[d].empty()) out.domain[d] = micro_f1(confusion(by_domain[d]));
    }
    double qsum = 0;
    for (const auto& [qid, group] : by_question) qsum += micro_f1(confusion(group));
    out.macro_per_question = qsum / static_cast<double>(by_question.size());
    return out;
}

ordered_json F1Scores::to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? ordered_json(quantize(*v)) : ordered_json(nullptr); };
    ordered_json d = ordered_json::object();
    ordered_json n = ordered_json::object();
    for (int i = 0; i < kDomainCount; ++i) {
        d["D" + std::to_string(i + 1)] = opt(domain[i]);
        n["D" + std::to_string(i + 1)] = domain_n[i];
    }
    ordered_json pc = ordered_json::object();
    for (auto c : kClasses3) pc[std::string(class3_label(c))] = opt(per_class[static_cast<std::size_t>(c)]);
    return {{"domain_micro_f1", std::move(d)},
            {"domain_n", std::move(n)},
            {"micro_f1", quantize(micro)},
            {"macro_f1", quantize(macro)},
            {"macro_f1_per_question", opt(macro_per_question)},
            {"per_class_f1", std::move(pc)},
            {"scored", scored},
            {"total", total},
            {"coverage", quantize(coverage())}};
}

std::optional<ErrorSeverity> error_severity(Class3 gold, Class3 pred) noexcept {
    if (gold == pred) return std::nullopt;
    if (gold == Class3::NI || pred == Class3::NI) return ErrorSeverity::Class1;
    return ErrorSeverity::Class2;
}

std::array<Class3, 2> alternatives(Class3 c) noexcept {
    switch (c) {
        case Class3::NI: return {Class3::NPN, Class3::YPY};
        case Class3::NPN: return {Class3::NI, Class3::YPY};
        case Class3::YPY: return {Class3::NI, Class3::NPN};
    }
    return {Class3::NI, Class3::NI};
}

SeverityTable severity_breakdown(std::span<const ScoredItem> items) {
    auto m = confusion(items);
    SeverityTable t;
    for (auto c : kClasses3) {
        auto ci = static_cast<std::size_t>(c);
        auto [a1, a2] = alternatives(c);
        auto i1 = static_cast<std::size_t>(a1), i2 = static_cast<std::size_t>(a2);
        auto& row = t[ci];
        row.cls = c;
        row.tp = m.counts[ci][ci];
        row.fp1 = m.counts[i1][ci];
        row.fp2 = m.counts[i2][ci];
        row.fn1 = m.counts[ci][i1];
        row.fn2 = m.counts[ci][i2];
    }
    return t;
}

std::array<SeverityCells<double>, 3> average_severity(std::span<const SeverityTable> tables) {
    std::array<SeverityCells<double>, 3> out{};
    for (auto c : kClasses3) out[static_cast<std::size_t>(c)].cls = c;
    if (tables.empty()) return out;
    auto n = static_cast<double>(tables.size());
    for (const auto& t : tables) {
        for (std::size_t c = 0; c < 3; ++c) {
            out[c].tp += static_cast<double>(t[c].tp) / n;
            out[c].fp1 += static_cast<double>(t[c].fp1) / n;
            out[c].fp2 += static_cast<double>(t[c].fp2) / n;
            out[c].fn1 += static_cast<double>(t[c].fn1) / n;
            out[c].fn2 += static_cast<double>(t[c].fn2) / n;
        }
    }
    return out;
}

ordered_json severity_to_json(const SeverityTable& t) {
    ordered_json rows = ordered_json::array();
    for (const auto& r : t) {
        auto [a1, a2] = alternatives(r.cls);
        rows.push_back({{"class", class3_label(r.cls)},
                        {"tp", r.tp},
                        {"fp_class1", r.fp1},
                        {"fp_class2", r.fp2},
                        {"fn_class1", r.fn1},
                        {"fn_class2", r.fn2},
                        {"class1_alternative", class3_label(a1)},
                        {"class2_alternative", class3_label(a2)}});
    }
    return rows;
}

double cohens_kappa_4class(std::span<const Class4> a, std::span<const Class4> b) {
    if (a.empty()) fail(ErrorCode::Argument, "kappa needs at least one item");
    if (a.size() != b.size())
        fail(ErrorCode::Argument, "kappa raters disagree on item count: " + std::to_string(a.size()) + " vs " +
                                      std::to_string(b.size()));
    std::array<std::array<std::size_t, 4>, 4> table{};
    for (std::size_t i = 0; i < a.size(); ++i) ++table[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])];
    const double n = static_cast<double>(a.size());
    std::size_t agree = 0;
    double pe = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        agree += table[i][i];
        std::size_t ra = 0, rb = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            ra += table[i][j];
            rb += table[j][i];
        }
        pe += static_cast<double>(ra) * static_cast<double>(rb) / (n * n);
    }
    if (agree == a.size()) return 1.0;  // exact agreement, whatever the marginals
    const double po = static_cast<double>(agree) / n;
    if (pe >= 1.0) return 1.0;  // both raters constant on the same label
    return (po - pe) / (1.0 - pe);
}

}  // namespace rob
