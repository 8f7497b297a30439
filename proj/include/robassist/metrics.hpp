#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robassist/answer.hpp"
#include "robassist/prompt.hpp"
#include "robassist/questionnaire.hpp"
#include "robassist/util.hpp"

namespace rob {

// One scored question. A missing prediction (failed or unparseable call)
// lowers coverage and is left out of every score.
struct ScoredItem {
    std::string doc_id;
    std::string qid;
    Class3 gold = Class3::NI;
    std::optional<Class3> pred;
};

struct BenchmarkRun {
    std::string model_id;
    ContextMode mode;
    std::vector<ScoredItem> items;
    ordered_json metadata = ordered_json::object();
};

// counts[gold][pred]
struct ConfusionMatrix {
    std::array<std::array<std::size_t, 3>, 3> counts{};
    std::size_t total() const noexcept;
};
ConfusionMatrix confusion(std::span<const ScoredItem> items);

struct F1Scores {
    std::array<std::optional<double>, kDomainCount> domain{};  // micro-F1 per domain
    std::array<std::size_t, kDomainCount> domain_n{};
    double micro = 0.0;
    double macro = 0.0;                                    // mean over present classes
    std::array<std::optional<double>, 3> per_class{};      // nullopt: absent in gold and prediction
    std::optional<double> macro_per_question;              // mean of per-question micro-F1
    std::size_t scored = 0;
    std::size_t total = 0;
    double coverage() const noexcept { return total ? static_cast<double>(scored) / static_cast<double>(total) : 0.0; }
    ordered_json to_json() const;
};

// Argument error when nothing is scorable.
F1Scores f1_scores(std::span<const ScoredItem> items);

enum class ErrorSeverity { Class1, Class2 };
// NI on either side is Class1; a Y/PY <-> N/PN swap is Class2.
std::optional<ErrorSeverity> error_severity(Class3 gold, Class3 pred) noexcept;

// The two other classes of `c`, in column order: NI -> (N/PN, Y/PY),
// N/PN -> (NI, Y/PY), Y/PY -> (NI, N/PN). For N/PN and Y/PY the first is
// the Class1 (NI) alternative and the second the Class2 swap.
std::array<Class3, 2> alternatives(Class3 c) noexcept;

template <typename T>
struct SeverityCells {
    Class3 cls = Class3::NI;
    T tp{}, fp1{}, fp2{}, fn1{}, fn2{};
};
using SeverityRow = SeverityCells<std::size_t>;
using SeverityTable = std::array<SeverityRow, 3>;  // indexed by Class3

// FP of c split by the gold class, FN of c split by the predicted class.
SeverityTable severity_breakdown(std::span<const ScoredItem> items);
// Cell-wise mean over runs (e.g. over k in {1,3,5} and full paper).
std::array<SeverityCells<double>, 3> average_severity(std::span<const SeverityTable> tables);
ordered_json severity_to_json(const SeverityTable& t);

// Standard Cohen's kappa over the four labels; argument error on empty or
// unequal inputs. Both raters constant and equal gives 1.
double cohens_kappa_4class(std::span<const Class4> a, std::span<const Class4> b);

}  // namespace rob
