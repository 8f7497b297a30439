#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robassist/document.hpp"
#include "robassist/metrics.hpp"
#include "robassist/retrieval.hpp"
#include "robassist/rob_logic.hpp"
#include "robassist/store.hpp"

namespace rob {

// On-disk layout:
//   <root>/documents/*.json      parsed trial reports (one per file)
//   <root>/assessments/*.json    session exports (object or array), *.jsonl one per line
//   <root>/vectors.json          optional reference embedding sidecar
struct Dataset {
    std::filesystem::path root;
    std::map<std::string, TrialDocument> documents;
    std::vector<AssessmentSession> sessions;  // sorted by session_id
    std::optional<VectorSidecar> sidecar;

    const TrialDocument* document(const std::string& doc_id) const;
    std::vector<AssessmentSession> with_provenance(Provenance p) const;
};

inline constexpr const char* kDatasetEnv = "ROB_DATASET_DIR";

// Shown whenever the dataset is missing.
std::string dataset_instructions(const std::filesystem::path& root);

// NotFound (with instructions) when root or its subdirectories are missing;
// Import/Parse errors name the offending file.
Dataset load_dataset(const std::filesystem::path& root);

// One scorable gold label: a non-NotApplicable final answer of a manual
// session. Ordered by session_id, then questionnaire order.
struct GoldItem {
    std::string session_id;
    std::string doc_id;
    std::string qid;
    Answer answer = Answer::NoInformation;
    Class3 gold = Class3::NI;
    std::optional<std::size_t> evidence;
};
std::vector<GoldItem> gold_items(const Dataset& ds, const Questionnaire& qn);

// Per-domain item counts: all gold items, and those with annotator evidence.
struct GoldCounts {
    std::array<std::size_t, kDomainCount> total{};
    std::array<std::size_t, kDomainCount> oracle{};
    ordered_json to_json() const;
};
GoldCounts gold_counts(std::span<const GoldItem> items);

// Stored judgments tabulated per risk level (low, some concerns, high).
struct JudgmentDistribution {
    std::array<std::size_t, 3> overall{};
    std::array<std::array<std::size_t, 3>, kDomainCount> domains{};
    std::size_t sessions = 0;
    std::size_t without_judgments = 0;
    ordered_json to_json() const;
};
JudgmentDistribution judgment_distribution(std::span<const AssessmentSession> sessions);

struct ConsistencyMismatch {
    std::string session_id;
    std::string doc_id;
    int domain = 0;
    RiskLevel stored = RiskLevel::Low;
    std::optional<RiskLevel> derived;  // absent when the rule table rejects the answers
    std::string error;
};

// Domain judgments re-derived from stored answers vs the stored ones. A
// domain is checked when it has a stored judgment and all its answers.
struct ConsistencyReport {
    std::array<std::size_t, kDomainCount> checked{};
    std::array<std::size_t, kDomainCount> mismatched{};
    std::size_t sessions = 0;
    std::vector<ConsistencyMismatch> mismatches;
    ordered_json to_json() const;
};
ConsistencyReport consistency_report(std::span<const AssessmentSession> sessions, const Questionnaire& qn,
                                     const RuleSet& rules);

// Papers with manual sessions from two or more annotators; the first two
// annotators (by id) of each paper are paired on the questions both
// answered.
struct DualAnnotation {
    std::vector<std::string> doc_ids;
    std::vector<Class4> a, b;
    ordered_json to_json() const;  // includes kappa when non-empty
};
DualAnnotation dual_annotations(std::span<const AssessmentSession> sessions, const Questionnaire& qn);

struct RetrievalEval {
    std::string retriever;
    std::vector<std::size_t> ks;
    std::vector<double> recall;  // parallel to ks
    std::size_t questions = 0;
    std::size_t documents = 0;
    std::size_t missing_documents = 0;
    ordered_json to_json() const;
};

// recall@k of annotator evidence over manual sessions. kind: "bm25",
// "dense" (embedder required) or "sidecar" (dataset vectors required).
RetrievalEval eval_retrieval(const Dataset& ds, const Questionnaire& qn, const std::string& kind,
                             std::span<const std::size_t> ks, const Embedder* embedder = nullptr,
                             Bm25Params params = {}, std::size_t jobs = 1);

// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception
// is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace rob
