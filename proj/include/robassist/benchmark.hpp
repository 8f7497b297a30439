#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robassist/clock.hpp"
#include "robassist/dataset.hpp"
#include "robassist/llm.hpp"
#include "robassist/metrics.hpp"
#include "robassist/prompt.hpp"

namespace rob {

struct BenchmarkOptions {
    ContextMode mode = ContextMode::top_k(3);
    std::string retriever = "bm25";     // bm25 | dense | sidecar (TopK only)
    const Embedder* embedder = nullptr;  // for "dense"
    bool fewshot = false;
    std::uint64_t seed = 0;  // few-shot sampling
    std::size_t jobs = 1;    // documents in flight
    GenerationConfig generation;
    int unparseable_retries = 1;
    // JSON lines; responses found here are re-scored without an LLM call.
    std::filesystem::path cache_path;
    ordered_json to_json() const;
};

// One evaluated gold item, kept for audit.
struct BenchmarkRecord {
    std::string session_id;
    std::string doc_id;
    std::string qid;
    Class3 gold = Class3::NI;
    std::optional<Answer> answer;
    std::string prompt_sha256;
    std::string raw_response;
    bool cached = false;
    std::optional<ErrorCode> error_code;
    std::string error;
    ordered_json to_json() const;
};

struct BenchmarkResult {
    BenchmarkRun run;
    std::vector<BenchmarkRecord> records;
    GoldCounts counts;                 // of the evaluated items
    std::vector<ItemKey> fewshot_pool;  // (doc_id, qid) removed as examples
    std::size_t llm_calls = 0;
    std::size_t cache_hits = 0;
    // Table-2-shaped report: scores, counts, coverage, metadata.
    ordered_json report() const;
};

// Evaluates every gold item of the manual sessions (Oracle mode: only those
// with annotator evidence). Items are asked independently with the mode's
// context; results come back in gold order whatever `jobs` is.
BenchmarkResult run_benchmark(const Dataset& ds, const Questionnaire& qn, LLMClient& llm,
                              const BenchmarkOptions& options, const Clock& clock = system_clock());

// Few-shot examples: per qid, one evidence-bearing gold item per class,
// drawn with `seed`. Pure function of (items, seed).
std::map<std::string, std::vector<FewShotExample>> sample_fewshot(const Dataset& ds, const Questionnaire& qn,
                                                                  std::span<const GoldItem> items,
                                                                  std::uint64_t seed);

ordered_json run_to_json(const BenchmarkRun& run);
BenchmarkRun run_from_json(const json& j);

// One row per run: model, mode, D1..D5, micro, macro, per-question macro,
// coverage, scored, total.
std::string table2_csv(std::span<const BenchmarkRun> runs);
ordered_json table2_json(std::span<const BenchmarkRun> runs);

// Severity tables grouped by `axis`: "model" averages a model's runs cell
// by cell; "run" keeps one table per run.
ordered_json severity_report(std::span<const BenchmarkRun> runs, const std::string& axis);
std::string severity_csv(std::span<const BenchmarkRun> runs, const std::string& axis);

}  // namespace rob
