#include "robassist/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

#include "robassist/error.hpp"
#include "robassist/qa.hpp"

namespace rob {

ordered_json BenchmarkOptions::to_json() const {
    return {{"mode", mode.to_string()},
            {"retriever", mode.kind == ContextMode::Kind::TopK ? ordered_json(retriever) : ordered_json(nullptr)},
            {"embedder", embedder ? ordered_json(embedder->model_id()) : ordered_json(nullptr)},
            {"fewshot", fewshot},
            {"seed", seed},
            {"temperature", generation.temperature},
            {"max_output_tokens", generation.max_output_tokens},
            {"context_window_tokens", generation.context_window_tokens},
            {"unparseable_retries", unparseable_retries}};
}

ordered_json BenchmarkRecord::to_json() const {
    auto pred = answer ? to_class3(*answer) : std::nullopt;
    ordered_json j{{"session_id", session_id},
                   {"doc_id", doc_id},
                   {"qid", qid},
                   {"gold", class3_label(gold)},
                   {"pred", pred ? ordered_json(class3_label(*pred)) : ordered_json(nullptr)},
                   {"answer", answer ? ordered_json(answer_key(*answer)) : ordered_json(nullptr)},
                   {"prompt_sha256", prompt_sha256},
                   {"raw_response_digest", raw_response.empty() ? std::string() : sha256_hex(raw_response)},
                   {"cached", cached}};
    if (error_code) {
        j["error_code"] = to_string(*error_code);
        j["error"] = error;
    }
    return j;
}

ordered_json run_to_json(const BenchmarkRun& run) {
    ordered_json items = ordered_json::array();
    for (const auto& it : run.items)
        items.push_back({{"doc_id", it.doc_id},
                         {"qid", it.qid},
                         {"gold", class3_label(it.gold)},
                         {"pred", it.pred ? ordered_json(class3_label(*it.pred)) : ordered_json(nullptr)}});
    return {{"model_id", run.model_id}, {"mode", run.mode.to_string()}, {"metadata", run.metadata}, {"items", items}};
}

BenchmarkRun run_from_json(const json& j) {
    try {
        BenchmarkRun run;
        run.model_id = j.at("model_id").get<std::string>();
        run.mode = ContextMode::parse(j.at("mode").get<std::string>());
        if (j.contains("metadata")) run.metadata = j["metadata"];
        for (const auto& e : j.at("items")) {
            ScoredItem it;
            it.doc_id = e.at("doc_id").get<std::string>();
            it.qid = e.at("qid").get<std::string>();
            auto g = class3_from_label(e.at("gold").get<std::string>());
            if (!g) fail(ErrorCode::Schema, "run item has unknown gold label " + e["gold"].dump());
            it.gold = *g;
            if (e.contains("pred") && !e["pred"].is_null()) {
                auto p = class3_from_label(e["pred"].get<std::string>());
                if (!p) fail(ErrorCode::Schema, "run item has unknown prediction " + e["pred"].dump());
                it.pred = *p;
            }
            run.items.push_back(std::move(it));
        }
        return run;
    } catch (const json::exception& e) {
        fail(ErrorCode::Schema, std::string("malformed benchmark run: ") + e.what());
    }
}

std::map<std::string, std::vector<FewShotExample>> sample_fewshot(const Dataset& ds, const Questionnaire& qn,
                                                                  std::span<const GoldItem> items,
                                                                  std::uint64_t seed) {
    // mt19937_64's output sequence is fixed by the standard; reducing it
    // with % keeps the draw identical across standard libraries.
    std::mt19937_64 rng(seed);
    std::map<std::string, std::vector<FewShotExample>> out;
    for (const auto& q : qn.questions()) {
        for (auto c : kClasses3) {
            std::vector<const GoldItem*> pool;
            for (const auto& it : items) {
                if (it.qid != q.qid || it.gold != c || !it.evidence) continue;
                const auto* doc = ds.document(it.doc_id);
                if (doc && *it.evidence < doc->paragraphs.size()) pool.push_back(&it);
            }
            if (pool.empty()) continue;
            const auto& pick = *pool[rng() % pool.size()];
            const auto& para = ds.document(pick.doc_id)->paragraphs[*pick.evidence];
            out[q.qid].push_back({pick.doc_id, q.qid, q.text, para.text, pick.answer});
        }
    }
    return out;
}

namespace {

struct CacheEntry {
    std::string raw_response;
};

std::string cache_key(const std::string& model, const std::string& prompt_sha) { return model + "\n" + prompt_sha; }

std::map<std::string, CacheEntry> load_cache(const std::filesystem::path& path) {
    std::map<std::string, CacheEntry> out;
    if (path.empty() || !std::filesystem::exists(path)) return out;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        auto j = parse_json(line, path.filename().string() + ":" + std::to_string(n));
        out[cache_key(j.at("model_id").get<std::string>(), j.at("prompt_sha256").get<std::string>())] = {
            j.at("raw_response").get<std::string>()};
    }
    return out;
}

}  // namespace

BenchmarkResult run_benchmark(const Dataset& ds, const Questionnaire& qn, LLMClient& llm,
                              const BenchmarkOptions& options, const Clock& clock) {
    const bool oracle = options.mode.kind == ContextMode::Kind::Oracle;
    const bool topk = options.mode.kind == ContextMode::Kind::TopK;
    if (topk && options.retriever == "dense" && !options.embedder)
        fail(ErrorCode::Configuration, "dense retrieval needs an embedder");
    if (topk && options.retriever == "sidecar" && !ds.sidecar)
        fail(ErrorCode::Configuration, "sidecar retrieval needs " + (ds.root / "vectors.json").string());
    if (topk && options.retriever != "bm25" && options.retriever != "dense" && options.retriever != "sidecar")
        fail(ErrorCode::Argument, "unknown retriever '" + options.retriever + "' (bm25, dense, sidecar)");

    const std::string model = options.generation.model.empty() ? llm.model_id() : options.generation.model;
    auto all = gold_items(ds, qn);
    BenchmarkResult result;

    std::map<std::string, std::vector<FewShotExample>> examples;
    if (options.fewshot) {
        examples = sample_fewshot(ds, qn, all, options.seed);
        for (const auto& [qid, ex] : examples)
            for (const auto& e : ex) result.fewshot_pool.emplace_back(e.doc_id, e.qid);
        std::sort(result.fewshot_pool.begin(), result.fewshot_pool.end());
        result.fewshot_pool.erase(std::unique(result.fewshot_pool.begin(), result.fewshot_pool.end()),
                                  result.fewshot_pool.end());
    }
    std::vector<GoldItem> items;
    for (auto& it : all) {
        if (oracle && !it.evidence) continue;
        if (std::binary_search(result.fewshot_pool.begin(), result.fewshot_pool.end(), ItemKey{it.doc_id, it.qid}))
            continue;
        items.push_back(std::move(it));
    }
    result.counts = gold_counts(items);

    std::map<std::string, std::vector<ItemKey>> eval_keys;  // per qid
    if (options.fewshot)
        for (const auto& it : items) eval_keys[it.qid].emplace_back(it.doc_id, it.qid);

    // Work unit: one document and all of its items.
    std::vector<std::string> doc_order;
    std::map<std::string, std::vector<std::size_t>> by_doc;
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto [pos, fresh] = by_doc.try_emplace(items[i].doc_id);
        if (fresh) doc_order.push_back(items[i].doc_id);
        pos->second.push_back(i);
    }

    auto cache = load_cache(options.cache_path);
    std::mutex cache_mu;
    std::atomic<std::size_t> calls{0}, hits{0};
    result.records.resize(items.size());
    static const HashEmbedder bm25_only(8);

    parallel_for(doc_order.size(), options.jobs, [&](std::size_t d) {
        const auto& doc_id = doc_order[d];
        const auto& idxs = by_doc.at(doc_id);
        const auto* doc = ds.document(doc_id);
        auto fail_all = [&](ErrorCode code, const std::string& msg) {
            for (auto i : idxs) {
                auto& r = result.records[i];
                r.error_code = code;
                r.error = msg;
            }
        };
        for (auto i : idxs) {
            auto& r = result.records[i];
            r.session_id = items[i].session_id;
            r.doc_id = items[i].doc_id;
            r.qid = items[i].qid;
            r.gold = items[i].gold;
        }
        if (!doc) return fail_all(ErrorCode::NotFound, "document " + doc_id + " is not in the dataset");

        ParagraphIndex index;
        Retriever retriever = [](const SignalingQuestion&, std::size_t) { return std::vector<RetrievalResult>{}; };
        try {
            if (topk && options.retriever == "bm25") {
                index = build_index(*doc, bm25_only);
                retriever = bm25_retriever(index);
            } else if (topk && options.retriever == "dense") {
                index = build_index(*doc, *options.embedder);
                retriever = dense_retriever(index, *options.embedder);
            } else if (topk) {
                index = build_index_from_vectors(*doc, ds.sidecar->document_vectors(*doc), ds.sidecar->model_id());
                retriever = sidecar_retriever(index, *ds.sidecar);
            }
        } catch (const Error& e) {
            return fail_all(e.code(), e.what());
        }

        QaOptions qa;
        qa.mode = options.mode;
        qa.generation = options.generation;
        qa.fewshot = options.fewshot;
        qa.unparseable_retries = options.unparseable_retries;
        for (auto i : idxs) {
            const auto& item = items[i];
            auto& r = result.records[i];
            try {
                const auto& q = qn.question(item.qid);
                qa.oracle_evidence.clear();
                if (item.evidence) qa.oracle_evidence[item.qid] = *item.evidence;
                qa.fewshot_examples.clear();
                if (options.fewshot) {
                    if (auto ex = examples.find(item.qid); ex != examples.end())
                        qa.fewshot_examples[item.qid] = ex->second;
                    qa.evaluation_items = eval_keys[item.qid];
                }
                auto prepared = prepare_prompt(*doc, q, retriever, qa);
                r.prompt_sha256 = sha256_hex(prepared.text);
                auto key = cache_key(model, r.prompt_sha256);
                {
                    std::lock_guard lock(cache_mu);
                    if (auto c = cache.find(key); c != cache.end()) {
                        r.raw_response = c->second.raw_response;
                        r.cached = true;
                    }
                }
                if (r.cached) {
                    ++hits;
                    r.answer = parse_answer(r.raw_response).answer;
                    continue;
                }
                for (int attempt = 0;; ++attempt) {
                    ++calls;
                    r.raw_response = llm.complete(prepared.text, options.generation);
                    try {
                        r.answer = parse_answer(r.raw_response).answer;
                        break;
                    } catch (const Error& e) {
                        if (e.code() != ErrorCode::Unparseable || attempt >= options.unparseable_retries) throw;
                    }
                }
                // Only parseable responses are cached, so a rerun retries
                // the failures and nothing else.
                std::lock_guard lock(cache_mu);
                cache[key] = {r.raw_response};
                if (!options.cache_path.empty()) {
                    auto pred = to_class3(*r.answer);
                    ordered_json line{{"doc_id", r.doc_id},
                                      {"qid", r.qid},
                                      {"gold", class3_label(r.gold)},
                                      {"pred", pred ? ordered_json(class3_label(*pred)) : ordered_json(nullptr)},
                                      {"raw_response_digest", sha256_hex(r.raw_response)},
                                      {"raw_response", r.raw_response},
                                      {"prompt_sha256", r.prompt_sha256},
                                      {"model_id", model},
                                      {"mode", options.mode.to_string()}};
                    append_line(options.cache_path, line.dump());
                }
            } catch (const Error& e) {
                r.answer.reset();
                r.error_code = e.code();
                r.error = e.what();
            } catch (const std::exception& e) {
                r.answer.reset();
                r.error_code = ErrorCode::Upstream;
                r.error = e.what();
            }
        }
    });

    result.llm_calls = calls;
    result.cache_hits = hits;
    result.run.model_id = model;
    result.run.mode = options.mode;
    for (const auto& r : result.records) {
        ScoredItem s{r.doc_id, r.qid, r.gold, std::nullopt};
        if (r.answer) s.pred = to_class3(*r.answer);
        result.run.items.push_back(std::move(s));
    }
    auto opts = options.to_json();
    result.run.metadata = {{"created_at", clock.now()},
                           {"config_digest", sha256_hex(model + "\n" + opts.dump()).substr(0, 16)},
                           {"questionnaire_version", qn.version()},
                           {"options", std::move(opts)}};
    return result;
}

ordered_json BenchmarkResult::report() const {
    std::size_t failed = 0;
    for (const auto& r : records) failed += r.error_code.has_value();
    ordered_json j{{"model_id", run.model_id}, {"mode", run.mode.to_string()}};
    bool any = std::any_of(run.items.begin(), run.items.end(), [](const auto& i) { return i.pred.has_value(); });
    j["scores"] = any ? f1_scores(run.items).to_json() : ordered_json(nullptr);
    j["counts"] = counts.to_json();
    j["failed"] = failed;
    j["fewshot_excluded"] = fewshot_pool.size();
    j["llm_calls"] = llm_calls;
    j["cache_hits"] = cache_hits;
    j["metadata"] = run.metadata;
    return j;
}

namespace {

std::string fmt(double v, const char* spec = "%.4f") {
    char buf[32];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

}  // namespace

std::string table2_csv(std::span<const BenchmarkRun> runs) {
    std::string out = "model,mode,D1,D2,D3,D4,D5,micro_f1,macro_f1,macro_f1_per_question,coverage,scored,total\n";
    for (const auto& run : runs) {
        out += csv_field(run.model_id) + "," + run.mode.to_string();
        bool any = std::any_of(run.items.begin(), run.items.end(), [](const auto& i) { return i.pred.has_value(); });
        if (!any) {
            out += ",,,,,,,,,0.0000,0," + std::to_string(run.items.size()) + "\n";
            continue;
        }
        auto f = f1_scores(run.items);
        for (const auto& d : f.domain) out += "," + (d ? fmt(*d) : std::string());
        out += "," + fmt(f.micro) + "," + fmt(f.macro) + "," + fmt(*f.macro_per_question) + "," + fmt(f.coverage()) +
               "," + std::to_string(f.scored) + "," + std::to_string(f.total) + "\n";
    }
    return out;
}

ordered_json table2_json(std::span<const BenchmarkRun> runs) {
    ordered_json rows = ordered_json::array();
    for (const auto& run : runs) {
        bool any = std::any_of(run.items.begin(), run.items.end(), [](const auto& i) { return i.pred.has_value(); });
        rows.push_back({{"model_id", run.model_id},
                        {"mode", run.mode.to_string()},
                        {"scores", any ? f1_scores(run.items).to_json() : ordered_json(nullptr)}});
    }
    return rows;
}

namespace {

struct SeverityGroup {
    std::string label;
    std::vector<std::string> modes;
    std::vector<SeverityTable> tables;
};

std::vector<SeverityGroup> group_runs(std::span<const BenchmarkRun> runs, const std::string& axis) {
    if (axis != "model" && axis != "run") fail(ErrorCode::Argument, "severity axis must be 'model' or 'run'");
    std::vector<SeverityGroup> out;
    for (const auto& run : runs) {
        auto it = axis == "model"
                      ? std::find_if(out.begin(), out.end(), [&](const auto& g) { return g.label == run.model_id; })
                      : out.end();
        if (it == out.end()) {
            out.push_back({run.model_id, {}, {}});
            it = std::prev(out.end());
        }
        it->modes.push_back(run.mode.to_string());
        it->tables.push_back(severity_breakdown(run.items));
    }
    return out;
}

}  // namespace

ordered_json severity_report(std::span<const BenchmarkRun> runs, const std::string& axis) {
    ordered_json out = ordered_json::array();
    for (const auto& g : group_runs(runs, axis)) {
        auto avg = average_severity(g.tables);
        ordered_json rows = ordered_json::array();
        for (const auto& r : avg) {
            auto [a1, a2] = alternatives(r.cls);
            rows.push_back({{"class", class3_label(r.cls)},
                            {"tp", quantize(r.tp)},
                            {"fp_class1", quantize(r.fp1)},
                            {"fp_class2", quantize(r.fp2)},
                            {"fn_class1", quantize(r.fn1)},
                            {"fn_class2", quantize(r.fn2)},
                            {"class1_alternative", class3_label(a1)},
                            {"class2_alternative", class3_label(a2)}});
        }
        out.push_back({{"model_id", g.label}, {"modes", g.modes}, {"rows", std::move(rows)}});
    }
    return out;
}

std::string severity_csv(std::span<const BenchmarkRun> runs, const std::string& axis) {
    std::string out = "model,modes,class,tp,fp_class1,fp_class2,fn_class1,fn_class2\n";
    for (const auto& g : group_runs(runs, axis)) {
        std::string modes;
        for (const auto& m : g.modes) modes += (modes.empty() ? "" : ";") + m;
        for (const auto& r : average_severity(g.tables))
            out += csv_field(g.label) + "," + modes + "," + csv_field(std::string(class3_label(r.cls))) + "," +
                   fmt(r.tp, "%.1f") + "," + fmt(r.fp1, "%.1f") + "," + fmt(r.fp2, "%.1f") + "," + fmt(r.fn1, "%.1f") +
                   "," + fmt(r.fn2, "%.1f") + "\n";
    }
    return out;
}

}  // namespace rob
