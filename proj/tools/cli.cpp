#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "robassist/benchmark.hpp"
#include "robassist/dataset.hpp"
#include "robassist/error.hpp"
#include "robassist/qa.hpp"
#include "robassist/service.hpp"
#include "robassist/store.hpp"

namespace fs = std::filesystem;

namespace rob::cli {

const std::vector<Setting>& settings() {
    static const std::vector<Setting> s = {
        {"data_dir", "ROB_DATASET_DIR", "--data", "Dataset / document directory"},
        {"out", "ROB_OUT", "--out", "Output directory for machine-readable results"},
        {"model", "ROB_MODEL", "--model", "stub-hash | stub-fixed:<text> | http | <model name on LLM_BASE_URL>"},
        {"mode", "ROB_MODE", "--mode", "Context mode: oracle | topk:K | full"},
        {"retriever", "ROB_RETRIEVER", "--retriever", "dense | bm25 | sidecar (eval: comma list or all)"},
        {"k", "ROB_K", "--k", "Comma-separated k values for recall@k"},
        {"jobs", "ROB_JOBS", "--jobs", "Documents processed in parallel"},
        {"seed", "ROB_SEED", "--seed", "Seed for few-shot sampling"},
        {"fixed_clock", "ROB_FIXED_CLOCK", "--fixed-clock", "Use this timestamp for every event"},
        {"embedder", "ROB_EMBEDDER", "--embedder", "hash | http"},
        {"embed_dim", "ROB_EMBED_DIM", "--embed-dim", "Hash embedder dimension"},
        {"embed_endpoint", "EMBED_ENDPOINT", "--embed-endpoint", "Embedding service URL"},
        {"embed_model", "EMBED_MODEL", "--embed-model", "Embedding model name"},
        {"temperature", "ROB_TEMPERATURE", "--temperature", "Sampling temperature"},
        {"max_output_tokens", "ROB_MAX_OUTPUT_TOKENS", "--max-output-tokens", "Completion token limit"},
        {"context_window", "ROB_CONTEXT_WINDOW", "--context-window", "Model context window in tokens (0: unchecked)"},
        {"llm_base_url", "LLM_BASE_URL", "--llm-base-url", "OpenAI-compatible endpoint"},
        {"llm_timeout", "LLM_TIMEOUT", "--llm-timeout", "LLM request timeout in seconds"},
    };
    return s;
}

EnvLookup process_env() {
    return [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
}

namespace {

template <typename T>
T number(const std::string& key, const std::string& v) {
    T out{};
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc{} || r.ptr != v.data() + v.size())
        fail(ErrorCode::Configuration, key + " must be a number, got '" + v + "'");
    return out;
}

double real(const std::string& key, const std::string& v) {
    char* end = nullptr;
    double d = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size())
        fail(ErrorCode::Configuration, key + " must be a number, got '" + v + "'");
    return d;
}

std::vector<std::size_t> k_list(const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream in(v);
    std::string part;
    while (std::getline(in, part, ',')) {
        auto k = number<std::size_t>("k", trim(part));
        if (k == 0) fail(ErrorCode::Configuration, "k values must be >= 1");
        out.push_back(k);
    }
    if (out.empty()) fail(ErrorCode::Configuration, "k needs at least one value");
    return out;
}

void apply(CliConfig& c, const std::string& key, const std::string& v) {
    if (key == "data_dir") c.data_dir = v;
    else if (key == "out") c.out = v;
    else if (key == "model") c.model = v;
    else if (key == "mode") c.mode = ContextMode::parse(v).to_string();
    else if (key == "retriever") c.retriever = v;
    else if (key == "k") c.ks = k_list(v);
    else if (key == "jobs") c.jobs = std::max<std::size_t>(1, number<std::size_t>(key, v));
    else if (key == "seed") c.seed = number<std::uint64_t>(key, v);
    else if (key == "fixed_clock") c.fixed_clock = v;
    else if (key == "embedder") c.embedder = v;
    else if (key == "embed_dim") c.embed_dim = number<std::size_t>(key, v);
    else if (key == "embed_endpoint") c.embedding.endpoint = v;
    else if (key == "embed_model") c.embedding.model = v;
    else if (key == "temperature") c.generation.temperature = real(key, v);
    else if (key == "max_output_tokens") c.generation.max_output_tokens = number<int>(key, v);
    else if (key == "context_window") c.generation.context_window_tokens = number<std::size_t>(key, v);
    else if (key == "llm_base_url") c.llm.base_url = v;
    else if (key == "llm_timeout") c.llm.timeout_seconds = number<int>(key, v);
    else fail(ErrorCode::Configuration, "unknown setting " + key);
}

std::string file_value(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        std::string s;
        for (const auto& e : v) s += (s.empty() ? "" : ",") + file_value(e);
        return s;
    }
    return v.dump();
}

}  // namespace

CliConfig resolve_config(const json& file, const EnvLookup& env, const std::map<std::string, std::string>& flags) {
    CliConfig c;
    if (!file.is_null() && !file.is_object()) fail(ErrorCode::Configuration, "config file must be a JSON object");
    if (file.is_object())
        for (const auto& [k, v] : file.items()) {
            bool known = std::any_of(settings().begin(), settings().end(), [&](const Setting& s) { return k == s.key; });
            if (!known) fail(ErrorCode::Configuration, "unknown key '" + k + "' in config file");
            apply(c, k, file_value(v));
        }
    for (const auto& s : settings())
        if (auto v = env(s.env)) apply(c, s.key, *v);
    for (const auto& [k, v] : flags) apply(c, k, v);
    // credentials come from the environment only
    if (auto v = env("LLM_API_KEY")) c.llm.api_key = *v;
    if (auto v = env("EMBED_API_KEY")) c.embedding.api_key = *v;
    return c;
}

ordered_json CliConfig::to_json() const {
    ordered_json ks_json = ks;
    return {{"data_dir", data_dir.string()},
            {"out", out.string()},
            {"model", model},
            {"mode", mode},
            {"retriever", retriever},
            {"k", ks_json},
            {"jobs", jobs},
            {"seed", seed},
            {"fixed_clock", fixed_clock ? ordered_json(*fixed_clock) : ordered_json(nullptr)},
            {"embedder", embedder},
            {"embed_dim", embed_dim},
            {"temperature", generation.temperature},
            {"max_output_tokens", generation.max_output_tokens},
            {"context_window", generation.context_window_tokens},
            {"llm_base_url", llm.base_url}};
}

// ---------------------------------------------------------------------------

namespace {

struct Ctx {
    CliConfig cfg;
    std::ostream& out;
    std::unique_ptr<Clock> clock;
    const Questionnaire& qn = default_questionnaire();
    const RuleSet& rules = default_rule_set();

    fs::path out_file(const std::string& name) const {
        fs::create_directories(cfg.out);
        return cfg.out / name;
    }
    void write_json(const std::string& name, const ordered_json& j) const {
        write_file(out_file(name), j.dump(2) + "\n");
    }
    void write_text(const std::string& name, const std::string& s) const { write_file(out_file(name), s); }

    std::unique_ptr<Embedder> embedder() const {
        if (cfg.embedder == "hash") return std::make_unique<HashEmbedder>(cfg.embed_dim);
        if (cfg.embedder == "http") return std::make_unique<HttpEmbedder>(cfg.embedding);
        fail(ErrorCode::Configuration, "embedder must be hash or http, got " + cfg.embedder);
    }
    std::unique_ptr<LLMClient> llm() const {
        auto endpoint = cfg.llm;
        if (endpoint.model.empty()) endpoint.model = cfg.model;
        return make_llm_client(cfg.model, endpoint);
    }
    GenerationConfig generation() const {
        auto g = cfg.generation;
        return g;
    }
    Dataset dataset() const { return load_dataset(cfg.data_dir); }
};

std::string safe_name(const std::string& s) {
    std::string out;
    for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_';
    return out;
}

std::string pad(std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// ---- ingest -----------------------------------------------------------------

int cmd_ingest(Ctx& c, const std::vector<std::string>& files) {
    if (c.cfg.data_dir.empty()) fail(ErrorCode::Configuration, "ingest needs --data (or ROB_DATASET_DIR)");
    auto dir = c.cfg.data_dir / "documents";
    fs::create_directories(dir);
    auto emb = c.embedder();
    ordered_json list = ordered_json::array();
    for (const auto& f : files) {
        TrialDocument doc;
        try {
            doc = ingest_document(read_file(f));
        } catch (const Error& e) {
            throw Error(e.code(), f + ": " + e.what());
        }
        auto issues = validate_document(doc);
        if (!issues.empty()) fail(ErrorCode::Schema, f + ": " + issues.front());
        build_index(doc, *emb);  // surfaces index-build failures now
        auto target = dir / (safe_name(doc.doc_id) + ".json");
        write_file(target, serialize_document(doc));
        list.push_back({{"doc_id", doc.doc_id}, {"paragraphs", doc.paragraphs.size()}, {"source", f},
                        {"stored", target.string()}});
        c.out << "ingested " << doc.doc_id << " (" << doc.paragraphs.size() << " paragraphs)\n";
    }
    c.write_json("ingest.json", {{"documents", list}});
    return 0;
}

// ---- assess -----------------------------------------------------------------

TrialDocument find_document(const Ctx& c, const std::string& ref) {
    if (fs::is_regular_file(ref)) return ingest_document(read_file(ref));
    if (c.cfg.data_dir.empty())
        fail(ErrorCode::NotFound, "document '" + ref + "' is not a file and no --data directory is set");
    auto dir = c.cfg.data_dir / "documents";
    auto direct = dir / (safe_name(ref) + ".json");
    if (fs::is_regular_file(direct)) {
        auto d = ingest_document(read_file(direct));
        if (d.doc_id == ref) return d;
    }
    if (fs::is_directory(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".json") {
                auto d = ingest_document(read_file(e.path()));
                if (d.doc_id == ref) return d;
            }
    fail(ErrorCode::NotFound, "no document '" + ref + "' under " + dir.string() + " (run ingest first)");
}

int cmd_assess(Ctx& c, const std::string& doc_ref, const std::string& annotator) {
    auto doc = find_document(c, doc_ref);
    auto mode = ContextMode::parse(c.cfg.mode);
    auto emb = c.embedder();
    auto index = build_index(doc, *emb);
    Retriever retriever;
    if (c.cfg.retriever == "dense")
        retriever = dense_retriever(index, *emb);
    else if (c.cfg.retriever == "bm25")
        retriever = bm25_retriever(index);
    else
        fail(ErrorCode::Configuration, "assess supports the dense and bm25 retrievers, got " + c.cfg.retriever);

    auto inner = c.llm();
    fs::create_directories(c.cfg.out);
    fs::remove(c.out_file("audit.jsonl"));
    AuditLog audit(c.out_file("audit.jsonl"), *c.clock);
    AuditedClient llm(*inner, audit);

    QaOptions opts;
    opts.mode = mode;
    opts.generation = c.generation();
    if (mode.kind == ContextMode::Kind::Oracle)
        fail(ErrorCode::Argument, "assess has no annotator evidence; use topk:K or full");
    auto outcomes = assess_document(doc, c.qn, retriever, llm, opts);

    auto journal = std::make_shared<MemoryJournal>();
    SessionStore store(journal, c.qn, c.rules, *c.clock);
    auto s = store.create({doc.doc_id, annotator, Provenance::Assisted, llm.model_id(), mode});
    for (const auto& o : outcomes)
        if (o.status == OutcomeStatus::Answered)
            s = store.apply(s.session_id, "model_answer", {{"model_answer", o.model_answer->to_json()}});
    s = store.apply(s.session_id, "refresh_gating", ordered_json::object());
    std::size_t failed = 0;
    for (const auto& o : outcomes) failed += o.status == OutcomeStatus::Failed;
    if (failed == 0) s = store.apply(s.session_id, "complete", ordered_json::object());

    ordered_json outs = ordered_json::array();
    for (const auto& o : outcomes) outs.push_back(o.to_json());
    c.write_json("outcomes.json", outs);
    c.write_text("session.json", export_session_text(s));
    std::string events;
    for (const auto& e : journal->events(s.session_id)) events += e.to_json().dump() + "\n";
    c.write_text("events.jsonl", events);

    auto sum = summarize(s, c.qn, c.rules);
    c.out << "session " << s.session_id << " for " << doc.doc_id << " (" << llm.model_id() << ", " << mode.to_string()
          << ")\n";
    c.out << "answered " << sum.answered << "/" << sum.total << ", failed " << failed << ", llm calls " << llm.calls()
          << "\n";
    for (int d = 0; d < kDomainCount; ++d)
        c.out << "  D" << d + 1 << " " << pad(c.qn.domain_name(d + 1), 48) << " "
              << (sum.domains[d] ? std::string(risk_key(*sum.domains[d])) : "-") << "\n";
    c.out << "  overall " << (sum.overall ? std::string(risk_key(*sum.overall)) : "-") << "\n";
    if (failed) {
        for (const auto& o : outcomes)
            if (o.status == OutcomeStatus::Failed) c.out << "  failed " << o.qid << ": " << o.error << "\n";
        return 4;
    }
    return 0;
}

// ---- eval -------------------------------------------------------------------

std::vector<std::string> retriever_list(const Ctx& c, const Dataset& ds) {
    std::vector<std::string> out;
    if (c.cfg.retriever == "all") {
        out = {"bm25", "dense"};
        if (ds.sidecar) out.push_back("sidecar");
        return out;
    }
    std::stringstream in(c.cfg.retriever);
    std::string part;
    while (std::getline(in, part, ',')) out.push_back(trim(part));
    return out;
}

int cmd_eval_retrieval(Ctx& c) {
    auto ds = c.dataset();
    auto emb = c.embedder();
    ordered_json rows = ordered_json::array();
    std::string csv = "retriever,k,recall,questions\n";
    c.out << pad("retriever", 28);
    for (auto k : c.cfg.ks) c.out << pad("R@" + std::to_string(k), 8);
    c.out << "n\n";
    for (const auto& kind : retriever_list(c, ds)) {
        auto r = eval_retrieval(ds, c.qn, kind, c.cfg.ks, emb.get(), {}, c.cfg.jobs);
        rows.push_back(r.to_json());
        c.out << pad(r.retriever, 28);
        for (std::size_t i = 0; i < r.ks.size(); ++i) {
            csv += r.retriever + "," + std::to_string(r.ks[i]) + "," + fmt("%.4f", r.recall[i]) + "," +
                   std::to_string(r.questions) + "\n";
            c.out << pad(fmt("%.3f", r.recall[i]), 8);
        }
        c.out << r.questions << "\n";
    }
    c.write_json("retrieval.json", rows);
    c.write_text("retrieval.csv", csv);
    return 0;
}

int cmd_eval_qa(Ctx& c, bool fewshot, const std::string& cache) {
    auto ds = c.dataset();
    auto llm = c.llm();
    std::unique_ptr<Embedder> emb;
    BenchmarkOptions o;
    o.mode = ContextMode::parse(c.cfg.mode);
    o.retriever = c.cfg.retriever;
    if (o.retriever == "dense") {
        emb = c.embedder();
        o.embedder = emb.get();
    }
    o.fewshot = fewshot;
    o.seed = c.cfg.seed;
    o.jobs = c.cfg.jobs;
    o.generation = c.generation();
    o.cache_path = cache.empty() ? c.out_file("cache.jsonl") : fs::path(cache);
    auto res = run_benchmark(ds, c.qn, *llm, o, *c.clock);

    auto tag = safe_name(res.run.model_id + "_" + res.run.mode.to_string() + (fewshot ? "_fewshot" : ""));
    c.write_json("run_" + tag + ".json", run_to_json(res.run));
    std::string records;
    for (const auto& r : res.records) records += r.to_json().dump() + "\n";
    c.write_text("records_" + tag + ".jsonl", records);
    auto report = res.report();
    c.write_json("report_" + tag + ".json", report);
    std::vector<BenchmarkRun> runs{res.run};
    c.write_text("table2_" + tag + ".csv", table2_csv(runs));

    c.out << res.run.model_id << " " << res.run.mode.to_string() << (fewshot ? " few-shot" : "") << ": "
          << res.run.items.size() << " items, " << res.llm_calls << " llm calls, " << res.cache_hits
          << " cached\n";
    if (report["scores"].is_null()) {
        c.out << "no item could be scored\n";
        return 1;
    }
    const auto& s = report["scores"];
    c.out << "  ";
    for (int d = 1; d <= kDomainCount; ++d) {
        const auto& v = s["domain_micro_f1"]["D" + std::to_string(d)];
        c.out << "D" << d << " " << (v.is_null() ? std::string("-") : fmt("%.2f", v.get<double>())) << "  ";
    }
    c.out << "micro " << fmt("%.2f", s["micro_f1"].get<double>()) << "  macro " << fmt("%.2f", s["macro_f1"].get<double>())
          << "  coverage " << fmt("%.3f", s["coverage"].get<double>()) << "\n";
    return 0;
}

// ---- reports ----------------------------------------------------------------

std::vector<BenchmarkRun> load_runs(const Ctx& c, std::vector<std::string> files) {
    if (files.empty() && fs::is_directory(c.cfg.out)) {
        for (const auto& e : fs::directory_iterator(c.cfg.out)) {
            auto name = e.path().filename().string();
            if (name.starts_with("run_") && e.path().extension() == ".json") files.push_back(e.path().string());
        }
        std::sort(files.begin(), files.end());
    }
    if (files.empty()) fail(ErrorCode::NotFound, "no run files given and none found under " + c.cfg.out.string());
    std::vector<BenchmarkRun> runs;
    for (const auto& f : files) runs.push_back(run_from_json(read_json_file(f)));
    return runs;
}

int cmd_report_usage(Ctx& c) {
    auto ds = c.dataset();
    auto assisted = ds.with_provenance(Provenance::Assisted);
    auto st = usage_stats(assisted);
    auto j = st.to_json();
    c.write_json("usage.json", j);
    std::string csv =
        "domain,pred_model,pred_model_pct,pred_expert,pred_expert_pct,rat_model,rat_model_pct,rat_expert,rat_expert_pct,"
        "q_down,q_up,q_added,raw_down,raw_up,raw_added\n";
    auto row = [&](const std::string& name, const ordered_json& r) {
        csv += name;
        for (const char* part : {"predictions", "rationales"})
            for (const char* k : {"model", "model_pct", "expert", "expert_pct"}) csv += "," + r[part][k].dump();
        for (const char* part : {"feedback_questions", "feedback_raw"})
            for (const char* k : {"downvotes", "upvotes", "added_paragraphs"}) csv += "," + r[part][k].dump();
        csv += "\n";
    };
    for (const auto& d : j["domains"]) row("D" + d["domain"].dump(), d);
    row("total", j["total"]);
    c.write_text("usage.csv", csv);

    const auto& t = j["total"];
    c.out << st.sessions << " assisted sessions\n";
    c.out << "  predictions kept " << t["predictions"]["model"] << " (" << t["predictions"]["model_pct"]
          << "%), changed " << t["predictions"]["expert"] << " (" << t["predictions"]["expert_pct"] << "%)\n";
    c.out << "  rationales kept " << t["rationales"]["model"] << " (" << t["rationales"]["model_pct"] << "%), changed "
          << t["rationales"]["expert"] << " (" << t["rationales"]["expert_pct"] << "%)\n";
    c.out << "  questions upvoted " << t["feedback_questions"]["upvotes"] << ", downvoted "
          << t["feedback_questions"]["downvotes"] << ", with added paragraphs "
          << t["feedback_questions"]["added_paragraphs"] << "\n";
    c.out << "  positive feedback share " << j["positive_share_questions_pct"] << "%\n";
    return 0;
}

int cmd_report_table2(Ctx& c, const std::vector<std::string>& files) {
    auto runs = load_runs(c, files);
    auto csv = table2_csv(runs);
    c.write_text("table2.csv", csv);
    c.write_json("table2.json", table2_json(runs));
    c.out << csv;
    return 0;
}

int cmd_report_severity(Ctx& c, const std::vector<std::string>& files, const std::string& axis) {
    auto runs = load_runs(c, files);
    auto csv = severity_csv(runs, axis);
    c.write_text("severity.csv", csv);
    c.write_json("severity.json", severity_report(runs, axis));
    c.out << csv;
    return 0;
}

int cmd_report_kappa(Ctx& c) {
    auto ds = c.dataset();
    auto dual = dual_annotations(ds.sessions, c.qn);
    auto j = dual.to_json();
    c.write_json("kappa.json", j);
    if (dual.a.empty()) {
        c.out << "no dual-annotated papers found (manual sessions from two annotators on one document)\n";
        return 3;
    }
    c.out << "four-class kappa " << fmt("%.4f", j["kappa"].get<double>()) << " over " << dual.doc_ids.size()
          << " papers, " << dual.a.size() << " questions\n";
    return 0;
}

int cmd_report_distribution(Ctx& c) {
    auto ds = c.dataset();
    auto dist = judgment_distribution(ds.sessions);
    c.write_json("distribution.json", dist.to_json());
    std::string csv = "level,overall,D1,D2,D3,D4,D5\n";
    for (int l = 0; l < 3; ++l) {
        csv += std::string(risk_key(static_cast<RiskLevel>(l))) + "," + std::to_string(dist.overall[l]);
        for (const auto& d : dist.domains) csv += "," + std::to_string(d[l]);
        csv += "\n";
    }
    c.write_text("distribution.csv", csv);
    c.out << dist.sessions << " sessions (" << dist.without_judgments << " without stored judgments)\n" << csv;
    return 0;
}

int cmd_report_consistency(Ctx& c) {
    auto ds = c.dataset();
    auto rep = consistency_report(ds.sessions, c.qn, c.rules);
    c.write_json("consistency.json", rep.to_json());
    c.out << "domain  checked  mismatched\n";
    for (int d = 0; d < kDomainCount; ++d)
        c.out << "D" << d + 1 << "      " << pad(std::to_string(rep.checked[d]), 9) << rep.mismatched[d] << "\n";
    return 0;
}

int cmd_serve(Ctx& c, const std::string& host, int port, const std::string& store_dir) {
    auto sc = ServiceConfig::from_env();
    if (!host.empty()) sc.host = host;
    if (port >= 0) sc.port = port;
    if (!store_dir.empty()) sc.data_dir = store_dir;
    sc.default_model = c.cfg.model;
    sc.default_mode = c.cfg.mode;
    if (c.cfg.retriever == "bm25" || c.cfg.retriever == "dense") sc.retriever = c.cfg.retriever;
    sc.embed_dim = c.cfg.embed_dim;
    sc.generation = c.generation();
    sc.llm = c.cfg.llm;
    Service svc(sc, {}, c.qn, c.rules, *c.clock);
    c.out << "serving on " << sc.host << ":" << sc.port << "\n" << std::flush;
    svc.run();
    return 0;
}

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::Argument:
        case ErrorCode::Configuration: return 2;
        case ErrorCode::NotFound: return 3;
        default: return 1;
    }
}

void print_error(std::ostream& err, const std::string& code, const std::string& message) {
    err << ordered_json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Risk-of-bias assessment toolkit: ingest, assess, evaluate, report"};
    app.require_subcommand(1);
    app.fallthrough();
    std::map<std::string, std::string> flag_values;
    std::map<std::string, CLI::Option*> flag_opts;
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (default: <data>/robassist.json)");
    for (const auto& s : settings())
        flag_opts[s.key] = app.add_option(s.flag, flag_values[s.key], s.help)->envname("");

    std::vector<std::string> files, runs;
    std::string doc, annotator = "cli", cache, axis = "model", host, store_dir;
    int port = -1;
    bool fewshot = false;

    auto* ingest = app.add_subcommand("ingest", "Ingest parsed trial reports into <data>/documents");
    ingest->add_option("files", files, "Parsed report JSON files")->required();
    auto* assess = app.add_subcommand("assess", "Run the QA pipeline over one document");
    assess->add_option("--doc", doc, "Document id under <data>/documents or a file path")->required();
    assess->add_option("--annotator", annotator, "Annotator id recorded on the session");
    auto* eval = app.add_subcommand("eval", "Benchmarks over the dataset");
    eval->require_subcommand(1);
    auto* eval_ret = eval->add_subcommand("retrieval", "recall@k of annotator evidence");
    auto* eval_qa = eval->add_subcommand("qa", "LLM answers vs manual gold labels");
    eval_qa->add_flag("--fewshot", fewshot, "One example per class in the prompt");
    eval_qa->add_option("--cache", cache, "Response cache (default <out>/cache.jsonl)");
    auto* report = app.add_subcommand("report", "Tables from the dataset or from saved runs");
    report->require_subcommand(1);
    auto* r_usage = report->add_subcommand("usage", "Usage statistics of assisted sessions");
    auto* r_table2 = report->add_subcommand("table2", "Per-domain F1 table from run files");
    r_table2->add_option("--runs", runs, "Run files (default: <out>/run_*.json)");
    auto* r_sev = report->add_subcommand("severity", "Error severity breakdown from run files");
    r_sev->add_option("--runs", runs, "Run files (default: <out>/run_*.json)");
    r_sev->add_option("--axis", axis, "model (average a model's runs) or run");
    auto* r_kappa = report->add_subcommand("kappa", "Inter-annotator agreement");
    auto* r_dist = report->add_subcommand("distribution", "Stored judgment distribution");
    auto* r_cons = report->add_subcommand("consistency", "Stored vs re-derived domain judgments");
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--host", host, "Bind address (ROB_HOST)");
    serve->add_option("--port", port, "Port (ROB_PORT)");
    serve->add_option("--store", store_dir, "Service storage directory (ROB_STORE_DIR)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        print_error(err, "usage_error", e.what());
        return 2;
    }

    try {
        std::map<std::string, std::string> flags;
        for (const auto& [k, opt] : flag_opts)
            if (opt->count() > 0) flags[k] = flag_values[k];
        auto env = process_env();
        json file;
        fs::path cfg_file = config_path;
        if (cfg_file.empty())
            if (auto v = env("ROB_CONFIG")) cfg_file = *v;
        if (cfg_file.empty()) {
            fs::path data = flags.contains("data_dir") ? fs::path(flags["data_dir"])
                                                       : fs::path(env("ROB_DATASET_DIR").value_or(""));
            if (!data.empty() && fs::is_regular_file(data / "robassist.json")) cfg_file = data / "robassist.json";
        }
        if (!cfg_file.empty()) file = read_json_file(cfg_file);

        Ctx c{resolve_config(file, env, flags), out, nullptr};
        if (c.cfg.fixed_clock)
            c.clock = std::make_unique<FixedClock>(*c.cfg.fixed_clock);
        else
            c.clock = std::make_unique<SystemClock>();

        if (*ingest) return cmd_ingest(c, files);
        if (*assess) return cmd_assess(c, doc, annotator);
        if (*eval_ret) return cmd_eval_retrieval(c);
        if (*eval_qa) return cmd_eval_qa(c, fewshot, cache);
        if (*r_usage) return cmd_report_usage(c);
        if (*r_table2) return cmd_report_table2(c, runs);
        if (*r_sev) return cmd_report_severity(c, runs, axis);
        if (*r_kappa) return cmd_report_kappa(c);
        if (*r_dist) return cmd_report_distribution(c);
        if (*r_cons) return cmd_report_consistency(c);
        if (*serve) return cmd_serve(c, host, port, store_dir);
    } catch (const Error& e) {
        print_error(err, std::string(to_string(e.code())), e.what());
        return exit_code(e.code());
    } catch (const std::exception& e) {
        print_error(err, "internal_error", e.what());
        return 1;
    }
    return 2;
}

}  // namespace rob::cli
