#include "robassist/service.hpp"

#include <httplib.h>

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <future>
#include <mutex>
#include <regex>
#include <shared_mutex>
#include <thread>

#include "robassist/document.hpp"
#include "robassist/qa.hpp"
#include "robassist/retrieval.hpp"
#include "robassist/store.hpp"

namespace rob {

namespace {

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : std::move(fallback);
}

int env_int(const char* name, int fallback) {
    auto s = env_or(name, "");
    if (s.empty()) return fallback;
    int v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        fail(ErrorCode::Configuration, std::string(name) + " must be an integer, got '" + s + "'");
    return v;
}

}  // namespace

ServiceConfig ServiceConfig::from_env() {
    ServiceConfig c;
    c.host = env_or("ROB_HOST", c.host);
    c.port = env_int("ROB_PORT", c.port);
    c.data_dir = env_or("ROB_STORE_DIR", "");
    c.default_model = env_or("ROB_MODEL", c.default_model);
    c.default_mode = env_or("ROB_MODE", c.default_mode);
    c.retriever = env_or("ROB_RETRIEVER", c.retriever);
    c.sync_timeout_ms = env_int("ROB_SYNC_TIMEOUT_MS", c.sync_timeout_ms);
    c.generation.context_window_tokens = static_cast<std::size_t>(env_int("ROB_CONTEXT_WINDOW", 0));
    c.llm = LlmEndpointConfig::from_env();
    return c;
}

int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Parse:
        case ErrorCode::Schema:
        case ErrorCode::Argument:
        case ErrorCode::Import:
        case ErrorCode::Contamination: return 400;
        case ErrorCode::NotFound: return 404;
        case ErrorCode::Sequencing:
        case ErrorCode::Gating:
        case ErrorCode::State: return 409;
        case ErrorCode::EmptyDocument:
        case ErrorCode::ContextOverflow: return 422;
        case ErrorCode::Upstream:
        case ErrorCode::Unparseable: return 502;
        case ErrorCode::Totality:
        case ErrorCode::Configuration:
        case ErrorCode::IndexBuild:
        case ErrorCode::Io: return 500;
    }
    return 500;
}

ApiError to_api_error(const Error& e) { return {http_status(e.code()), std::string(to_string(e.code())), e.what()}; }

// ---------------------------------------------------------------------------

namespace {

struct DocEntry {
    TrialDocument doc;
    ParagraphIndex index;
};

struct Request {
    std::vector<std::string> params;
    std::string body;
    const std::map<std::string, std::string>* query = nullptr;

    json json_body() const {
        if (trim(body).empty()) fail(ErrorCode::Parse, "request body must be a JSON object");
        auto j = parse_json(body, "request body");
        if (!j.is_object()) fail(ErrorCode::Parse, "request body must be a JSON object");
        return j;
    }
    bool flag(const std::string& name) const {
        if (!query) return false;
        auto it = query->find(name);
        return it != query->end() && (it->second == "1" || it->second == "true");
    }
};

struct Route {
    std::string method;
    std::string path;  // OpenAPI template, {name} for parameters
    std::string summary;
    bool has_body = false;
    std::vector<int> statuses;
    std::function<ApiResponse(const Request&)> fn;
    std::regex re;
    std::vector<std::string> names;
};

ApiResponse error_response(const ApiError& e, int retry_after) {
    ApiResponse r;
    r.status = e.status;
    r.body = {{"error", {{"code", e.code}, {"message", e.message}}}};
    if (e.status == 502) {
        r.body["error"]["retry_after_seconds"] = retry_after;
        r.headers["Retry-After"] = std::to_string(retry_after);
    }
    return r;
}

std::string file_key(const std::string& doc_id) { return sha256_hex(doc_id).substr(0, 24) + ".json"; }

}  // namespace

struct Service::Impl {
    ServiceConfig config;
    LlmFactory make_llm;
    const Questionnaire& qn;
    const RuleSet& rules;
    const Clock& clock;
    HashEmbedder embedder;
    std::unique_ptr<SessionStore> store;

    mutable std::shared_mutex docs_mu;
    std::map<std::string, std::shared_ptr<const DocEntry>> docs;

    std::mutex llm_mu;
    std::map<std::string, std::shared_ptr<LLMClient>> clients;

    std::vector<Route> routes;

    std::unique_ptr<httplib::Server> server;
    std::thread server_thread;

    // Declared last: destroyed first, waiting for running answer jobs while
    // everything they touch is still alive.
    std::mutex jobs_mu;
    std::atomic<std::size_t> job_seq{0};
    std::map<std::string, std::shared_future<ApiResponse>> jobs;

    Impl(ServiceConfig c, LlmFactory f, const Questionnaire& q, const RuleSet& r, const Clock& cl)
        : config(std::move(c)), make_llm(std::move(f)), qn(q), rules(r), clock(cl), embedder(config.embed_dim) {
        if (config.retriever != "dense" && config.retriever != "bm25")
            fail(ErrorCode::Configuration, "retriever must be dense or bm25, got " + config.retriever);
        ContextMode::parse(config.default_mode);
        if (!make_llm) {
            auto endpoint = config.llm;
            make_llm = [endpoint](const std::string& model) {
                return std::shared_ptr<LLMClient>(make_llm_client(model, endpoint));
            };
        }
        std::shared_ptr<SessionJournal> journal;
        if (config.data_dir.empty()) {
            journal = std::make_shared<MemoryJournal>();
        } else {
            journal = std::make_shared<FileJournal>(config.data_dir / "sessions");
            auto dir = config.data_dir / "documents";
            if (std::filesystem::is_directory(dir))
                for (const auto& e : std::filesystem::directory_iterator(dir))
                    if (e.path().extension() == ".json") register_document(ingest_document(read_file(e.path())), false);
        }
        store = std::make_unique<SessionStore>(journal, qn, rules, clock);
        build_routes();
    }

    // ---- helpers -----------------------------------------------------------

    std::shared_ptr<const DocEntry> document(const std::string& id) const {
        std::shared_lock lock(docs_mu);
        auto it = docs.find(id);
        if (it == docs.end()) fail(ErrorCode::NotFound, "unknown document " + id);
        return it->second;
    }

    // Returns true when the document is new.
    bool register_document(TrialDocument doc, bool persist) {
        {
            std::shared_lock lock(docs_mu);
            if (docs.contains(doc.doc_id)) return false;
        }
        auto entry = std::make_shared<DocEntry>();
        entry->index = build_index(doc, embedder);
        entry->doc = std::move(doc);
        std::unique_lock lock(docs_mu);
        if (docs.contains(entry->doc.doc_id)) return false;
        if (persist && !config.data_dir.empty())
            write_file(config.data_dir / "documents" / file_key(entry->doc.doc_id), serialize_document(entry->doc));
        docs.emplace(entry->doc.doc_id, std::move(entry));
        return true;
    }

    std::shared_ptr<LLMClient> llm_for(const std::string& model) {
        std::lock_guard lock(llm_mu);
        auto& c = clients[model];
        if (!c) c = make_llm(model);
        return c;
    }

    Retriever retriever_for(const DocEntry& e) const {
        return config.retriever == "bm25" ? bm25_retriever(e.index) : dense_retriever(e.index, embedder);
    }

    static ordered_json record_json(const AssessmentSession& s, const std::string& qid) {
        auto all = export_session(s);
        const auto& recs = all["records"];
        if (!recs.contains(qid)) fail(ErrorCode::NotFound, "no record for " + qid + " in " + s.session_id);
        return recs[qid];
    }

    const SignalingQuestion& question(const std::string& qid) const { return qn.question(qid); }

    static std::size_t paragraph_arg(const json& body) {
        if (!body.contains("paragraph_index") || !body["paragraph_index"].is_number_unsigned())
            fail(ErrorCode::Argument, "paragraph_index must be a non-negative integer");
        return body["paragraph_index"].get<std::size_t>();
    }

    // ---- model answers ------------------------------------------------------

    ApiResponse answer_now(const std::string& id, const std::string& qid) {
        auto lock = store->lock_session(id);
        auto s = store->get(id);
        const auto& q = question(qid);
        {
            // Same preconditions as the store, checked before paying for a call.
            auto probe = s;
            ModelAnswer dummy;
            dummy.qid = qid;
            record_model_answer(probe, qn, dummy, s.updated_at);
        }
        auto entry = document(s.doc_id);
        QaOptions opts;
        opts.mode = s.context_mode ? *s.context_mode : ContextMode::parse(config.default_mode);
        opts.generation = config.generation;
        if (const auto* r = s.record(qid); r && r->gold_evidence) opts.oracle_evidence[qid] = *r->gold_evidence;
        auto llm = llm_for(s.model_id ? *s.model_id : config.default_model);
        auto answer = answer_question(entry->doc, q, retriever_for(*entry), *llm, opts);
        auto after = store->apply_locked(id, "model_answer", {{"model_answer", answer.to_json()}});
        return {200, {{"model_answer", answer.to_json()}, {"record", record_json(after, qid)}}, {}};
    }

    static ApiResponse guarded(const std::function<ApiResponse()>& fn, int retry_after) {
        try {
            return fn();
        } catch (const Error& e) {
            return error_response(to_api_error(e), retry_after);
        } catch (const std::exception& e) {
            return error_response({500, "internal_error", e.what()}, retry_after);
        }
    }

    ApiResponse answer(const Request& rq) {
        const auto id = rq.params[0], qid = rq.params[1];
        store->get(id);  // 404 before any work
        question(qid);
        const int retry = config.retry_after_seconds;
        auto fut = std::async(std::launch::async, [this, id, qid, retry] {
                       return guarded([&] { return answer_now(id, qid); }, retry);
                   }).share();
        if (!rq.flag("async") &&
            fut.wait_for(std::chrono::milliseconds(config.sync_timeout_ms)) == std::future_status::ready)
            return fut.get();
        auto job = "job-" + std::to_string(++job_seq);
        {
            std::lock_guard lock(jobs_mu);
            jobs.emplace(job, fut);
        }
        return pending(job);
    }

    static ApiResponse pending(const std::string& job) {
        ApiResponse r{202, {{"job_id", job}, {"status", "pending"}, {"poll", "/jobs/" + job}}, {}};
        r.headers["Location"] = "/jobs/" + job;
        r.headers["Retry-After"] = "1";
        return r;
    }

    ApiResponse job_status(const Request& rq) {
        std::shared_future<ApiResponse> fut;
        {
            std::lock_guard lock(jobs_mu);
            auto it = jobs.find(rq.params[0]);
            if (it == jobs.end()) fail(ErrorCode::NotFound, "unknown job " + rq.params[0]);
            fut = it->second;
        }
        if (fut.wait_for(std::chrono::seconds(0)) != std::future_status::ready) return pending(rq.params[0]);
        return fut.get();
    }

    // ---- route table --------------------------------------------------------

    void add(std::string method, std::string path, std::string summary, bool has_body, std::vector<int> statuses,
             std::function<ApiResponse(const Request&)> fn) {
        Route r{std::move(method), std::move(path), std::move(summary), has_body, std::move(statuses), std::move(fn),
                {}, {}};
        std::string pattern = "^";
        static const std::regex param(R"(\{([a-z_]+)\})");
        std::size_t last = 0;
        for (std::sregex_iterator it(r.path.begin(), r.path.end(), param), end; it != end; ++it) {
            pattern += std::regex_replace(r.path.substr(last, it->position() - last), std::regex(R"([.])"), "\\.");
            pattern += "([^/]+)";
            r.names.push_back((*it)[1]);
            last = it->position() + it->length();
        }
        pattern += std::regex_replace(r.path.substr(last), std::regex(R"([.])"), "\\.") + "$";
        r.re = std::regex(pattern);
        routes.push_back(std::move(r));
    }

    void build_routes() {
        add("GET", "/health", "Liveness probe", false, {200},
            [](const Request&) { return ApiResponse{200, {{"status", "ok"}}, {}}; });
        add("GET", "/openapi.json", "This document", false, {200},
            [this](const Request&) { return ApiResponse{200, openapi(), {}}; });
        add("GET", "/questionnaire", "Signaling questions and gates", false, {200},
            [this](const Request&) { return ApiResponse{200, qn.to_json(), {}}; });

        add("POST", "/documents", "Ingest a parsed trial report (idempotent on content)", true, {200, 201, 400, 422},
            [this](const Request& rq) {
                auto doc = ingest_document(rq.body);
                auto id = doc.doc_id;
                auto n = doc.paragraphs.size();
                bool fresh = register_document(std::move(doc), true);
                return ApiResponse{fresh ? 201 : 200, {{"doc_id", id}, {"paragraphs", n}, {"created", fresh}}, {}};
            });
        add("GET", "/documents", "List document ids", false, {200}, [this](const Request&) {
            std::shared_lock lock(docs_mu);
            ordered_json ids = ordered_json::array();
            for (const auto& [id, _] : docs) ids.push_back(id);
            return ApiResponse{200, {{"doc_ids", ids}}, {}};
        });
        add("GET", "/documents/{doc_id}", "Canonical document", false, {200, 404},
            [this](const Request& rq) { return ApiResponse{200, document_to_json(document(rq.params[0])->doc), {}}; });

        add("POST", "/assessments", "Start an assessment session", true, {201, 400, 404}, [this](const Request& rq) {
            auto b = rq.json_body();
            SessionHeader h;
            h.doc_id = b.value("doc_id", "");
            document(h.doc_id);
            h.annotator_id = b.value("annotator_id", "");
            h.model_id = b.value("model", config.default_model);
            h.context_mode = ContextMode::parse(b.value("mode", config.default_mode));
            auto s = store->create(h);
            return ApiResponse{201, {{"session_id", s.session_id}, {"session", export_session(s)}}, {}};
        });
        add("POST", "/assessments/import", "Import a session export", true, {201, 400}, [this](const Request& rq) {
            auto s = store->import(import_session(rq.json_body()));
            return ApiResponse{201, {{"session_id", s.session_id}}, {}};
        });
        add("GET", "/assessments", "List session ids", false, {200},
            [this](const Request&) { return ApiResponse{200, {{"session_ids", store->ids()}}, {}}; });
        add("GET", "/assessments/{session_id}", "Session export", false, {200, 404},
            [this](const Request& rq) { return ApiResponse{200, export_session(store->get(rq.params[0])), {}}; });
        add("GET", "/assessments/{session_id}/events", "Session event log", false, {200, 404},
            [this](const Request& rq) {
                store->get(rq.params[0]);
                ordered_json out = ordered_json::array();
                for (const auto& e : store->journal().events(rq.params[0])) out.push_back(e.to_json());
                return ApiResponse{200, out, {}};
            });

        const std::string q = "/assessments/{session_id}/questions/{qid}";
        add("POST", q + "/answer", "Ask the model (202 + poll when slow or ?async=1)", false,
            {200, 202, 404, 409, 422, 502}, [this](const Request& rq) { return answer(rq); });
        add("GET", q + "/answer", "Question record", false, {200, 404}, [this](const Request& rq) {
            question(rq.params[1]);
            return ApiResponse{200, record_json(store->get(rq.params[0]), rq.params[1]), {}};
        });
        add("PATCH", q + "/answer", "Override answer and/or rationale", true, {200, 400, 404, 409},
            [this](const Request& rq) {
                auto b = rq.json_body();
                const auto& qid = rq.params[1];
                question(qid);
                AssessmentSession s;
                if (b.contains("answer")) {
                    s = store->apply(rq.params[0], "override",
                                     {{"qid", qid}, {"answer", b["answer"]}, {"rationale", b.value("rationale", json())}});
                } else if (b.contains("rationale")) {
                    s = store->apply(rq.params[0], "rationale", {{"qid", qid}, {"rationale", b["rationale"]}});
                } else {
                    fail(ErrorCode::Argument, "PATCH needs answer and/or rationale");
                }
                return ApiResponse{200, record_json(s, qid), {}};
            });
        add("POST", q + "/votes", "Vote on an evidence paragraph", true, {200, 400, 404, 409},
            [this](const Request& rq) {
                auto b = rq.json_body();
                auto s = store->apply(rq.params[0], "vote",
                                      {{"qid", rq.params[1]},
                                       {"paragraph_index", paragraph_arg(b)},
                                       {"direction", b.value("direction", "")}});
                return ApiResponse{200, record_json(s, rq.params[1]), {}};
            });
        add("POST", q + "/paragraphs", "Add a paragraph the model missed", true, {200, 400, 404, 409},
            [this](const Request& rq) {
                auto b = rq.json_body();
                auto p = paragraph_arg(b);
                auto s0 = store->get(rq.params[0]);
                if (p >= document(s0.doc_id)->doc.paragraphs.size())
                    fail(ErrorCode::Argument, "paragraph " + std::to_string(p) + " is out of range");
                auto s = store->apply(rq.params[0], "add_paragraph", {{"qid", rq.params[1]}, {"paragraph_index", p}});
                return ApiResponse{200, record_json(s, rq.params[1]), {}};
            });
        add("GET", q + "/activation", "Whether the question is active given current answers", false, {200, 404},
            [this](const Request& rq) {
                auto s = store->get(rq.params[0]);
                const auto& sq = question(rq.params[1]);
                auto answers = s.final_answers();
                ordered_json missing = ordered_json::array();
                if (sq.gate)
                    for (const auto& c : sq.gate->antecedents)
                        if (!answers.contains(c.qid)) missing.push_back(c.qid);
                ordered_json j{{"qid", sq.qid}};
                j["active"] = missing.empty() ? ordered_json(is_active(sq, answers)) : ordered_json(nullptr);
                j["missing_antecedents"] = missing;
                return ApiResponse{200, j, {}};
            });
        add("GET", "/assessments/{session_id}/summary", "Domain and overall judgments", false, {200, 404},
            [this](const Request& rq) {
                return ApiResponse{200, summarize(store->get(rq.params[0]), qn, rules).to_json(), {}};
            });
        add("POST", "/assessments/{session_id}/complete", "Finalize once all 22 answers exist", false,
            {200, 404, 409}, [this](const Request& rq) {
                auto s = store->apply(rq.params[0], "complete", ordered_json::object());
                return ApiResponse{200, export_session(s), {}};
            });
        add("GET", "/jobs/{job_id}", "Poll a pending model answer", false, {200, 202, 404, 409, 502},
            [this](const Request& rq) { return job_status(rq); });
    }

    ApiResponse dispatch(const std::string& method, const std::string& path, const std::string& body,
                         const std::map<std::string, std::string>& query) {
        bool path_known = false;
        for (const auto& r : routes) {
            std::smatch m;
            if (!std::regex_match(path, m, r.re)) continue;
            path_known = true;
            if (r.method != method) continue;
            Request rq;
            for (std::size_t i = 1; i < m.size(); ++i) rq.params.push_back(m[i].str());
            rq.body = body;
            rq.query = &query;
            return guarded([&] { return r.fn(rq); }, config.retry_after_seconds);
        }
        if (path_known) return error_response({405, "method_not_allowed", method + " not allowed on " + path}, 0);
        return error_response({404, "not_found", "no route for " + path}, 0);
    }

    ordered_json openapi() const {
        ordered_json paths = ordered_json::object();
        for (const auto& r : routes) {
            std::string lower = r.method;
            for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            ordered_json op{{"summary", r.summary}};
            ordered_json params = ordered_json::array();
            for (const auto& n : r.names)
                params.push_back({{"name", n}, {"in", "path"}, {"required", true}, {"schema", {{"type", "string"}}}});
            if (!params.empty()) op["parameters"] = params;
            if (r.has_body)
                op["requestBody"] = {{"required", true},
                                     {"content", {{"application/json", {{"schema", {{"type", "object"}}}}}}}};
            ordered_json responses = ordered_json::object();
            for (int s : r.statuses) responses[std::to_string(s)] = {{"description", httplib::status_message(s)}};
            op["responses"] = responses;
            paths[r.path][lower] = op;
        }
        return {{"openapi", "3.0.3"},
                {"info", {{"title", "robassist"}, {"version", "1.0.0"}}},
                {"paths", paths},
                {"components",
                 {{"schemas",
                   {{"Error",
                     {{"type", "object"},
                      {"properties",
                       {{"error",
                         {{"type", "object"},
                          {"properties",
                           {{"code", {{"type", "string"}}},
                            {"message", {{"type", "string"}}},
                            {"retry_after_seconds", {{"type", "integer"}}}}}}}}}}}}}}}};
    }

    // ---- transport ----------------------------------------------------------

    void mount() {
        server = std::make_unique<httplib::Server>();
        const std::size_t threads = std::max<std::size_t>(config.threads, 1);
        server->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
        auto handler = [this](const httplib::Request& req, httplib::Response& res) {
            std::map<std::string, std::string> query(req.params.begin(), req.params.end());
            auto out = dispatch(req.method, req.path, req.body, query);
            res.status = out.status;
            for (const auto& [k, v] : out.headers) res.set_header(k, v);
            res.set_content(out.body.dump() + "\n", "application/json");
        };
        server->Get(".*", handler);
        server->Post(".*", handler);
        server->Patch(".*", handler);
        server->Put(".*", handler);
        server->Delete(".*", handler);
    }

    int bind() {
        mount();
        int port = config.port;
        if (port == 0) {
            port = server->bind_to_any_port(config.host);
            if (port < 0) fail(ErrorCode::Io, "cannot bind " + config.host);
        } else if (!server->bind_to_port(config.host, port)) {
            fail(ErrorCode::Io, "cannot bind " + config.host + ":" + std::to_string(port));
        }
        return port;
    }
};

Service::Service(ServiceConfig config, LlmFactory llm, const Questionnaire& qn, const RuleSet& rules,
                 const Clock& clock)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(llm), qn, rules, clock)) {}

Service::~Service() { stop(); }

ApiResponse Service::handle(const std::string& method, const std::string& path, const std::string& body,
                            const std::map<std::string, std::string>& query) {
    return impl_->dispatch(method, path, body, query);
}

ordered_json Service::openapi() const { return impl_->openapi(); }

int Service::start() {
    int port = impl_->bind();
    impl_->server_thread = std::thread([this] { impl_->server->listen_after_bind(); });
    impl_->server->wait_until_ready();
    return port;
}

void Service::stop() {
    if (impl_ && impl_->server) impl_->server->stop();
    if (impl_ && impl_->server_thread.joinable()) impl_->server_thread.join();
}

void Service::run() {
    impl_->bind();
    impl_->server->listen_after_bind();
}

}  // namespace rob
