#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "robassist/clock.hpp"
#include "robassist/error.hpp"
#include "robassist/llm.hpp"
#include "robassist/questionnaire.hpp"
#include "robassist/rob_logic.hpp"

namespace rob {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;                   // 0 picks a free port
    std::filesystem::path data_dir;    // empty keeps everything in memory
    std::string default_model = "stub-hash";
    std::string default_mode = "topk:3";
    std::string retriever = "dense";   // dense (hash embedder) | bm25
    std::size_t embed_dim = 64;
    GenerationConfig generation;
    LlmEndpointConfig llm;
    int sync_timeout_ms = 30000;       // answer calls slower than this return 202
    int retry_after_seconds = 5;       // advertised on 502
    std::size_t threads = 8;

    // ROB_HOST, ROB_PORT, ROB_STORE_DIR, ROB_MODEL, ROB_MODE, ROB_RETRIEVER,
    // ROB_SYNC_TIMEOUT_MS, ROB_CONTEXT_WINDOW plus the LLM_* variables.
    static ServiceConfig from_env();
};

struct ApiError {
    int status = 500;
    std::string code;
    std::string message;
};

// One status per error code.
int http_status(ErrorCode code) noexcept;
ApiError to_api_error(const Error& e);

struct ApiResponse {
    int status = 200;
    ordered_json body;
    std::map<std::string, std::string> headers;
};

// Builds the LLM client for a model name; the default wraps make_llm_client.
using LlmFactory = std::function<std::shared_ptr<LLMClient>(const std::string& model)>;

// HTTP adapter over the document registry, session store and QA pipeline.
// Every handler is a short composition of module operations; mutations go
// through the session journal before the response is sent.
class Service {
public:
    explicit Service(ServiceConfig config, LlmFactory llm = {}, const Questionnaire& qn = default_questionnaire(),
                     const RuleSet& rules = default_rule_set(), const Clock& clock = system_clock());
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Routes a request without a socket (used by the server and by tests).
    ApiResponse handle(const std::string& method, const std::string& path, const std::string& body = {},
                       const std::map<std::string, std::string>& query = {});

    // OpenAPI 3 document generated from the route table.
    ordered_json openapi() const;

    // Binds and serves on a background thread; returns the bound port.
    int start();
    void stop();
    // Binds and serves on the calling thread until stop().
    void run();

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace rob
