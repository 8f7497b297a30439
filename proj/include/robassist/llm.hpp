#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "robassist/clock.hpp"
#include "robassist/util.hpp"

namespace rob {

struct GenerationConfig {
    std::string model;
    double temperature = 0.0;
    int max_output_tokens = 256;
    // 0 means unknown; full-paper prompts are then not budget-checked.
    std::size_t context_window_tokens = 0;
};

// Throws ContextOverflow when prompt + max output exceed the model window.
void check_context_budget(const std::string& prompt, const GenerationConfig& config);

class LLMClient {
public:
    virtual ~LLMClient() = default;
    virtual std::string model_id() const = 0;
    // Must be safe to call concurrently.
    virtual std::string complete(const std::string& prompt, const GenerationConfig& config) = 0;
};

struct LlmEndpointConfig {
    std::string base_url;  // OpenAI-compatible; "/chat/completions" appended if missing
    std::string model;
    std::string api_key;
    int timeout_seconds = 120;

    // LLM_BASE_URL, LLM_MODEL, LLM_API_KEY, LLM_TIMEOUT
    static LlmEndpointConfig from_env();
};

class ChatCompletionsClient final : public LLMClient {
public:
    explicit ChatCompletionsClient(LlmEndpointConfig config);
    std::string model_id() const override { return config_.model; }
    std::string complete(const std::string& prompt, const GenerationConfig& config) override;

private:
    LlmEndpointConfig config_;
    std::string url_;
};

// Returns the same text for every prompt.
class FixedResponseClient final : public LLMClient {
public:
    explicit FixedResponseClient(std::string response, std::string model = "stub-fixed")
        : response_(std::move(response)), model_(std::move(model)) {}
    std::string model_id() const override { return model_; }
    std::string complete(const std::string&, const GenerationConfig&) override { return response_; }

private:
    std::string response_;
    std::string model_;
};

// Picks a label from a hash of the prompt; deterministic on every platform.
class HashStubClient final : public LLMClient {
public:
    std::string model_id() const override { return "stub-hash"; }
    std::string complete(const std::string& prompt, const GenerationConfig& config) override;
};

class FunctionClient final : public LLMClient {
public:
    using Fn = std::function<std::string(const std::string&)>;
    FunctionClient(Fn fn, std::string model = "stub-function") : fn_(std::move(fn)), model_(std::move(model)) {}
    std::string model_id() const override { return model_; }
    std::string complete(const std::string& prompt, const GenerationConfig&) override { return fn_(prompt); }

private:
    Fn fn_;
    std::string model_;
};

// Append-only JSON-lines audit trail. With an empty path entries are kept in
// memory only.
class AuditLog {
public:
    explicit AuditLog(std::filesystem::path path = {}, const Clock& clock = system_clock());
    void record(ordered_json entry);
    std::vector<ordered_json> entries() const;
    const Clock& clock() const noexcept { return clock_; }

private:
    std::filesystem::path path_;
    const Clock& clock_;
    mutable std::mutex mu_;
    std::vector<ordered_json> memory_;
};

// Logs each request and its response (or failure) with timestamps, then
// forwards unchanged.
class AuditedClient final : public LLMClient {
public:
    AuditedClient(LLMClient& inner, AuditLog& log) : inner_(inner), log_(log) {}
    std::string model_id() const override { return inner_.model_id(); }
    std::string complete(const std::string& prompt, const GenerationConfig& config) override;
    std::size_t calls() const noexcept { return calls_.load(); }

private:
    LLMClient& inner_;
    AuditLog& log_;
    std::atomic<std::size_t> calls_{0};
};

// "stub-hash", "stub-fixed:<text>" or "http" (endpoint from environment).
std::unique_ptr<LLMClient> make_llm_client(const std::string& spec, const LlmEndpointConfig& endpoint);

}  // namespace rob
