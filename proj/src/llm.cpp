#include "robassist/llm.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>

#include "robassist/answer.hpp"
#include "robassist/error.hpp"
#include "robassist/http_util.hpp"
#include "robassist/prompt.hpp"

namespace rob {

void check_context_budget(const std::string& prompt, const GenerationConfig& config) {
    if (config.context_window_tokens == 0) return;
    auto need = estimate_tokens(prompt) + static_cast<std::size_t>(std::max(config.max_output_tokens, 0));
    if (need > config.context_window_tokens)
        fail(ErrorCode::ContextOverflow, "prompt needs ~" + std::to_string(need) + " tokens, model window is " +
                                             std::to_string(config.context_window_tokens));
}

namespace {

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

}  // namespace

LlmEndpointConfig LlmEndpointConfig::from_env() {
    LlmEndpointConfig c;
    c.base_url = env_or("LLM_BASE_URL", "");
    c.model = env_or("LLM_MODEL", "");
    c.api_key = env_or("LLM_API_KEY", "");
    auto t = env_or("LLM_TIMEOUT", "");
    if (!t.empty()) {
        try {
            c.timeout_seconds = std::stoi(t);
        } catch (const std::exception&) {
            fail(ErrorCode::Configuration, "LLM_TIMEOUT is not an integer: " + t);
        }
    }
    return c;
}

ChatCompletionsClient::ChatCompletionsClient(LlmEndpointConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) fail(ErrorCode::Configuration, "LLM endpoint not configured (set LLM_BASE_URL)");
    if (config_.model.empty()) fail(ErrorCode::Configuration, "LLM model not configured (set LLM_MODEL)");
    url_ = config_.base_url;
    while (!url_.empty() && url_.back() == '/') url_.pop_back();
    if (!url_.ends_with("/chat/completions")) url_ += "/chat/completions";
    parse_url(url_);
}

std::string ChatCompletionsClient::complete(const std::string& prompt, const GenerationConfig& config) {
    ordered_json body;
    body["model"] = config.model.empty() ? config_.model : config.model;
    body["messages"] = ordered_json::array({{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = config.temperature;
    body["max_tokens"] = config.max_output_tokens;
    auto raw = http_post_json(url_, body.dump(), config_.api_key, config_.timeout_seconds);
    json resp;
    try {
        resp = json::parse(raw);
        return resp.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        fail(ErrorCode::Upstream, "unexpected completion payload: " + raw.substr(0, 300));
    }
}

std::string HashStubClient::complete(const std::string& prompt, const GenerationConfig&) {
    auto h = fnv1a64(prompt);
    auto answer = kResponseOptions[h % kResponseOptions.size()];
    auto label = std::string(answer_label(answer));
    label[0] = static_cast<char>(label[0] - 'a' + 'A');
    return label + ". Stub rationale " + sha256_hex(prompt).substr(0, 8) + ".";
}

AuditLog::AuditLog(std::filesystem::path path, const Clock& clock) : path_(std::move(path)), clock_(clock) {}

void AuditLog::record(ordered_json entry) {
    ordered_json line;
    line["ts"] = clock_.now();
    for (auto& [k, v] : entry.items()) line[k] = std::move(v);
    std::lock_guard lock(mu_);
    if (path_.empty())
        memory_.push_back(std::move(line));
    else
        append_line(path_, line.dump());
}

std::vector<ordered_json> AuditLog::entries() const {
    std::lock_guard lock(mu_);
    if (!path_.empty()) {
        std::vector<ordered_json> out;
        if (!std::filesystem::exists(path_)) return out;
        auto text = read_file(path_);
        std::size_t start = 0;
        while (start < text.size()) {
            auto end = text.find('\n', start);
            if (end == std::string::npos) end = text.size();
            if (end > start) out.push_back(ordered_json::parse(text.substr(start, end - start)));
            start = end + 1;
        }
        return out;
    }
    return memory_;
}

std::string AuditedClient::complete(const std::string& prompt, const GenerationConfig& config) {
    ++calls_;
    auto digest = sha256_hex(prompt);
    log_.record({{"event", "llm_request"},
                 {"model", config.model.empty() ? inner_.model_id() : config.model},
                 {"prompt_sha256", digest},
                 {"temperature", config.temperature},
                 {"max_output_tokens", config.max_output_tokens},
                 {"prompt", prompt}});
    try {
        auto out = inner_.complete(prompt, config);
        log_.record({{"event", "llm_response"}, {"prompt_sha256", digest}, {"response", out}});
        return out;
    } catch (const std::exception& e) {
        log_.record({{"event", "llm_error"}, {"prompt_sha256", digest}, {"error", e.what()}});
        throw;
    }
}

std::unique_ptr<LLMClient> make_llm_client(const std::string& spec, const LlmEndpointConfig& endpoint) {
    if (spec == "stub-hash" || spec == "stub") return std::make_unique<HashStubClient>();
    if (spec.starts_with("stub-fixed:")) return std::make_unique<FixedResponseClient>(spec.substr(11));
    if (spec == "http" || spec.empty()) return std::make_unique<ChatCompletionsClient>(endpoint);
    // any other value names a model on the configured endpoint
    auto c = endpoint;
    c.model = spec;
    return std::make_unique<ChatCompletionsClient>(c);
}

}  // namespace rob
