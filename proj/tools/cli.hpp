#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "robassist/llm.hpp"
#include "robassist/retrieval.hpp"

namespace rob::cli {

struct CliConfig {
    std::filesystem::path data_dir;
    std::filesystem::path out = "out";
    std::string model = "stub-hash";
    std::string mode = "topk:3";
    std::string retriever = "dense";  // dense | bm25 | sidecar (eval: comma list or "all")
    std::vector<std::size_t> ks{1, 3, 5, 10};
    std::size_t jobs = 1;
    std::uint64_t seed = 0;
    std::optional<std::string> fixed_clock;
    std::string embedder = "hash";  // hash | http
    std::size_t embed_dim = 64;
    GenerationConfig generation;
    LlmEndpointConfig llm;
    EmbeddingServiceConfig embedding;

    // Everything except credentials.
    ordered_json to_json() const;
};

// One configurable setting: config-file key, environment variable, flag.
struct Setting {
    const char* key;
    const char* env;
    const char* flag;
    const char* help;
};
const std::vector<Setting>& settings();

using EnvLookup = std::function<std::optional<std::string>(const char*)>;
EnvLookup process_env();

// Defaults, then the config file, then the environment, then flags; each
// layer only overrides the keys it sets. `flags` is keyed by Setting::key.
CliConfig resolve_config(const json& file, const EnvLookup& env, const std::map<std::string, std::string>& flags);

// Entry point; returns the process exit code. Machine-readable results go
// under --out, a human summary to `out`, structured errors to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rob::cli
