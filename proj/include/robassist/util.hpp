#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace rob {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string sha256_hex(std::string_view bytes);

// 64-bit FNV-1a; stable across platforms.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);
void append_line(const std::filesystem::path& path, std::string_view line);

json parse_json(std::string_view bytes, std::string_view what);
json read_json_file(const std::filesystem::path& path);

std::string trim(std::string_view s);

// Round to 1e-6 so serialized scores do not depend on the last ulp.
double quantize(double value) noexcept;

}  // namespace rob
