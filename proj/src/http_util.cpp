#include "robassist/http_util.hpp"

#include <httplib.h>

#include "robassist/error.hpp"

namespace rob {

ParsedUrl parse_url(std::string_view url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) fail(ErrorCode::Configuration, "endpoint URL needs a scheme: " + std::string(url));
    auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        fail(ErrorCode::Configuration, "unsupported endpoint scheme: " + std::string(scheme));
    auto rest = url.substr(scheme_end + 3);
    auto slash = rest.find('/');
    ParsedUrl out;
    auto host = rest.substr(0, slash);
    if (host.empty()) fail(ErrorCode::Configuration, "endpoint URL has no host: " + std::string(url));
    out.origin = std::string(scheme) + "://" + std::string(host);
    out.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
    return out;
}

std::string http_post_json(const std::string& url, const std::string& body, const std::string& api_key,
                           int timeout_seconds) {
    auto u = parse_url(url);
    httplib::Client cli(u.origin);
    cli.set_connection_timeout(timeout_seconds, 0);
    cli.set_read_timeout(timeout_seconds, 0);
    cli.set_write_timeout(timeout_seconds, 0);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = cli.Post(u.path, headers, body, "application/json");
    if (!res) fail(ErrorCode::Upstream, "request to " + url + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        fail(ErrorCode::Upstream, "request to " + url + " returned HTTP " + std::to_string(res->status) + ": " +
                                      res->body.substr(0, 500));
    return res->body;
}

}  // namespace rob
