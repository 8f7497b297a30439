#pragma once

#include <string>
#include <string_view>

namespace rob {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // begins with '/'
};

// Throws Configuration for anything that is not http(s)://host[:port][/path].
ParsedUrl parse_url(std::string_view url);

// POSTs a JSON body and returns the response body. Non-2xx statuses and
// transport failures throw Upstream. An empty api_key sends no
// Authorization header.
std::string http_post_json(const std::string& url, const std::string& body, const std::string& api_key,
                           int timeout_seconds);

}  // namespace rob
