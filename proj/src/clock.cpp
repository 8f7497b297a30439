#include "robassist/clock.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

namespace rob {

std::string SystemClock::now() const {
    auto t = std::chrono::floor<std::chrono::milliseconds>(std::chrono::system_clock::now());
    auto secs = std::chrono::floor<std::chrono::seconds>(t);
    auto ms = (t - secs).count();
    std::time_t tt = std::chrono::system_clock::to_time_t(secs);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[80];
    std::snprintf(out, sizeof out, "%s.%03lldZ", buf, static_cast<long long>(ms));
    return out;
}

const Clock& system_clock() {
    static const SystemClock clock;
    return clock;
}

}  // namespace rob
