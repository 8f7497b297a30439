#pragma once

#include <string>
#include <utility>

namespace rob {

// Source of ISO-8601 UTC timestamps. Fixed clocks make exports and logs
// byte-reproducible.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::string now() const = 0;
};

class SystemClock final : public Clock {
public:
    std::string now() const override;
};

class FixedClock final : public Clock {
public:
    explicit FixedClock(std::string stamp = "1970-01-01T00:00:00Z") : stamp_(std::move(stamp)) {}
    std::string now() const override { return stamp_; }

private:
    std::string stamp_;
};

const Clock& system_clock();

}  // namespace rob
