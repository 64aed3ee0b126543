#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <mutex>

namespace destigma {

using Micros = std::chrono::microseconds;

struct RateLimitConfig {
    std::int64_t rpm{60};   // requests per minute, > 0
    std::int64_t burst{1};  // bucket capacity, 1..rpm

    void validate() const;
};

// Token bucket (capacity `burst`, refill rpm/60 per second) combined with a
// log of the last `rpm` grants so that no half-open 60 s window ever holds
// more than `rpm` grants. acquire() reserves the next grant: the caller must
// wait the returned duration before dispatching. Grants are handed out in
// call order. Time is supplied by the caller, which keeps the limiter usable
// under a simulated clock.
class RateLimiter {
public:
    explicit RateLimiter(RateLimitConfig cfg);

    Micros acquire(Micros now);

    const RateLimitConfig& config() const noexcept { return cfg_; }

private:
    static constexpr Micros kWindow{std::chrono::seconds(60)};

    double tokens_at(Micros t) const;

    RateLimitConfig cfg_;
    double tokens_;
    Micros last_update_{0};
    Micros last_grant_{Micros::min()};
    std::deque<Micros> grants_;
    mutable std::mutex mu_;
};

// Time source used by the gateway for rate limiting, latency and backoff.
class Clock {
public:
    virtual ~Clock() = default;
    virtual Micros now() = 0;
    virtual void sleep_for(Micros d) = 0;
};

class SteadyClock final : public Clock {
public:
    Micros now() override;
    void sleep_for(Micros d) override;
};

// Deterministic clock for tests: sleeping advances virtual time instantly.
class SimulatedClock final : public Clock {
public:
    explicit SimulatedClock(Micros start = Micros{0}) : now_(start) {}
    Micros now() override;
    void sleep_for(Micros d) override;
    void advance(Micros d) { sleep_for(d); }

private:
    std::mutex mu_;
    Micros now_;
};

}  // namespace destigma
