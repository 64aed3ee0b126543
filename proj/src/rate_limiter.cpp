#include "destigma/rate_limiter.hpp"

#include "destigma/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

namespace destigma {

void RateLimitConfig::validate() const {
    if (rpm <= 0) {
        throw Error(Errc::Config, "rpm must be positive, got " + std::to_string(rpm));
    }
    if (burst < 1 || burst > rpm) {
        throw Error(Errc::Config, "burst must be in [1, rpm], got " + std::to_string(burst));
    }
}

RateLimiter::RateLimiter(RateLimitConfig cfg) : cfg_(cfg), tokens_(static_cast<double>(cfg.burst)) {
    cfg_.validate();
}

double RateLimiter::tokens_at(Micros t) const {
    const double per_us = static_cast<double>(cfg_.rpm) / static_cast<double>(kWindow.count());
    const double refilled = tokens_ + static_cast<double>((t - last_update_).count()) * per_us;
    return std::min(static_cast<double>(cfg_.burst), refilled);
}

Micros RateLimiter::acquire(Micros now) {
    std::lock_guard lock(mu_);
    const double per_us = static_cast<double>(cfg_.rpm) / static_cast<double>(kWindow.count());

    Micros t = now;
    if (last_grant_ == Micros::min()) {
        last_update_ = t;  // first use: bucket starts full
    } else {
        t = std::max(t, last_grant_);
    }

    double available = tokens_at(t);
    if (available < 1.0) {
        const auto deficit_us = static_cast<std::int64_t>(std::ceil((1.0 - available) / per_us));
        t += Micros{deficit_us};
    }
    if (static_cast<std::int64_t>(grants_.size()) >= cfg_.rpm) {
        t = std::max(t, grants_.front() + kWindow);
    }

    // Floating point refill can land a hair below one token after rounding
    // the wait up to whole microseconds; clamp so the bucket never goes negative.
    tokens_ = std::max(0.0, tokens_at(t) - 1.0);
    last_update_ = t;
    last_grant_ = t;
    grants_.push_back(t);
    while (static_cast<std::int64_t>(grants_.size()) > cfg_.rpm) {
        grants_.pop_front();
    }
    return t - now;
}

Micros SteadyClock::now() {
    return std::chrono::duration_cast<Micros>(std::chrono::steady_clock::now().time_since_epoch());
}

void SteadyClock::sleep_for(Micros d) {
    if (d.count() > 0) {
        std::this_thread::sleep_for(d);
    }
}

Micros SimulatedClock::now() {
    std::lock_guard lock(mu_);
    return now_;
}

void SimulatedClock::sleep_for(Micros d) {
    std::lock_guard lock(mu_);
    if (d.count() > 0) {
        now_ += d;
    }
}

}  // namespace destigma
