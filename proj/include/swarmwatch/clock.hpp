#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace swarmwatch {

/// Scheduling time source. Everything that waits does so through this
/// interface, so a whole campaign can run in simulated time.
class Clock {
public:
    virtual ~Clock() = default;
    [[nodiscard]] virtual std::int64_t now() const = 0;  // unix seconds
    virtual void sleep_until(std::int64_t t) = 0;
};

/// Simulated clock. sleep_until jumps straight to the target and notifies
/// observers (the sim world hooks in here to catch up on churn).
class SimClock final : public Clock {
public:
    explicit SimClock(std::int64_t start = 0) : now_(start) {}

    [[nodiscard]] std::int64_t now() const override { return now_; }

    void sleep_until(std::int64_t t) override {
        if (t > now_) {
            now_ = t;
            for (auto& f : observers_) f(now_);
        }
    }

    void on_advance(std::function<void(std::int64_t)> f) { observers_.push_back(std::move(f)); }

private:
    std::int64_t now_;
    std::vector<std::function<void(std::int64_t)>> observers_;
};

/// Wall clock for live measurement runs.
class RealClock final : public Clock {
public:
    [[nodiscard]] std::int64_t now() const override;
    void sleep_until(std::int64_t t) override;
};

} // namespace swarmwatch
