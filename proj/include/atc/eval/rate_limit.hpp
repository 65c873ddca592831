#pragma once

#include <cstddef>
#include <functional>
#include <mutex>

namespace atc::eval {

// Token-per-minute admission control. The budget refills to full at fixed
// 60 s window boundaries; a request that does not fit waits for the next
// boundary instead of being dropped. acquire() deducts up front from the
// caller's estimate, reconcile() trues the ledger up once the backend
// reports real usage, so the ledger total always equals the sum of actual
// per-request consumption.
class TokenBucket {
public:
    using ClockFn = std::function<double()>;    // seconds, monotone
    using SleepFn = std::function<void(double)>;

    // clock/sleep default to the steady clock and a real sleep; tests inject
    // a fake pair to make waiting instantaneous and observable.
    explicit TokenBucket(std::size_t budget_per_minute, ClockFn clock = {}, SleepFn sleep = {});

    std::size_t budget_per_minute() const { return budget_; }

    // Blocks until the request fits in the current window, then deducts.
    // Zero-token requests are admitted immediately. A request larger than
    // the whole budget is admitted into a full window and borrows from the
    // next one rather than waiting forever.
    void acquire(std::size_t tokens);

    // actual minus estimated for an already-admitted request; may push the
    // balance negative, which the next window refill clears.
    void reconcile(long long delta);

    long long ledger_total() const;
    long long available() const;

private:
    void refill_locked(double now);

    std::size_t budget_;
    ClockFn clock_;
    SleepFn sleep_;
    double window_start_s_;
    long long available_tokens_;
    long long ledger_total_ = 0;
    mutable std::mutex mu_;
};

} // namespace atc::eval
