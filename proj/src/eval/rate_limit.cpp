#include "atc/eval/rate_limit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "atc/errors.hpp"

namespace atc::eval {

namespace {

double steady_now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void real_sleep(double seconds) {
    if (seconds > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

} // namespace

TokenBucket::TokenBucket(std::size_t budget_per_minute, ClockFn clock, SleepFn sleep)
    : budget_(budget_per_minute),
      clock_(clock ? std::move(clock) : ClockFn(steady_now_s)),
      sleep_(sleep ? std::move(sleep) : SleepFn(real_sleep)) {
    if (budget_ == 0) raise(Errc::config_error, "token budget must be positive");
    window_start_s_ = clock_();
    available_tokens_ = static_cast<long long>(budget_);
}

void TokenBucket::refill_locked(double now) {
    double elapsed = now - window_start_s_;
    if (elapsed < 60.0) return;
    double windows = std::floor(elapsed / 60.0);
    window_start_s_ += windows * 60.0;
    available_tokens_ = static_cast<long long>(budget_);
}

void TokenBucket::acquire(std::size_t tokens) {
    if (tokens == 0) return;
    long long need = std::min<long long>(static_cast<long long>(tokens),
                                         static_cast<long long>(budget_));
    for (;;) {
        double wait;
        {
            std::lock_guard lock(mu_);
            refill_locked(clock_());
            if (available_tokens_ >= need) {
                available_tokens_ -= static_cast<long long>(tokens);
                ledger_total_ += static_cast<long long>(tokens);
                return;
            }
            wait = std::max(0.0, window_start_s_ + 60.0 - clock_());
        }
        sleep_(wait > 0.0 ? wait : 0.001);
    }
}

void TokenBucket::reconcile(long long delta) {
    std::lock_guard lock(mu_);
    ledger_total_ += delta;
    available_tokens_ =
        std::min(available_tokens_ - delta, static_cast<long long>(budget_));
}

long long TokenBucket::ledger_total() const {
    std::lock_guard lock(mu_);
    return ledger_total_;
}

long long TokenBucket::available() const {
    std::lock_guard lock(mu_);
    return available_tokens_;
}

} // namespace atc::eval
