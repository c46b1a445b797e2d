#pragma once

#include <algorithm>
#include <mutex>
#include <string>
#include <vector>

namespace narrative {

/// Collects the cassette fingerprints of every completion issued while a
/// TraceScope is active on the calling thread (parallel_for passes it on).
class CallTrace {
public:
    void add(const std::string& fp) {
        std::lock_guard lock(mu_);
        fps_.push_back(fp);
    }
    /// Sorted and unique, so parallel call order does not leak into outputs.
    std::vector<std::string> fingerprints() const {
        std::lock_guard lock(mu_);
        auto out = fps_;
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

private:
    mutable std::mutex mu_;
    std::vector<std::string> fps_;
};

inline thread_local CallTrace* active_trace = nullptr;

class TraceScope {
public:
    explicit TraceScope(CallTrace* trace) : prev_(active_trace) { active_trace = trace; }
    ~TraceScope() { active_trace = prev_; }
    TraceScope(const TraceScope&) = delete;
    TraceScope& operator=(const TraceScope&) = delete;

private:
    CallTrace* prev_;
};

}  // namespace narrative
