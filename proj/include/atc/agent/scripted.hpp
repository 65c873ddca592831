#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "atc/agent/backend.hpp"

namespace atc::agent {

// Declines to act; every scenario run under it ends unmanaged.
class NoopBackend : public Backend {
public:
    std::string id() const override { return "scripted:noop"; }
    BackendRaw complete(const BackendRequest&) override {
        return raw_text("No intervention required; concluding monitoring.");
    }
};

// Replays a fixed decision table. Each step may pin a substring the latest
// observation must contain; a mismatch aborts the script with a visible
// final text instead of pressing on blindly.
struct ScriptedStep {
    std::string expect_in_observation; // empty = no guard
    std::optional<tools::ToolCall> call; // nullopt = emit `text` as final
    std::string text;
};

class SequenceBackend : public Backend {
public:
    SequenceBackend(std::string id, std::vector<ScriptedStep> steps)
        : id_(std::move(id)), steps_(std::move(steps)) {}

    std::string id() const override { return id_; }
    BackendRaw complete(const BackendRequest& request) override;

private:
    std::string id_;
    std::vector<ScriptedStep> steps_;
    std::size_t next_ = 0;
};

// Rule-based resolver: reads the rendered conflict info, sorts the involved
// aircraft by current altitude and parks them on levels 1000 ft apart
// anchored at the lowest flight. Ordering by altitude keeps every transition
// monotone, so no pair ever crosses through another's level on the way.
class LayeringBackend : public Backend {
public:
    explicit LayeringBackend(double spacing_ft = 1000.0, double monitor_s = 60.0)
        : spacing_ft_(spacing_ft), monitor_s_(monitor_s) {}

    std::string id() const override { return "scripted:layering"; }
    BackendRaw complete(const BackendRequest& request) override;

private:
    double spacing_ft_;
    double monitor_s_;
    std::deque<std::string> queue_;
    int rounds_ = 0;
};

// Mechanical plan follower: sends each "- <command>" line of the latest
// user brief exactly once, in order, then reports completion. Never touches
// any other tool, which makes executor purity a structural property.
class ExecutorBackend : public Backend {
public:
    std::string id() const override { return "scripted:executor"; }
    BackendRaw complete(const BackendRequest& request) override;

private:
    std::string brief_;
    std::deque<std::string> queue_;
};

// Adapter for one-off test behaviors.
class FunctionBackend : public Backend {
public:
    using Fn = std::function<BackendRaw(const BackendRequest&)>;
    FunctionBackend(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}

    std::string id() const override { return id_; }
    BackendRaw complete(const BackendRequest& request) override { return fn_(request); }

private:
    std::string id_;
    Fn fn_;
};

// Latest tool observation in the request, empty when none exists yet.
std::string last_observation(const BackendRequest& request);

// Altitude block lines ("CS: Altitude X ft -> Y ft (trend)") parsed out of a
// rendered observation, in rendering order.
std::vector<std::pair<std::string, double>> parse_altitude_lines(const std::string& text);

} // namespace atc::agent
