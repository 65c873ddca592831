#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atc/agent/message.hpp"
#include "atc/tools/toolkit.hpp"

namespace atc::agent {

struct BackendRequest {
    std::vector<Message> messages;
    std::vector<tools::ToolDescriptor> tools;
    double temperature = 0.3;
};

// One chat-completions-style assistant message plus reported usage
// (zero when the backend does not report it).
struct BackendRaw {
    nlohmann::json message;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

// Structured form of a backend reply: either a tool invocation or final text.
struct BackendOutput {
    std::optional<tools::ToolCall> invocation;
    std::string text;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;

    bool is_final() const { return !invocation.has_value(); }
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    virtual bool supports_tools() const { return true; }
    // Throws BackendError on transport or protocol failure.
    virtual BackendRaw complete(const BackendRequest& request) = 0;
};

// Wire-format helpers shared by the scripted backends and tests.
BackendRaw raw_text(const std::string& text);
BackendRaw raw_tool_call(const tools::ToolCall& call);

// Validates the assistant message: a well-formed tool_calls entry becomes an
// invocation with JSON-object arguments, plain content becomes final text.
// Throws MalformedToolCall on structural problems (missing name, argument
// string that is not a JSON object). Tool-name and argument-schema problems
// surface later, at execution, so the loop can feed them back as text.
BackendOutput parse_backend_output(const BackendRaw& raw);

// Calls backend.complete up to `attempts` times, sleeping between failures
// (exponential backoff via the injectable sleeper; seconds). Rethrows the
// last BackendError once attempts are exhausted.
using SleepFn = std::function<void(double)>;
BackendRaw complete_with_retries(Backend& backend, const BackendRequest& request, int attempts,
                                 const SleepFn& sleep);

} // namespace atc::agent
