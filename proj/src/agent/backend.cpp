#include "atc/agent/backend.hpp"

#include <fmt/format.h>

#include "atc/errors.hpp"

namespace atc::agent {

using nlohmann::json;

BackendRaw raw_text(const std::string& text) {
    BackendRaw raw;
    raw.message = {{"role", "assistant"}, {"content", text}};
    return raw;
}

BackendRaw raw_tool_call(const tools::ToolCall& call) {
    BackendRaw raw;
    raw.message = {{"role", "assistant"},
                   {"content", nullptr},
                   {"tool_calls",
                    json::array({{{"id", "call_0"},
                                  {"type", "function"},
                                  {"function",
                                   {{"name", call.tool}, {"arguments", call.args.dump()}}}}})}};
    return raw;
}

BackendOutput parse_backend_output(const BackendRaw& raw) {
    BackendOutput out;
    out.prompt_tokens = raw.prompt_tokens;
    out.completion_tokens = raw.completion_tokens;
    const json& m = raw.message;
    if (!m.is_object()) raise(Errc::malformed_tool_call, "backend message is not an object");

    if (m.contains("tool_calls") && !m.at("tool_calls").is_null()) {
        const json& calls = m.at("tool_calls");
        if (!calls.is_array() || calls.empty()) {
            raise(Errc::malformed_tool_call, "tool_calls must be a non-empty array");
        }
        const json& first = calls.at(0);
        if (!first.contains("function")) {
            raise(Errc::malformed_tool_call, "tool call carries no function object");
        }
        const json& fn = first.at("function");
        if (!fn.contains("name") || !fn.at("name").is_string() ||
            fn.at("name").get<std::string>().empty()) {
            raise(Errc::malformed_tool_call, "tool call has no name");
        }
        tools::ToolCall call;
        call.tool = fn.at("name").get<std::string>();
        if (fn.contains("arguments") && !fn.at("arguments").is_null()) {
            const json& args = fn.at("arguments");
            if (args.is_object()) {
                call.args = args;
            } else if (args.is_string()) {
                try {
                    call.args = json::parse(args.get<std::string>());
                } catch (const json::exception& e) {
                    raise(Errc::malformed_tool_call,
                          fmt::format("arguments are not valid JSON: {}", e.what()));
                }
                if (!call.args.is_object()) {
                    raise(Errc::malformed_tool_call, "arguments must be a JSON object");
                }
            } else {
                raise(Errc::malformed_tool_call, "arguments must be a JSON object or string");
            }
        }
        out.invocation = std::move(call);
        return out;
    }

    if (!m.contains("content") || m.at("content").is_null()) {
        raise(Errc::malformed_tool_call, "backend message has neither content nor tool_calls");
    }
    if (!m.at("content").is_string()) {
        raise(Errc::malformed_tool_call, "backend content is not text");
    }
    out.text = m.at("content").get<std::string>();
    return out;
}

BackendRaw complete_with_retries(Backend& backend, const BackendRequest& request, int attempts,
                                 const SleepFn& sleep) {
    double delay_s = 0.5;
    for (int attempt = 1;; ++attempt) {
        try {
            return backend.complete(request);
        } catch (const AtcError& e) {
            if (e.code() != Errc::backend_error || attempt >= attempts) throw;
            if (sleep) sleep(delay_s);
            delay_s *= 4.0;
        }
    }
}

} // namespace atc::agent
