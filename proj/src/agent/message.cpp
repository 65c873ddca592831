#include "atc/agent/message.hpp"

#include <fmt/format.h>

#include "atc/errors.hpp"

namespace atc::agent {
namespace {

std::string python_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'' || c == '\\') out += '\\';
        out += c;
    }
    out += '\'';
    return out;
}

std::string python_value(const nlohmann::json& v) {
    if (v.is_string()) return python_quote(v.get<std::string>());
    if (v.is_boolean()) return v.get<bool>() ? "True" : "False";
    if (v.is_null()) return "None";
    return v.dump();
}

void append_scratchpad(std::vector<Message>& out, const ScratchpadEntry& e) {
    out.push_back({"assistant", render_invocation(e.call)});
    out.push_back({"tool", e.result.text});
}

} // namespace

std::size_t estimate_tokens(const std::string& text) { return (text.size() + 3) / 4; }

std::size_t estimate_tokens(const std::vector<Message>& messages) {
    std::size_t total = 0;
    for (const auto& m : messages) total += estimate_tokens(m.content) + 4;
    return total;
}

std::string render_invocation(const tools::ToolCall& call) {
    std::string args = "{";
    bool first = true;
    if (call.args.is_object()) {
        for (auto it = call.args.begin(); it != call.args.end(); ++it) {
            if (!first) args += ", ";
            first = false;
            args += python_quote(it.key()) + ": " + python_value(it.value());
        }
    }
    args += "}";
    return fmt::format("Invoking: `{}` with `{}`", call.tool, args);
}

std::vector<Message> assemble_prompt(const PromptBundle& bundle, std::size_t token_budget) {
    if (bundle.system_prompt.empty()) {
        raise(Errc::config_error, "system prompt must be non-empty");
    }
    auto assemble = [&](std::size_t skip_scratchpad) {
        std::vector<Message> out;
        out.push_back({"system", bundle.system_prompt});
        if (!bundle.user_input.empty()) out.push_back({"user", bundle.user_input});
        for (const auto& m : bundle.chat_history) out.push_back(m);
        for (std::size_t i = skip_scratchpad; i < bundle.scratchpad.size(); ++i) {
            append_scratchpad(out, bundle.scratchpad[i]);
        }
        return out;
    };

    std::size_t skip = 0;
    std::vector<Message> msgs = assemble(skip);
    while (estimate_tokens(msgs) > token_budget && bundle.scratchpad.size() - skip > 1) {
        ++skip;
        msgs = assemble(skip);
    }
    if (estimate_tokens(msgs) > token_budget) {
        raise(Errc::context_overflow,
              fmt::format("minimal prompt needs ~{} tokens, budget is {}", estimate_tokens(msgs),
                          token_budget));
    }
    return msgs;
}

} // namespace atc::agent
