#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "atc/tools/toolkit.hpp"

namespace atc::agent {

struct Message {
    std::string role; // system | user | assistant | tool
    std::string content;

    bool operator==(const Message&) const = default;
};

// One environment interaction: the invocation the model asked for and what
// the tool returned.
struct ScratchpadEntry {
    tools::ToolCall call;
    tools::ToolResult result;
};

// The four prompt components, assembled in this order.
struct PromptBundle {
    std::string system_prompt;
    std::string user_input;
    std::vector<Message> chat_history;
    std::vector<ScratchpadEntry> scratchpad;
};

// Backends report usage when they can; this estimate (ceil of chars/4) fills
// in when they don't and feeds the rate limiter.
std::size_t estimate_tokens(const std::string& text);
std::size_t estimate_tokens(const std::vector<Message>& messages);

// "Invoking: `TOOL` with `{'key': value}`", matching the operation logs the
// models emit. Deterministic: keys alphabetical, strings single-quoted.
std::string render_invocation(const tools::ToolCall& call);

// Assembles [system][user][history][scratchpad] into a message sequence.
// When the estimate exceeds token_budget, oldest scratchpad entries drop
// first; the system prompt and the latest tool result always survive.
// Throws ConfigError on an empty system prompt, ContextOverflow when even
// the minimal sequence exceeds the budget.
std::vector<Message> assemble_prompt(const PromptBundle& bundle, std::size_t token_budget);

} // namespace atc::agent
