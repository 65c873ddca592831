#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atc/conflict/standard.hpp"
#include "atc/scenario/scenario.hpp"

namespace atc::agent {

// kinds: prompt, backend_text, tool_call, tool_result, command, note
struct TranscriptEvent {
    std::string kind;
    std::string agent; // single | planner | executor | verifier
    double clock_s = 0.0;
    nlohmann::json data;

    bool operator==(const TranscriptEvent&) const = default;
};

// Append-only record of one agent run. Carries the scenario itself so a
// transcript replays without external files, and no wall-clock timestamps so
// identical runs serialize byte-identically.
struct Transcript {
    std::string scenario_id;
    nlohmann::json config = nlohmann::json::object();
    scenario::Scenario scenario;
    std::vector<TranscriptEvent> events;
    std::string final_text;
    int score = 0;
    bool scored = false;
    std::vector<std::string> flags;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    int iterations = 0;
    int command_count = 0;
    double final_clock_s = 0.0;

    std::size_t token_usage() const { return prompt_tokens + completion_tokens; }
    bool has_flag(const std::string& name) const;
};

// Line-delimited JSON: header line, one line per event, footer line.
std::string to_jsonl(const Transcript& t);
Transcript from_jsonl(const std::string& text); // ParseError

struct ReplayResult {
    int score = 0;
    double final_clock_s = 0.0;
    int commands_applied = 0;
};

// Re-executes the recorded tool calls against a fresh world and verifies
// every produced result text matches the recording byte-for-byte, then
// simulates the same post-run horizon and rescores. Throws ReplayMismatch
// on any divergence.
ReplayResult replay_transcript(const Transcript& t, const conflict::SeparationStandard& standard);

} // namespace atc::agent
