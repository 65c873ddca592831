#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "atc/agent/backend.hpp"
#include "atc/agent/transcript.hpp"
#include "atc/conflict/standard.hpp"
#include "atc/scenario/scenario.hpp"
#include "atc/tools/toolkit.hpp"

namespace atc::agent {

enum class AgentRole { single, planner, executor, verifier };

const char* role_name(AgentRole role);

// Shipped default prompt text per role; config fields override.
const std::string& default_system_prompt(AgentRole role);
const std::string& default_user_input(AgentRole role);

struct AgentConfig {
    AgentRole role = AgentRole::single;
    std::string backend_id;
    double temperature = 0.3;
    int max_iterations = 20;
    bool experience_enabled = false;
    std::size_t context_budget_tokens = 120000;
    std::string system_prompt; // empty = role default
    std::string user_input;    // empty = role default

    void validate() const; // ConfigError
    nlohmann::json to_json() const;
};

struct MultiAgentConfig {
    AgentConfig planner{AgentRole::planner};
    AgentConfig executor{AgentRole::executor};
    AgentConfig verifier{AgentRole::verifier};
    int replan_limit = 3;

    void validate() const;
    nlohmann::json to_json() const;
};

// Optional environment couplings; every hook may be left empty.
struct RunHooks {
    tools::ExperienceSearchFn experience_search;
    SleepFn sleep;                                   // backoff between backend retries
    std::function<void(std::size_t)> rate_admit;     // estimated tokens, before each call
    std::function<void(long long)> rate_reconcile;   // actual minus estimated, after
};

// Simulated time never advances while the model deliberates; only tool
// execution and the post-run horizon move the world clock.
Transcript run_single_agent(const scenario::Scenario& s, const AgentConfig& config,
                            Backend& backend, const conflict::SeparationStandard& standard,
                            const RunHooks& hooks = {});

// Planner drafts, executor sends, verifier checks and either concludes or
// re-plans (bounded by replan_limit, then flagged ReplanLimitExceeded).
Transcript run_multi_agent(const scenario::Scenario& s, const MultiAgentConfig& config,
                           Backend& planner, Backend& executor, Backend& verifier,
                           const conflict::SeparationStandard& standard, const RunHooks& hooks = {});

// Pulls executable commands out of free-form plan text, one per line:
// either verbatim "HDG CS 225" grammar or prose like
// "FLIGHT2: Climb to an altitude of 36200 ft". The first known callsign in
// the line owns the command. Throws PlanExtractionError when nothing parses
// and `required` is set.
std::vector<std::string> extract_plan_commands(const std::string& plan,
                                               const std::vector<std::string>& callsigns,
                                               bool required);

// Shared by the live loop and transcript replay: converts tool failures into
// "Tool error: ..." results and keeps SENDCOMMAND off-limits to planner and
// verifier agents.
tools::ToolResult execute_for_agent(tools::ToolKit& kit, const tools::ToolCall& call,
                                    const std::string& agent);

} // namespace atc::agent
