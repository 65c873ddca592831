#include "atc/agent/runtime.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#include "atc/conflict/metrics.hpp"
#include "atc/errors.hpp"

namespace atc::agent {

using nlohmann::json;

const char* role_name(AgentRole role) {
    switch (role) {
        case AgentRole::single: return "single";
        case AgentRole::planner: return "planner";
        case AgentRole::executor: return "executor";
        case AgentRole::verifier: return "verifier";
    }
    return "single";
}

const std::string& default_system_prompt(AgentRole role) {
    static const std::string single =
        "You are an en-route air traffic controller. Keep every aircraft pair separated by at "
        "least 5 NM horizontally or 1000 ft vertically at all times.\n"
        "Interact with the airspace only through the provided tools. Work stepwise: inspect the "
        "traffic, check predicted conflicts, change one aircraft at a time with SENDCOMMAND "
        "(HDG <callsign> <degrees>, ALT <callsign> <feet>, SPD <callsign> <knots>), then monitor "
        "to confirm the effect before the next change.\n"
        "Prefer decisive maneuvers: altitude changes of 2000 ft or more, heading changes of 20 "
        "degrees or more. Avoid creating new conflicts while resolving existing ones.\n"
        "When no conflicts remain, reply with plain text summarizing what you did instead of "
        "calling another tool.";
    static const std::string planner =
        "You are the planner of an air traffic control team. Keep every aircraft pair separated "
        "by at least 5 NM horizontally or 1000 ft vertically.\n"
        "Inspect the airspace with the provided tools and produce a conflict-resolution plan. "
        "You cannot send commands yourself; the executor agent sends them verbatim.\n"
        "Resolve every predicted conflict without creating new ones, preferring altitude changes "
        "of 2000 ft or more.\n"
        "When the plan is ready, reply with plain text: one numbered line per command, naming "
        "one aircraft and one exact target each, for example:\n"
        "1. **FLIGHT2**: Climb to an altitude of 36200 ft.\n"
        "2. **AB112**: Turn to a heading of 225 degrees.";
    static const std::string executor =
        "You are the executor of an air traffic control team. Your sole function is to issue the "
        "planned commands.\n"
        "Send each command from the brief exactly once with SENDCOMMAND, in the given order, "
        "changing nothing.\n"
        "When every command has been sent, reply with plain text confirming completion.";
    static const std::string verifier =
        "You are the verifier of an air traffic control team. Keep every aircraft pair separated "
        "by at least 5 NM horizontally or 1000 ft vertically.\n"
        "A plan has just been executed. Monitor the airspace with the provided tools and decide "
        "whether the conflicts are actually resolved.\n"
        "If the airspace stays clear, reply with plain text stating that the task is concluded, "
        "and do not mention any aircraft or numeric targets in that reply.\n"
        "If conflicts persist or new ones appeared, reply with a corrected plan: one numbered "
        "line per command, for example:\n"
        "1. **FLIGHT4**: Descend to an altitude of 30200 ft.";
    switch (role) {
        case AgentRole::single: return single;
        case AgentRole::planner: return planner;
        case AgentRole::executor: return executor;
        case AgentRole::verifier: return verifier;
    }
    return single;
}

const std::string& default_user_input(AgentRole role) {
    static const std::string single =
        "Resolve all current and predicted conflicts in the airspace, then report the outcome.";
    static const std::string planner =
        "Inspect the airspace and produce a plan that resolves every predicted conflict.";
    static const std::string executor = "Execute the plan from the brief.";
    static const std::string verifier =
        "Check whether the executed plan resolved every conflict. Conclude if the airspace is "
        "clear, or provide a corrected plan.";
    switch (role) {
        case AgentRole::single: return single;
        case AgentRole::planner: return planner;
        case AgentRole::executor: return executor;
        case AgentRole::verifier: return verifier;
    }
    return single;
}

void AgentConfig::validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        raise(Errc::config_error, fmt::format("temperature {} outside [0, 2]", temperature));
    }
    if (max_iterations < 1) {
        raise(Errc::config_error, fmt::format("max_iterations {} must be >= 1", max_iterations));
    }
    if (context_budget_tokens == 0) {
        raise(Errc::config_error, "context_budget_tokens must be positive");
    }
}

json AgentConfig::to_json() const {
    return {{"role", role_name(role)},
            {"backend", backend_id},
            {"temperature", temperature},
            {"max_iterations", max_iterations},
            {"experience_enabled", experience_enabled},
            {"context_budget_tokens", context_budget_tokens},
            {"system_prompt", system_prompt.empty() ? "(default)" : system_prompt},
            {"user_input", user_input.empty() ? "(default)" : user_input}};
}

void MultiAgentConfig::validate() const {
    planner.validate();
    executor.validate();
    verifier.validate();
    if (planner.role != AgentRole::planner || executor.role != AgentRole::executor ||
        verifier.role != AgentRole::verifier) {
        raise(Errc::config_error, "multi-agent roles must be planner, executor, verifier");
    }
    if (executor.experience_enabled) {
        raise(Errc::config_error, "the executor agent takes no experience input");
    }
    if (replan_limit < 0) {
        raise(Errc::config_error, fmt::format("replan_limit {} must be >= 0", replan_limit));
    }
}

json MultiAgentConfig::to_json() const {
    return {{"planner", planner.to_json()},
            {"executor", executor.to_json()},
            {"verifier", verifier.to_json()},
            {"replan_limit", replan_limit}};
}

tools::ToolResult execute_for_agent(tools::ToolKit& kit, const tools::ToolCall& call,
                                    const std::string& agent) {
    auto fail = [&](const std::string& why) {
        tools::ToolResult res;
        res.text = fmt::format("Tool error: {}", why);
        res.payload = {{"error", why}};
        res.clock_s = kit.world().clock_s();
        return res;
    };
    if ((agent == "planner" || agent == "verifier") && call.tool == "SENDCOMMAND") {
        return fail("SENDCOMMAND is reserved for the executor agent");
    }
    if (agent == "executor" && call.tool != "SENDCOMMAND") {
        return fail(fmt::format("the executor agent only issues SENDCOMMAND, not {}", call.tool));
    }
    try {
        return kit.execute(call);
    } catch (const AtcError& e) {
        return fail(e.what());
    }
}

namespace {

void add_flag(Transcript& t, const std::string& flag) {
    if (!t.has_flag(flag)) t.flags.push_back(flag);
}

std::vector<tools::ToolDescriptor> offered_tools(const tools::ToolKit& kit,
                                                 const AgentConfig& cfg) {
    std::vector<tools::ToolDescriptor> out;
    for (const auto& d : kit.available_descriptors()) {
        if (d.name == "SEARCHEXPERIENCELIBRARY" && !cfg.experience_enabled) continue;
        if (cfg.role == AgentRole::executor && d.name != "SENDCOMMAND") continue;
        if ((cfg.role == AgentRole::planner || cfg.role == AgentRole::verifier) &&
            d.name == "SENDCOMMAND") {
            continue;
        }
        out.push_back(d);
    }
    return out;
}

struct LoopOutcome {
    std::string final_text;
    int iterations = 0;
    bool hit_cap = false;
    bool aborted_malformed = false;
};

// Shared deliberation loop: prompt, call the backend, execute at most one
// tool per iteration, append to the scratchpad, stop on plain text. The
// world clock moves only inside tool execution.
LoopOutcome run_tool_loop(tools::ToolKit& kit, Backend& backend, const AgentConfig& cfg,
                          const std::string& user_input, Transcript& t, const RunHooks& hooks) {
    const std::string agent = role_name(cfg.role);
    PromptBundle bundle;
    bundle.system_prompt =
        cfg.system_prompt.empty() ? default_system_prompt(cfg.role) : cfg.system_prompt;
    bundle.user_input = user_input;
    const auto offered = offered_tools(kit, cfg);

    LoopOutcome out;
    int strikes = 0;
    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        out.iterations = iter;
        auto messages = assemble_prompt(bundle, cfg.context_budget_tokens);
        std::size_t estimated = estimate_tokens(messages);
        json rendered = json::array();
        for (const auto& m : messages) rendered.push_back({{"role", m.role}, {"content", m.content}});
        t.events.push_back({"prompt", agent, kit.world().clock_s(),
                            json{{"messages", std::move(rendered)},
                                 {"estimated_tokens", estimated}}});

        if (hooks.rate_admit) hooks.rate_admit(estimated);
        BackendRaw raw = complete_with_retries(backend, {messages, offered, cfg.temperature}, 3,
                                               hooks.sleep);
        std::size_t prompt_used = raw.prompt_tokens != 0 ? raw.prompt_tokens : estimated;
        std::size_t completion_used = raw.completion_tokens != 0
                                          ? raw.completion_tokens
                                          : estimate_tokens(raw.message.dump());
        t.prompt_tokens += prompt_used;
        t.completion_tokens += completion_used;
        if (hooks.rate_reconcile) {
            hooks.rate_reconcile(static_cast<long long>(prompt_used + completion_used) -
                                 static_cast<long long>(estimated));
        }

        BackendOutput output;
        try {
            output = parse_backend_output(raw);
        } catch (const AtcError& e) {
            if (e.code() != Errc::malformed_tool_call) throw;
            ++strikes;
            t.events.push_back({"note", agent, kit.world().clock_s(),
                                json{{"malformed_output", e.what()}, {"strike", strikes}}});
            if (strikes >= 3) {
                out.aborted_malformed = true;
                return out;
            }
            bundle.chat_history.push_back(
                {"user", fmt::format("Your previous reply was unusable ({}). Reply with exactly "
                                     "one tool call, or with plain text once you are done.",
                                     e.what())});
            continue;
        }
        strikes = 0;

        if (output.is_final()) {
            t.events.push_back(
                {"backend_text", agent, kit.world().clock_s(), json{{"text", output.text}}});
            out.final_text = output.text;
            return out;
        }

        const tools::ToolCall& call = *output.invocation;
        t.events.push_back({"tool_call", agent, kit.world().clock_s(),
                            json{{"tool", call.tool},
                                 {"args", call.args},
                                 {"rendered", render_invocation(call)}}});
        tools::ToolResult result = execute_for_agent(kit, call, agent);
        t.events.push_back({"tool_result", agent, result.clock_s,
                            json{{"text", result.text}, {"payload", result.payload}}});
        if (call.tool == "SENDCOMMAND" && result.payload.value("accepted", false)) {
            t.events.push_back(
                {"command", agent, result.clock_s,
                 json{{"command", result.payload.at("command").get<std::string>()}}});
        }
        bundle.scratchpad.push_back({call, result});
    }
    out.hit_cap = true;
    return out;
}

// A run is judged on what the world does after the agent stops: simulate to
// the later of the scripted conjunction plus lookahead and the last command
// plus lookahead, then classify the full separation log.
void finish_run(tools::ToolKit& kit, const scenario::Scenario& s,
                const conflict::SeparationStandard& standard, Transcript& t) {
    double horizon =
        std::max(s.planned_collision_time_s + standard.lookahead_s,
                 kit.last_command_time_s() + standard.lookahead_s);
    if (kit.world().clock_s() < horizon) kit.mutable_world().run_until(horizon);
    t.score = conflict::classify_outcome(kit.world().min_sep_log(), standard);
    t.scored = true;
    t.final_clock_s = kit.world().clock_s();
    t.command_count = static_cast<int>(kit.command_log().size());
}

bool icontains(const std::string& hay, const std::string& needle) {
    auto lower = [](unsigned char c) { return static_cast<char>(std::tolower(c)); };
    auto it = std::search(hay.begin(), hay.end(), needle.begin(), needle.end(),
                          [&](char a, char b) { return lower(a) == lower(b); });
    return it != hay.end();
}

} // namespace

Transcript run_single_agent(const scenario::Scenario& s, const AgentConfig& config,
                            Backend& backend, const conflict::SeparationStandard& standard,
                            const RunHooks& hooks) {
    config.validate();
    standard.validate();
    if (config.experience_enabled && !hooks.experience_search) {
        raise(Errc::config_error, "experience library enabled but no search hook attached");
    }

    tools::ToolKit kit(scenario::world_from(s), standard);
    if (hooks.experience_search) kit.set_experience_search(hooks.experience_search);

    Transcript t;
    t.scenario_id = s.id;
    t.scenario = s;
    t.config = {{"mode", "single"}, {"agent", config.to_json()}, {"backend", backend.id()}};

    const std::string user =
        config.user_input.empty() ? default_user_input(config.role) : config.user_input;
    LoopOutcome loop = run_tool_loop(kit, backend, config, user, t, hooks);
    t.iterations = loop.iterations;
    t.final_text = loop.final_text;
    if (loop.hit_cap) add_flag(t, "MaxIterationsExceeded");
    if (loop.aborted_malformed) add_flag(t, "MalformedBackendOutput");

    finish_run(kit, s, standard, t);
    return t;
}

std::vector<std::string> extract_plan_commands(const std::string& plan,
                                               const std::vector<std::string>& callsigns,
                                               bool required) {
    static const std::regex direct_re(R"(\b(HDG|ALT|SPD)\s+([A-Z][A-Z0-9]*)\s+(-?\d+(?:\.\d+)?)\b)");
    static const std::regex alt_re(R"((\d+(?:\.\d+)?)\s*(?:ft\b|feet\b))", std::regex::icase);
    static const std::regex hdg_re(R"(heading\s+(?:of\s+|to\s+)?(\d+(?:\.\d+)?))", std::regex::icase);
    static const std::regex deg_re(R"((\d+(?:\.\d+)?)\s*degrees\b)", std::regex::icase);
    static const std::regex spd_re(R"((\d+(?:\.\d+)?)\s*(?:kt\b|kts\b|knots\b))", std::regex::icase);

    std::vector<std::string> out;
    std::istringstream in(plan);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (std::regex_search(line, m, direct_re) &&
            std::find(callsigns.begin(), callsigns.end(), m[2].str()) != callsigns.end()) {
            out.push_back(fmt::format("{} {} {}", m[1].str(), m[2].str(), m[3].str()));
            continue;
        }
        std::size_t best_pos = std::string::npos;
        std::string owner;
        for (const auto& cs : callsigns) {
            std::size_t p = line.find(cs);
            if (p == std::string::npos) continue;
            if (p < best_pos || (p == best_pos && cs.size() > owner.size())) {
                best_pos = p;
                owner = cs;
            }
        }
        if (owner.empty()) continue;
        const std::string tail = line.substr(best_pos + owner.size());
        if (std::regex_search(tail, m, alt_re)) {
            out.push_back(fmt::format("ALT {} {}", owner, m[1].str()));
        } else if (std::regex_search(tail, m, hdg_re) && icontains(tail, "heading")) {
            out.push_back(fmt::format("HDG {} {}", owner, m[1].str()));
        } else if (std::regex_search(tail, m, deg_re)) {
            out.push_back(fmt::format("HDG {} {}", owner, m[1].str()));
        } else if (std::regex_search(tail, m, spd_re)) {
            out.push_back(fmt::format("SPD {} {}", owner, m[1].str()));
        }
    }
    if (out.empty() && required) {
        raise(Errc::plan_extraction_error, "no executable commands found in the plan text");
    }
    return out;
}

Transcript run_multi_agent(const scenario::Scenario& s, const MultiAgentConfig& config,
                           Backend& planner, Backend& executor, Backend& verifier,
                           const conflict::SeparationStandard& standard, const RunHooks& hooks) {
    config.validate();
    standard.validate();
    if ((config.planner.experience_enabled || config.verifier.experience_enabled) &&
        !hooks.experience_search) {
        raise(Errc::config_error, "experience library enabled but no search hook attached");
    }

    tools::ToolKit kit(scenario::world_from(s), standard);
    if (hooks.experience_search) kit.set_experience_search(hooks.experience_search);

    Transcript t;
    t.scenario_id = s.id;
    t.scenario = s;
    t.config = {{"mode", "multi"},
                {"planner", config.planner.to_json()},
                {"executor", config.executor.to_json()},
                {"verifier", config.verifier.to_json()},
                {"replan_limit", config.replan_limit},
                {"backends", {planner.id(), executor.id(), verifier.id()}}};

    std::vector<std::string> callsigns;
    callsigns.reserve(s.initial_states.size());
    for (const auto& a : s.initial_states) callsigns.push_back(a.callsign);

    const std::string planner_user = config.planner.user_input.empty()
                                         ? default_user_input(AgentRole::planner)
                                         : config.planner.user_input;
    LoopOutcome plan = run_tool_loop(kit, planner, config.planner, planner_user, t, hooks);
    t.iterations += plan.iterations;
    if (plan.hit_cap) add_flag(t, "MaxIterationsExceeded");
    if (plan.aborted_malformed) add_flag(t, "MalformedBackendOutput");

    if (!plan.final_text.empty()) {
        std::vector<std::string> commands = extract_plan_commands(plan.final_text, callsigns, true);
        int replans = 0;
        for (;;) {
            std::string brief = fmt::format(
                "Plan round {}. Send each command with SENDCOMMAND, in order:\n", replans + 1);
            for (const auto& c : commands) brief += fmt::format("- {}\n", c);
            LoopOutcome exec = run_tool_loop(kit, executor, config.executor, brief, t, hooks);
            t.iterations += exec.iterations;
            if (exec.hit_cap) add_flag(t, "MaxIterationsExceeded");
            if (exec.aborted_malformed) add_flag(t, "MalformedBackendOutput");

            std::string verifier_user = config.verifier.user_input.empty()
                                            ? default_user_input(AgentRole::verifier)
                                            : config.verifier.user_input;
            verifier_user += "\n\nThe executed plan was:\n";
            for (const auto& c : commands) verifier_user += fmt::format("- {}\n", c);
            LoopOutcome check = run_tool_loop(kit, verifier, config.verifier, verifier_user, t, hooks);
            t.iterations += check.iterations;
            if (check.hit_cap) add_flag(t, "MaxIterationsExceeded");
            if (check.aborted_malformed) add_flag(t, "MalformedBackendOutput");
            t.final_text = check.final_text;
            if (check.final_text.empty()) break;

            std::vector<std::string> revised =
                extract_plan_commands(check.final_text, callsigns, false);
            if (revised.empty()) break;
            if (replans == config.replan_limit) {
                add_flag(t, "ReplanLimitExceeded");
                t.events.push_back({"note", "verifier", kit.world().clock_s(),
                                    json{{"discarded_replan", revised}}});
                break;
            }
            ++replans;
            t.events.push_back({"note", "verifier", kit.world().clock_s(),
                                json{{"replan_round", replans}, {"commands", revised}}});
            commands = std::move(revised);
        }
    }

    finish_run(kit, s, standard, t);
    return t;
}

} // namespace atc::agent
