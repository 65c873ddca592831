#include "atc/agent/transcript.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>

#include "atc/agent/runtime.hpp"
#include "atc/errors.hpp"
#include "atc/tools/toolkit.hpp"

namespace atc::agent {

using nlohmann::json;

bool Transcript::has_flag(const std::string& name) const {
    return std::find(flags.begin(), flags.end(), name) != flags.end();
}

std::string to_jsonl(const Transcript& t) {
    std::string out;
    json header = {{"type", "header"},
                   {"scenario_id", t.scenario_id},
                   {"config", t.config},
                   {"scenario", json::parse(scenario::serialize(t.scenario))}};
    out += header.dump() + "\n";
    for (const auto& e : t.events) {
        json line = {{"type", "event"},
                     {"kind", e.kind},
                     {"agent", e.agent},
                     {"clock_s", e.clock_s},
                     {"data", e.data}};
        out += line.dump() + "\n";
    }
    json footer = {{"type", "footer"},
                   {"final_text", t.final_text},
                   {"score", t.score},
                   {"scored", t.scored},
                   {"flags", t.flags},
                   {"prompt_tokens", t.prompt_tokens},
                   {"completion_tokens", t.completion_tokens},
                   {"iterations", t.iterations},
                   {"command_count", t.command_count},
                   {"final_clock_s", t.final_clock_s}};
    out += footer.dump() + "\n";
    return out;
}

Transcript from_jsonl(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<json> lines;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            lines.push_back(json::parse(line));
        } catch (const json::exception& e) {
            raise(Errc::parse_error, fmt::format("transcript line {}: {}", lineno, e.what()));
        }
    }
    if (lines.size() < 2 || lines.front().value("type", "") != "header" ||
        lines.back().value("type", "") != "footer") {
        raise(Errc::parse_error, "transcript needs a header line and a footer line");
    }
    try {
        Transcript t;
        const json& h = lines.front();
        t.scenario_id = h.at("scenario_id").get<std::string>();
        t.config = h.at("config");
        t.scenario = scenario::parse(h.at("scenario").dump());
        for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
            const json& e = lines[i];
            if (e.value("type", "") != "event") {
                raise(Errc::parse_error, fmt::format("transcript line {} is not an event", i + 1));
            }
            t.events.push_back({e.at("kind").get<std::string>(), e.at("agent").get<std::string>(),
                                e.at("clock_s").get<double>(), e.at("data")});
        }
        const json& f = lines.back();
        t.final_text = f.at("final_text").get<std::string>();
        t.score = f.at("score").get<int>();
        t.scored = f.at("scored").get<bool>();
        for (const json& fl : f.at("flags")) t.flags.push_back(fl.get<std::string>());
        t.prompt_tokens = f.at("prompt_tokens").get<std::size_t>();
        t.completion_tokens = f.at("completion_tokens").get<std::size_t>();
        t.iterations = f.at("iterations").get<int>();
        t.command_count = f.at("command_count").get<int>();
        t.final_clock_s = f.at("final_clock_s").get<double>();
        return t;
    } catch (const json::exception& e) {
        raise(Errc::parse_error, fmt::format("transcript field: {}", e.what()));
    }
}

ReplayResult replay_transcript(const Transcript& t, const conflict::SeparationStandard& standard) {
    tools::ToolKit kit(scenario::world_from(t.scenario), standard);

    auto mismatch = [&](std::size_t idx, const std::string& what) {
        raise(Errc::replay_mismatch,
              fmt::format("event {} of transcript '{}': {}", idx, t.scenario_id, what));
    };

    for (std::size_t i = 0; i < t.events.size(); ++i) {
        if (t.events[i].kind != "tool_call") continue;
        std::size_t r = i + 1;
        while (r < t.events.size() && t.events[r].kind != "tool_result") ++r;
        if (r == t.events.size() || t.events[r].agent != t.events[i].agent) {
            mismatch(i, "tool call without a matching result");
        }
        tools::ToolCall call{t.events[i].data.at("tool").get<std::string>(),
                             t.events[i].data.at("args")};
        const json& recorded = t.events[r].data;
        if (call.tool == "SEARCHEXPERIENCELIBRARY") {
            // Library reads never touch the world; trust the recording.
            continue;
        }
        tools::ToolResult res = execute_for_agent(kit, call, t.events[i].agent);
        if (res.text != recorded.at("text").get<std::string>()) {
            mismatch(i, fmt::format("tool {} produced different text", call.tool));
        }
        if (res.clock_s != t.events[r].clock_s) {
            mismatch(i, fmt::format("tool {} finished at clock {} instead of {}", call.tool,
                                    res.clock_s, t.events[r].clock_s));
        }
    }

    double horizon = std::max(t.scenario.planned_collision_time_s + 300.0,
                              kit.last_command_time_s() + 300.0);
    if (kit.world().clock_s() < horizon) kit.mutable_world().run_until(horizon);

    ReplayResult out;
    out.score = conflict::classify_outcome(kit.world().min_sep_log(), standard);
    out.final_clock_s = kit.world().clock_s();
    out.commands_applied = static_cast<int>(kit.command_log().size());
    return out;
}

} // namespace atc::agent
