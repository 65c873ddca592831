#include <doctest.h>

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "atc/agent/runtime.hpp"
#include "atc/agent/scripted.hpp"
#include "atc/conflict/metrics.hpp"
#include "atc/errors.hpp"
#include "atc/scenario/scenario.hpp"

using namespace atc;
using namespace atc::agent;
using nlohmann::json;

namespace {

bool throws_code(Errc code, const std::function<void()>& fn, const std::string& needle = "") {
    try {
        fn();
    } catch (const AtcError& e) {
        if (e.code() != code) return false;
        return needle.empty() || std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

int count_events(const Transcript& t, const std::string& kind, const std::string& agent = "") {
    int n = 0;
    for (const auto& e : t.events) {
        if (e.kind == kind && (agent.empty() || e.agent == agent)) ++n;
    }
    return n;
}

const TranscriptEvent* find_event(const Transcript& t, const std::string& kind, int nth = 0) {
    for (const auto& e : t.events) {
        if (e.kind == kind && nth-- == 0) return &e;
    }
    return nullptr;
}

tools::ToolKit kit_for(const scenario::Scenario& s) {
    return tools::ToolKit(scenario::world_from(s), conflict::SeparationStandard{});
}

} // namespace

TEST_CASE("token estimate rounds up and charges per message") {
    CHECK(estimate_tokens(std::string{}) == 0);
    CHECK(estimate_tokens(std::string("abcd")) == 1);
    CHECK(estimate_tokens(std::string("abcde")) == 2);
    std::vector<Message> msgs{{"system", "abcd"}, {"user", "abcde"}};
    CHECK(estimate_tokens(msgs) == 1 + 4 + 2 + 4);
}

TEST_CASE("invocation rendering mirrors the operation-log style") {
    tools::ToolCall send{"SENDCOMMAND", {{"command", "ALT FLIGHT3 22800"}}};
    CHECK(render_invocation(send) ==
          "Invoking: `SENDCOMMAND` with `{'command': 'ALT FLIGHT3 22800'}`");

    tools::ToolCall monitor{"CONTINUEMONITORING", {{"duration", 60}}};
    CHECK(render_invocation(monitor) == "Invoking: `CONTINUEMONITORING` with `{'duration': 60}`");

    tools::ToolCall search{"SEARCHEXPERIENCELIBRARY",
                           {{"num_aircraft", 2},
                            {"conflict_formation", "head_on"},
                            {"conflict_description", "it's tight"}}};
    CHECK(render_invocation(search) ==
          "Invoking: `SEARCHEXPERIENCELIBRARY` with `{'conflict_description': 'it\\'s tight', "
          "'conflict_formation': 'head_on', 'num_aircraft': 2}`");

    tools::ToolCall odd{"GETCONFLICTINFO", {{"flag", true}, {"nothing", nullptr}}};
    CHECK(render_invocation(odd) ==
          "Invoking: `GETCONFLICTINFO` with `{'flag': True, 'nothing': None}`");

    tools::ToolCall bare{"GETALLAIRCRAFTINFO", json::object()};
    CHECK(render_invocation(bare) == "Invoking: `GETALLAIRCRAFTINFO` with `{}`");
}

TEST_CASE("prompt assembly keeps order and drops oldest scratchpad first") {
    PromptBundle bundle;
    bundle.system_prompt = "sys";
    bundle.user_input = "go";

    auto msgs = assemble_prompt(bundle, 1000);
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0] == Message{"system", "sys"});
    CHECK(msgs[1] == Message{"user", "go"});

    bundle.chat_history.push_back({"user", "note"});
    const std::string big(400, 'x');
    for (int i = 0; i < 3; ++i) {
        tools::ToolCall call{"GETCONFLICTINFO", json::object()};
        bundle.scratchpad.push_back({call, {fmt::format("{}{}", big, i), json::object(), 0.0}});
    }

    msgs = assemble_prompt(bundle, 100000);
    REQUIRE(msgs.size() == 9);
    CHECK(msgs[2] == Message{"user", "note"});
    CHECK(msgs[3].role == "assistant");
    CHECK(msgs[3].content == "Invoking: `GETCONFLICTINFO` with `{}`");
    CHECK(msgs[4].role == "tool");
    CHECK(msgs[4].content == big + "0");

    // Budget for one entry only: the latest survives.
    msgs = assemble_prompt(bundle, 160);
    REQUIRE(msgs.size() == 5);
    CHECK(msgs[4].content == big + "2");

    // Even the minimal prompt does not fit.
    CHECK(throws_code(Errc::context_overflow, [&] { assemble_prompt(bundle, 60); },
                      "budget is 60"));

    PromptBundle blank;
    blank.user_input = "go";
    CHECK(throws_code(Errc::config_error, [&] { assemble_prompt(blank, 100); }));
}

TEST_CASE("backend output parsing accepts both argument encodings") {
    BackendRaw text = raw_text("all done");
    BackendOutput out = parse_backend_output(text);
    CHECK(out.is_final());
    CHECK(out.text == "all done");

    tools::ToolCall call{"SENDCOMMAND", {{"command", "HDG AB112 225"}}};
    out = parse_backend_output(raw_tool_call(call));
    REQUIRE(!out.is_final());
    CHECK(out.invocation->tool == "SENDCOMMAND");
    CHECK(out.invocation->args == call.args);

    BackendRaw object_args;
    object_args.message = {{"role", "assistant"},
                           {"content", nullptr},
                           {"tool_calls",
                            json::array({{{"id", "x"},
                                          {"type", "function"},
                                          {"function",
                                           {{"name", "CONTINUEMONITORING"},
                                            {"arguments", {{"duration", 30}}}}}}})}};
    out = parse_backend_output(object_args);
    REQUIRE(!out.is_final());
    CHECK(out.invocation->tool == "CONTINUEMONITORING");
    CHECK(out.invocation->args.at("duration") == 30);

    auto malformed = [&](json message) {
        BackendRaw raw;
        raw.message = std::move(message);
        return throws_code(Errc::malformed_tool_call, [&] { parse_backend_output(raw); });
    };
    CHECK(malformed({{"role", "assistant"}}));
    CHECK(malformed({{"role", "assistant"}, {"content", 42}}));
    CHECK(malformed({{"role", "assistant"}, {"tool_calls", json::array()}}));
    CHECK(malformed({{"role", "assistant"},
                     {"tool_calls", json::array({{{"id", "x"}, {"type", "function"}}})}}));
    CHECK(malformed({{"role", "assistant"},
                     {"tool_calls",
                      json::array({{{"function", {{"name", ""}, {"arguments", "{}"}}}}})}}));
    CHECK(malformed({{"role", "assistant"},
                     {"tool_calls",
                      json::array({{{"function",
                                     {{"name", "SENDCOMMAND"}, {"arguments", "not json"}}}}})}}));
    CHECK(malformed({{"role", "assistant"},
                     {"tool_calls",
                      json::array({{{"function",
                                     {{"name", "SENDCOMMAND"}, {"arguments", "[1, 2]"}}}}})}}));
}

TEST_CASE("transient backend failures retry with exponential backoff") {
    int calls = 0;
    FunctionBackend flaky("flaky", [&](const BackendRequest&) {
        if (++calls < 3) raise(Errc::backend_error, "socket closed");
        return raw_text("recovered");
    });
    std::vector<double> delays;
    BackendRequest req;
    BackendRaw raw = complete_with_retries(flaky, req, 3, [&](double s) { delays.push_back(s); });
    CHECK(parse_backend_output(raw).text == "recovered");
    CHECK(calls == 3);
    CHECK(delays == std::vector<double>{0.5, 2.0});

    calls = 0;
    FunctionBackend dead("dead", [&](const BackendRequest&) -> BackendRaw {
        ++calls;
        raise(Errc::backend_error, "unreachable");
    });
    delays.clear();
    CHECK(throws_code(Errc::backend_error,
                      [&] { complete_with_retries(dead, req, 3, [&](double s) { delays.push_back(s); }); },
                      "unreachable"));
    CHECK(calls == 3);
    CHECK(delays == std::vector<double>{0.5, 2.0});

    // Non-transport errors pass straight through.
    calls = 0;
    FunctionBackend picky("picky", [&](const BackendRequest&) -> BackendRaw {
        ++calls;
        raise(Errc::config_error, "bad key");
    });
    CHECK(throws_code(Errc::config_error, [&] { complete_with_retries(picky, req, 3, {}); }));
    CHECK(calls == 1);
}

TEST_CASE("tool access is gated by agent role") {
    auto s = scenario::generate(scenario::ConflictType::head_on, 2, 101);
    auto kit = kit_for(s);
    const std::string cs = s.initial_states[0].callsign;
    tools::ToolCall send{"SENDCOMMAND", {{"command", fmt::format("HDG {} 90", cs)}}};

    auto denied = execute_for_agent(kit, send, "planner");
    CHECK(denied.text == "Tool error: SENDCOMMAND is reserved for the executor agent");
    CHECK(denied.payload.at("error") == "SENDCOMMAND is reserved for the executor agent");
    CHECK(execute_for_agent(kit, send, "verifier").text ==
          "Tool error: SENDCOMMAND is reserved for the executor agent");
    CHECK(kit.command_log().empty());

    auto off_mission = execute_for_agent(kit, {"GETCONFLICTINFO", json::object()}, "executor");
    CHECK(off_mission.text ==
          "Tool error: the executor agent only issues SENDCOMMAND, not GETCONFLICTINFO");

    auto ok = execute_for_agent(kit, send, "single");
    CHECK(ok.text == fmt::format("Command accepted: HDG {} 90", cs));
    CHECK(kit.command_log().size() == 1);

    auto unknown = execute_for_agent(kit, {"TELEPORT", json::object()}, "single");
    CHECK(unknown.text.find("Tool error: ") == 0);
    CHECK(unknown.text.find("unknown tool 'TELEPORT'") != std::string::npos);

    auto bad_args = execute_for_agent(kit, {"CONTINUEMONITORING", json::object()}, "single");
    CHECK(bad_args.text.find("Tool error: ") == 0);
    CHECK(bad_args.text.find("duration") != std::string::npos);
}

TEST_CASE("agent configs validate their envelopes") {
    AgentConfig cfg;
    cfg.validate();

    AgentConfig hot = cfg;
    hot.temperature = 2.5;
    CHECK(throws_code(Errc::config_error, [&] { hot.validate(); }, "temperature"));
    hot.temperature = -0.1;
    CHECK(throws_code(Errc::config_error, [&] { hot.validate(); }, "temperature"));

    AgentConfig lazy = cfg;
    lazy.max_iterations = 0;
    CHECK(throws_code(Errc::config_error, [&] { lazy.validate(); }, "max_iterations"));

    AgentConfig cramped = cfg;
    cramped.context_budget_tokens = 0;
    CHECK(throws_code(Errc::config_error, [&] { cramped.validate(); }));

    json j = cfg.to_json();
    CHECK(j.at("role") == "single");
    CHECK(j.at("system_prompt") == "(default)");

    MultiAgentConfig team;
    team.validate();
    CHECK(team.planner.role == AgentRole::planner);
    CHECK(team.executor.role == AgentRole::executor);
    CHECK(team.verifier.role == AgentRole::verifier);

    MultiAgentConfig scrambled;
    scrambled.executor.role = AgentRole::single;
    CHECK(throws_code(Errc::config_error, [&] { scrambled.validate(); }, "roles"));

    MultiAgentConfig bottomless;
    bottomless.replan_limit = -1;
    CHECK(throws_code(Errc::config_error, [&] { bottomless.validate(); }, "replan_limit"));

    MultiAgentConfig confused;
    confused.executor.experience_enabled = true;
    CHECK(throws_code(Errc::config_error, [&] { confused.validate(); }, "experience"));

    for (AgentRole role : {AgentRole::single, AgentRole::planner, AgentRole::executor,
                           AgentRole::verifier}) {
        CHECK(!default_system_prompt(role).empty());
        CHECK(!default_user_input(role).empty());
    }
}

TEST_CASE("unmanaged runs end in a collision and score it") {
    auto s = scenario::generate(scenario::ConflictType::head_on, 2, 42);
    NoopBackend noop;
    AgentConfig cfg;
    cfg.backend_id = noop.id();
    Transcript t = run_single_agent(s, cfg, noop, conflict::SeparationStandard{});

    CHECK(t.scenario_id == s.id);
    CHECK(t.scored);
    CHECK(t.score == -1);
    CHECK(t.iterations == 1);
    CHECK(t.command_count == 0);
    CHECK(t.final_text == "No intervention required; concluding monitoring.");
    CHECK(t.flags.empty());
    CHECK(t.final_clock_s == doctest::Approx(s.planned_collision_time_s + 300.0));
    CHECK(count_events(t, "prompt") == 1);
    CHECK(count_events(t, "backend_text") == 1);
    CHECK(count_events(t, "tool_call") == 0);
    CHECK(t.prompt_tokens > 0);
    CHECK(t.completion_tokens > 0);

    const TranscriptEvent* prompt = find_event(t, "prompt");
    REQUIRE(prompt != nullptr);
    CHECK(prompt->data.at("messages").size() == 2);
    CHECK(prompt->data.at("messages")[0].at("role") == "system");
}

TEST_CASE("layered altitude assignments resolve every conflict formation") {
    struct Case {
        scenario::ConflictType type;
        int n;
        std::uint64_t seed;
    };
    const Case cases[] = {
        {scenario::ConflictType::converging, 3, 7},
        {scenario::ConflictType::head_on, 2, 8},
        {scenario::ConflictType::parallel, 2, 9},
        {scenario::ConflictType::t_formation, 4, 10},
    };
    for (const Case& c : cases) {
        CAPTURE(static_cast<int>(c.type));
        auto s = scenario::generate(c.type, c.n, c.seed);
        LayeringBackend backend;
        AgentConfig cfg;
        cfg.backend_id = backend.id();
        Transcript t = run_single_agent(s, cfg, backend, conflict::SeparationStandard{});
        CHECK(t.score == 1);
        CHECK(t.scored);
        CHECK(t.command_count == c.n);
        CHECK(t.flags.empty());
        CHECK(count_events(t, "command") == c.n);
        CHECK(t.final_text == "All conflicts resolved; aircraft hold separated levels.");
    }
}

TEST_CASE("transcripts serialize, reload and replay byte for byte") {
    auto s = scenario::generate(scenario::ConflictType::converging, 3, 7);
    LayeringBackend backend;
    AgentConfig cfg;
    cfg.backend_id = backend.id();
    conflict::SeparationStandard standard;
    Transcript t = run_single_agent(s, cfg, backend, standard);
    REQUIRE(t.score == 1);

    std::string jsonl = to_jsonl(t);
    Transcript back = from_jsonl(jsonl);
    CHECK(back.scenario == t.scenario);
    CHECK(back.events.size() == t.events.size());
    CHECK(to_jsonl(back) == jsonl);

    ReplayResult replay = replay_transcript(back, standard);
    CHECK(replay.score == t.score);
    CHECK(replay.final_clock_s == t.final_clock_s);
    CHECK(replay.commands_applied == t.command_count);

    // A second identical run serializes identically.
    LayeringBackend again;
    Transcript t2 = run_single_agent(s, cfg, again, standard);
    CHECK(to_jsonl(t2) == jsonl);

    CHECK(throws_code(Errc::parse_error, [&] { from_jsonl("{\"type\": \"header\"}\n"); }));
    CHECK(throws_code(Errc::parse_error, [&] { from_jsonl("not json\n"); }, "line 1"));
}

TEST_CASE("replay rejects tampered recordings") {
    auto s = scenario::generate(scenario::ConflictType::parallel, 2, 31);
    LayeringBackend backend;
    AgentConfig cfg;
    cfg.backend_id = backend.id();
    conflict::SeparationStandard standard;
    Transcript t = run_single_agent(s, cfg, backend, standard);
    REQUIRE(t.score == 1);

    Transcript forged_text = t;
    for (auto& e : forged_text.events) {
        if (e.kind == "tool_result") {
            e.data["text"] = e.data.at("text").get<std::string>() + " (edited)";
            break;
        }
    }
    CHECK(throws_code(Errc::replay_mismatch, [&] { replay_transcript(forged_text, standard); },
                      "different text"));

    Transcript forged_cmd = t;
    for (auto& e : forged_cmd.events) {
        if (e.kind == "tool_call" && e.data.at("tool") == "SENDCOMMAND") {
            e.data["args"]["command"] = "HDG GHOST9 360";
            break;
        }
    }
    CHECK(throws_code(Errc::replay_mismatch, [&] { replay_transcript(forged_cmd, standard); }));
}

TEST_CASE("script guards stop a diverged sequence visibly") {
    auto s = scenario::generate(scenario::ConflictType::head_on, 2, 3);
    std::vector<ScriptedStep> steps;
    steps.push_back({"", tools::ToolCall{"GETALLAIRCRAFTINFO", json::object()}, ""});
    steps.push_back({"THIS TEXT NEVER APPEARS", tools::ToolCall{"GETCONFLICTINFO", json::object()}, ""});
    SequenceBackend backend("scripted:test", std::move(steps));
    AgentConfig cfg;
    cfg.backend_id = backend.id();
    Transcript t = run_single_agent(s, cfg, backend, conflict::SeparationStandard{});
    CHECK(t.iterations == 2);
    CHECK(t.final_text ==
          "Script guard failed at step 1: expected \"THIS TEXT NEVER APPEARS\" in the latest "
          "observation.");
    CHECK(count_events(t, "tool_call") == 1);
}

TEST_CASE("malformed replies draw strikes and three in a row abort") {
    auto s = scenario::generate(scenario::ConflictType::head_on, 2, 12);
    FunctionBackend garbled("garbled", [&](const BackendRequest&) {
        BackendRaw raw;
        raw.message = {{"role", "assistant"}};
        return raw;
    });
    AgentConfig cfg;
    cfg.backend_id = garbled.id();
    Transcript t = run_single_agent(s, cfg, garbled, conflict::SeparationStandard{});
    CHECK(t.iterations == 3);
    CHECK(t.has_flag("MalformedBackendOutput"));
    CHECK(t.final_text.empty());
    CHECK(t.scored);
    CHECK(t.score == -1);
    CHECK(count_events(t, "note") == 3);

    // One bad reply plus corrective feedback recovers.
    std::vector<BackendRequest> seen;
    int calls = 0;
    FunctionBackend flaky("flaky", [&](const BackendRequest& req) {
        seen.push_back(req);
        if (++calls == 1) {
            BackendRaw raw;
            raw.message = {{"role", "assistant"}};
            return raw;
        }
        return raw_text("standing down");
    });
    Transcript t2 = run_single_agent(s, cfg, flaky, conflict::SeparationStandard{});
    CHECK(t2.iterations == 2);
    CHECK(t2.flags.empty());
    CHECK(t2.final_text == "standing down");
    REQUIRE(seen.size() == 2);
    bool fed_back = false;
    for (const auto& m : seen[1].messages) {
        if (m.role == "user" && m.content.find("unusable") != std::string::npos) fed_back = true;
    }
    CHECK(fed_back);
}

TEST_CASE("iteration cap flags the run instead of throwing") {
    auto s = scenario::generate(scenario::ConflictType::parallel, 2, 13);
    FunctionBackend chatty("chatty", [&](const BackendRequest&) {
        return raw_tool_call({"GETALLAIRCRAFTINFO", json::object()});
    });
    AgentConfig cfg;
    cfg.backend_id = chatty.id();
    cfg.max_iterations = 4;
    Transcript t = run_single_agent(s, cfg, chatty, conflict::SeparationStandard{});
    CHECK(t.iterations == 4);
    CHECK(t.has_flag("MaxIterationsExceeded"));
    CHECK(t.final_text.empty());
    CHECK(t.scored);
    CHECK(count_events(t, "tool_call") == 4);
}

TEST_CASE("context overflow surfaces as an error") {
    auto s = scenario::generate(scenario::ConflictType::head_on, 2, 14);
    NoopBackend noop;
    AgentConfig cfg;
    cfg.backend_id = noop.id();
    cfg.context_budget_tokens = 10;
    CHECK(throws_code(Errc::context_overflow, [&] {
        run_single_agent(s, cfg, noop, conflict::SeparationStandard{});
    }));
}

TEST_CASE("experience search is offered only when enabled and wired") {
    auto s = scenario::generate(scenario::ConflictType::head_on, 2, 15);

    RunHooks hooks;
    hooks.experience_search = [&](const tools::ExperienceQuery& q) {
        tools::ToolResult res;
        res.text = fmt::format("Past case ({} aircraft, {}): climb the higher flight 2000 ft.",
                               q.num_aircraft, q.conflict_formation);
        return res;
    };

    std::vector<BackendRequest> seen;
    int calls = 0;
    FunctionBackend curious("curious", [&](const BackendRequest& req) {
        seen.push_back(req);
        if (++calls == 1) {
            return raw_tool_call({"SEARCHEXPERIENCELIBRARY",
                                  {{"conflict_description", "two aircraft nose to nose"},
                                   {"num_aircraft", 2},
                                   {"conflict_formation", "head_on"}}});
        }
        return raw_text("done");
    });

    AgentConfig cfg;
    cfg.backend_id = curious.id();
    cfg.experience_enabled = true;
    Transcript t = run_single_agent(s, cfg, curious, conflict::SeparationStandard{}, hooks);
    REQUIRE(seen.size() == 2);
    bool offered = false;
    for (const auto& d : seen[0].tools) {
        if (d.name == "SEARCHEXPERIENCELIBRARY") offered = true;
    }
    CHECK(offered);
    const TranscriptEvent* result = find_event(t, "tool_result");
    REQUIRE(result != nullptr);
    CHECK(result->data.at("text").get<std::string>().find("Past case (2 aircraft, head_on)") !=
          std::string::npos);

    // Enabled without a hook is a configuration error.
    CHECK(throws_code(Errc::config_error, [&] {
        run_single_agent(s, cfg, curious, conflict::SeparationStandard{});
    }, "experience"));

    // Hook present but disabled: the tool is not offered.
    seen.clear();
    calls = 0;
    FunctionBackend plain("plain", [&](const BackendRequest& req) {
        seen.push_back(req);
        return raw_text("quiet");
    });
    AgentConfig off;
    off.backend_id = plain.id();
    run_single_agent(s, off, plain, conflict::SeparationStandard{}, hooks);
    REQUIRE(seen.size() == 1);
    for (const auto& d : seen[0].tools) CHECK(d.name != "SEARCHEXPERIENCELIBRARY");
}

TEST_CASE("token accounting prefers reported usage and reconciles the estimate") {
    auto s = scenario::generate(scenario::ConflictType::head_on, 2, 16);
    FunctionBackend metered("metered", [&](const BackendRequest&) {
        BackendRaw raw = raw_text("measured reply");
        raw.prompt_tokens = 500;
        raw.completion_tokens = 50;
        return raw;
    });
    AgentConfig cfg;
    cfg.backend_id = metered.id();

    std::vector<std::size_t> admitted;
    std::vector<long long> reconciled;
    RunHooks hooks;
    hooks.rate_admit = [&](std::size_t est) { admitted.push_back(est); };
    hooks.rate_reconcile = [&](long long delta) { reconciled.push_back(delta); };

    Transcript t = run_single_agent(s, cfg, metered, conflict::SeparationStandard{}, hooks);
    CHECK(t.prompt_tokens == 500);
    CHECK(t.completion_tokens == 50);
    REQUIRE(admitted.size() == 1);
    REQUIRE(reconciled.size() == 1);
    CHECK(reconciled[0] == 550 - static_cast<long long>(admitted[0]));

    // Without reported usage the estimate is charged as-is.
    NoopBackend noop;
    AgentConfig cfg2;
    cfg2.backend_id = noop.id();
    admitted.clear();
    reconciled.clear();
    Transcript t2 = run_single_agent(s, cfg2, noop, conflict::SeparationStandard{}, hooks);
    CHECK(t2.prompt_tokens == admitted[0]);
    CHECK(t2.completion_tokens > 0);
}

TEST_CASE("plan extraction reads both command grammar and prose") {
    const std::vector<std::string> callsigns{"FLIGHT1", "FLIGHT2", "FLIGHT3", "FLIGHT4", "AB112"};

    auto cmds = extract_plan_commands(
        "Here is the resolution plan:\n"
        "1. **FLIGHT2**: Climb to an altitude of 36200 ft.\n"
        "2. **FLIGHT3**: Descend to an altitude of 32200 ft.\n"
        "3. **FLIGHT4**: Climb to an altitude of 36200 ft.\n"
        "4. **AB112**: Turn to a heading of 225 degrees.\n"
        "5. Reduce FLIGHT1 speed to 250 knots.\n",
        callsigns, true);
    CHECK(cmds == std::vector<std::string>{"ALT FLIGHT2 36200", "ALT FLIGHT3 32200",
                                           "ALT FLIGHT4 36200", "HDG AB112 225",
                                           "SPD FLIGHT1 250"});

    cmds = extract_plan_commands("Send HDG FLIGHT1 090 immediately.\nALT FLIGHT2 24000\n",
                                 callsigns, true);
    CHECK(cmds == std::vector<std::string>{"HDG FLIGHT1 090", "ALT FLIGHT2 24000"});

    cmds = extract_plan_commands("FLIGHT2 should turn 40 degrees right, to heading 130.\n",
                                 callsigns, true);
    CHECK(cmds == std::vector<std::string>{"HDG FLIGHT2 130"});

    cmds = extract_plan_commands("GHOST9: Climb to an altitude of 30000 ft.\n"
                                 "The airspace looks clear otherwise.\n",
                                 callsigns, false);
    CHECK(cmds.empty());

    CHECK(throws_code(Errc::plan_extraction_error,
                      [&] { extract_plan_commands("No action needed.", callsigns, true); }));
}

TEST_CASE("multi-agent pipeline plans, executes and verifies") {
    auto s = scenario::generate(scenario::ConflictType::parallel, 2, 11);
    auto flights = s.initial_states;
    std::sort(flights.begin(), flights.end(), [](const auto& a, const auto& b) {
        return a.altitude_ft != b.altitude_ft ? a.altitude_ft < b.altitude_ft
                                              : a.callsign < b.callsign;
    });
    double anchor = std::round(flights[0].altitude_ft / 100.0) * 100.0;
    std::string plan_text = "Resolution plan:\n";
    for (std::size_t i = 0; i < flights.size(); ++i) {
        double level = anchor + 1000.0 * static_cast<double>(i);
        plan_text += fmt::format("{}. **{}**: {} to an altitude of {} ft.\n", i + 1,
                                 flights[i].callsign,
                                 level >= flights[i].altitude_ft ? "Climb" : "Descend", level);
    }

    FunctionBackend planner("scripted:planner", [&](const BackendRequest&) {
        return raw_text(plan_text);
    });
    ExecutorBackend executor;
    // Prediction freezes at decision time, so the verifier lets the commanded
    // profiles take effect before checking.
    std::vector<ScriptedStep> check_steps;
    check_steps.push_back({"", tools::ToolCall{"CONTINUEMONITORING", {{"duration", 30}}}, ""});
    check_steps.push_back({"No conflicts detected.", std::nullopt,
                           "The airspace is clear; the task is concluded."});
    SequenceBackend verifier("scripted:verifier", std::move(check_steps));

    MultiAgentConfig team;
    team.planner.backend_id = planner.id();
    team.executor.backend_id = executor.id();
    team.verifier.backend_id = verifier.id();

    Transcript t = run_multi_agent(s, team, planner, executor, verifier,
                                   conflict::SeparationStandard{});
    CHECK(t.score == 1);
    CHECK(t.scored);
    CHECK(t.flags.empty());
    CHECK(t.final_text == "The airspace is clear; the task is concluded.");
    CHECK(t.command_count == 2);
    CHECK(t.iterations == 1 + 3 + 2);
    CHECK(t.config.at("mode") == "multi");

    // Executor purity: every one of its tool calls is SENDCOMMAND.
    int executor_calls = 0;
    for (const auto& e : t.events) {
        if (e.kind == "tool_call" && e.agent == "executor") {
            ++executor_calls;
            CHECK(e.data.at("tool") == "SENDCOMMAND");
        }
        if (e.kind == "tool_call" && e.agent == "planner") {
            CHECK(e.data.at("tool") != "SENDCOMMAND");
        }
    }
    CHECK(executor_calls == 2);
    CHECK(count_events(t, "command", "executor") == 2);
    CHECK(count_events(t, "command", "planner") == 0);

    // The whole team run replays.
    conflict::SeparationStandard standard;
    std::string jsonl = to_jsonl(t);
    ReplayResult replay = replay_transcript(from_jsonl(jsonl), standard);
    CHECK(replay.score == 1);
    CHECK(replay.commands_applied == 2);
}

TEST_CASE("verifier catches a flawed plan and triggers one replan") {
    auto s = scenario::generate(scenario::ConflictType::head_on, 2, 5);
    auto flights = s.initial_states;
    std::sort(flights.begin(), flights.end(), [](const auto& a, const auto& b) {
        return a.altitude_ft != b.altitude_ft ? a.altitude_ft < b.altitude_ft
                                              : a.callsign < b.callsign;
    });
    const std::string low = flights[0].callsign;
    const std::string high = flights[1].callsign;

    // Both aircraft to the same level: still head-on, now guaranteed fatal.
    std::string bad_plan = fmt::format("1. **{}**: Climb to an altitude of 30000 ft.\n"
                                       "2. **{}**: Climb to an altitude of 30000 ft.\n",
                                       low, high);
    std::string fixed_plan = fmt::format("1. **{}**: Climb to an altitude of 30000 ft.\n"
                                         "2. **{}**: Climb to an altitude of 31000 ft.\n",
                                         low, high);

    FunctionBackend planner("scripted:planner", [&](const BackendRequest&) {
        return raw_text(bad_plan);
    });
    ExecutorBackend executor;
    std::vector<ScriptedStep> check_steps;
    check_steps.push_back({"", tools::ToolCall{"CONTINUEMONITORING", {{"duration", 30}}}, ""});
    check_steps.push_back({"Aircraft Pairs in Conflict", std::nullopt, fixed_plan});
    check_steps.push_back({"", tools::ToolCall{"CONTINUEMONITORING", {{"duration", 30}}}, ""});
    check_steps.push_back({"No conflicts detected.", std::nullopt, "All clear; concluding."});
    SequenceBackend verifier("scripted:verifier", std::move(check_steps));

    MultiAgentConfig team;
    team.planner.backend_id = planner.id();
    team.executor.backend_id = executor.id();
    team.verifier.backend_id = verifier.id();

    Transcript t = run_multi_agent(s, team, planner, executor, verifier,
                                   conflict::SeparationStandard{});
    CHECK(t.score == 1);
    CHECK(!t.has_flag("ReplanLimitExceeded"));
    CHECK(t.final_text == "All clear; concluding.");
    CHECK(t.command_count == 4);
    CHECK(count_events(t, "command", "executor") == 4);
    bool replanned = false;
    for (const auto& e : t.events) {
        if (e.kind == "note" && e.data.contains("replan_round")) replanned = true;
    }
    CHECK(replanned);
}

TEST_CASE("replan limit zero discards the correction and flags the run") {
    auto s = scenario::generate(scenario::ConflictType::head_on, 2, 5);
    auto flights = s.initial_states;
    std::sort(flights.begin(), flights.end(), [](const auto& a, const auto& b) {
        return a.altitude_ft != b.altitude_ft ? a.altitude_ft < b.altitude_ft
                                              : a.callsign < b.callsign;
    });
    const std::string low = flights[0].callsign;
    const std::string high = flights[1].callsign;

    std::string bad_plan = fmt::format("1. **{}**: Climb to an altitude of 30000 ft.\n"
                                       "2. **{}**: Climb to an altitude of 30000 ft.\n",
                                       low, high);
    std::string fixed_plan = fmt::format("1. **{}**: Climb to an altitude of 31000 ft.\n", high);

    FunctionBackend planner("scripted:planner", [&](const BackendRequest&) {
        return raw_text(bad_plan);
    });
    ExecutorBackend executor;
    std::vector<ScriptedStep> check_steps;
    check_steps.push_back({"", tools::ToolCall{"CONTINUEMONITORING", {{"duration", 30}}}, ""});
    check_steps.push_back({"Aircraft Pairs in Conflict", std::nullopt, fixed_plan});
    SequenceBackend verifier("scripted:verifier", std::move(check_steps));

    MultiAgentConfig team;
    team.planner.backend_id = planner.id();
    team.executor.backend_id = executor.id();
    team.verifier.backend_id = verifier.id();
    team.replan_limit = 0;

    Transcript t = run_multi_agent(s, team, planner, executor, verifier,
                                   conflict::SeparationStandard{});
    CHECK(t.has_flag("ReplanLimitExceeded"));
    CHECK(t.score < 1);
    CHECK(t.command_count == 2);
}

TEST_CASE("an unparseable plan is a hard error") {
    auto s = scenario::generate(scenario::ConflictType::converging, 2, 6);
    FunctionBackend planner("scripted:planner", [&](const BackendRequest&) {
        return raw_text("Traffic looks manageable; no changes proposed.");
    });
    ExecutorBackend executor;
    NoopBackend verifier;
    MultiAgentConfig team;
    CHECK(throws_code(Errc::plan_extraction_error, [&] {
        run_multi_agent(s, team, planner, executor, verifier, conflict::SeparationStandard{});
    }));
}
