#include "atc/experience/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "atc/conflict/metrics.hpp"
#include "atc/errors.hpp"
#include "atc/sim/command.hpp"
#include "atc/tools/toolkit.hpp"

namespace atc::experience {

using nlohmann::json;

namespace {

std::string pair_key(const std::string& a, const std::string& b) {
    return a <= b ? a + " - " + b : b + " - " + a;
}

struct TimelineEntry {
    bool is_command = false;
    double clock_s = 0.0;
    std::string command;               // when is_command
    std::set<std::string> pairs;       // when observation
};

// Recorded pair-set observations plus the accepted commands, in event order.
std::vector<TimelineEntry> build_timeline(const agent::Transcript& t) {
    std::vector<TimelineEntry> timeline;
    std::string pending_tool;
    for (const auto& e : t.events) {
        if (e.kind == "tool_call") {
            pending_tool = e.data.value("tool", "");
        } else if (e.kind == "tool_result") {
            const json& payload = e.data.contains("payload") ? e.data.at("payload")
                                                             : json::object();
            if (pending_tool == "GETCONFLICTINFO" && payload.contains("pairs")) {
                TimelineEntry obs;
                obs.clock_s = e.clock_s;
                for (const auto& p : payload.at("pairs")) {
                    obs.pairs.insert(pair_key(p.at("callsign_a").get<std::string>(),
                                              p.at("callsign_b").get<std::string>()));
                }
                timeline.push_back(std::move(obs));
            } else if (pending_tool == "CONTINUEMONITORING" && payload.contains("persisting")) {
                TimelineEntry obs;
                obs.clock_s = e.clock_s;
                for (const auto& k : payload.at("persisting")) obs.pairs.insert(k.get<std::string>());
                for (const auto& k : payload.at("new")) obs.pairs.insert(k.get<std::string>());
                timeline.push_back(std::move(obs));
            }
        } else if (e.kind == "command") {
            TimelineEntry cmd;
            cmd.is_command = true;
            cmd.clock_s = e.clock_s;
            cmd.command = e.data.at("command").get<std::string>();
            timeline.push_back(std::move(cmd));
        }
    }
    return timeline;
}

// Pair set after replaying `commands` (event order, at their clocks) and
// advancing to at_clock.
std::set<std::string> pairs_by_replay(const scenario::Scenario& sc,
                                      const std::vector<std::pair<double, std::string>>& commands,
                                      double at_clock,
                                      const conflict::SeparationStandard& standard) {
    try {
        sim::World w = scenario::world_from(sc);
        for (const auto& [clock, text] : commands) {
            if (clock > w.clock_s()) w.run_until(clock);
            w.apply_command(sim::Command::parse(text));
        }
        if (at_clock > w.clock_s()) w.run_until(at_clock);
        std::set<std::string> keys;
        for (const auto& p : conflict::detect_conflicts(w, standard)) {
            keys.insert(pair_key(p.callsign_a, p.callsign_b));
        }
        return keys;
    } catch (const AtcError& e) {
        raise(Errc::replay_mismatch, fmt::format("cannot reconstruct world state: {}", e.what()));
    }
}

} // namespace

std::vector<CategorizedCommand> categorize_commands(const agent::Transcript& transcript,
                                                    const conflict::SeparationStandard& standard) {
    auto timeline = build_timeline(transcript);

    std::vector<std::pair<double, std::string>> all_commands;
    double last_clock = 0.0;
    for (const auto& e : timeline) {
        last_clock = std::max(last_clock, e.clock_s);
        if (e.is_command) all_commands.emplace_back(e.clock_s, e.command);
    }

    std::optional<std::set<std::string>> tail;
    auto tail_pairs = [&]() -> const std::set<std::string>& {
        if (!tail) {
            tail = pairs_by_replay(transcript.scenario, all_commands, last_clock + 60.0, standard);
        }
        return *tail;
    };

    std::vector<CategorizedCommand> out;
    std::size_t commands_before = 0;
    for (std::size_t i = 0; i < timeline.size(); ++i) {
        if (!timeline[i].is_command) continue;
        const std::set<std::string>* before = nullptr;
        for (std::size_t j = i; j-- > 0;) {
            if (!timeline[j].is_command) {
                before = &timeline[j].pairs;
                break;
            }
        }
        std::set<std::string> replayed_before;
        if (!before) {
            std::vector<std::pair<double, std::string>> prior(all_commands.begin(),
                                                              all_commands.begin() +
                                                                  commands_before);
            replayed_before =
                pairs_by_replay(transcript.scenario, prior, timeline[i].clock_s, standard);
            before = &replayed_before;
        }
        const std::set<std::string>* after = nullptr;
        for (std::size_t j = i + 1; j < timeline.size(); ++j) {
            if (!timeline[j].is_command) {
                after = &timeline[j].pairs;
                break;
            }
        }
        if (!after) after = &tail_pairs();

        bool helpful = std::any_of(before->begin(), before->end(),
                                   [&](const std::string& k) { return !after->count(k); });
        out.push_back({timeline[i].command, helpful});
        ++commands_before;
    }
    return out;
}

std::vector<std::string> relativize(const std::vector<std::string>& commands,
                                    const std::vector<sim::AircraftState>& initial_states) {
    auto initial = [&](const std::string& callsign) -> const sim::AircraftState& {
        for (const auto& a : initial_states) {
            if (a.callsign == callsign) return a;
        }
        raise(Errc::unknown_callsign,
              fmt::format("no initial state for \"{}\"", callsign));
    };

    std::vector<std::string> out;
    out.reserve(commands.size());
    for (const auto& text : commands) {
        sim::Command cmd = sim::Command::parse(text);
        const sim::AircraftState& a = initial(cmd.callsign);
        std::string phrase;
        switch (cmd.verb) {
        case sim::CommandVerb::altitude: {
            double delta = cmd.value - a.altitude_ft;
            long r = std::lround(std::fabs(delta) / 100.0) * 100;
            if (r == 0) {
                phrase = "hold altitude";
            } else {
                phrase = fmt::format("{} ~{} ft", delta > 0 ? "climb" : "descend", r);
            }
            break;
        }
        case sim::CommandVerb::heading: {
            double d = std::fmod(cmd.value - a.heading_deg, 360.0);
            if (d > 180.0) d -= 360.0;
            if (d <= -180.0) d += 360.0;
            long r = std::lround(std::fabs(d) / 5.0) * 5;
            if (r == 0) {
                phrase = "maintain heading";
            } else {
                phrase = fmt::format("turn {} ~{} degrees", d > 0 ? "right" : "left", r);
            }
            break;
        }
        case sim::CommandVerb::speed: {
            double delta = cmd.value - a.ground_speed_kt;
            long r = std::lround(std::fabs(delta) / 10.0) * 10;
            if (r == 0) {
                phrase = "maintain speed";
            } else {
                phrase = fmt::format("{} speed ~{} kt", delta > 0 ? "increase" : "reduce", r);
            }
            break;
        }
        }
        out.push_back(fmt::format("{}: {}", cmd.callsign, phrase));
    }
    return out;
}

std::vector<std::pair<std::string, std::string>>
anonymization_map(const std::vector<sim::AircraftState>& initial_states) {
    std::vector<std::pair<std::string, std::string>> mapping;
    mapping.reserve(initial_states.size());
    for (std::size_t i = 0; i < initial_states.size(); ++i) {
        mapping.emplace_back(initial_states[i].callsign, fmt::format("AC{}", i + 1));
    }
    return mapping;
}

std::string anonymize(const std::string& text,
                      const std::vector<std::pair<std::string, std::string>>& mapping) {
    // Two phases through private placeholders: a replacement token can never
    // be re-matched as someone else's original callsign.
    std::vector<std::size_t> order(mapping.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return mapping[a].first.size() > mapping[b].first.size();
    });

    std::string s = text;
    auto replace_all = [](std::string& target, const std::string& from, const std::string& to) {
        if (from.empty()) return;
        std::size_t pos = 0;
        while ((pos = target.find(from, pos)) != std::string::npos) {
            target.replace(pos, from.size(), to);
            pos += to.size();
        }
    };
    for (std::size_t idx : order) {
        replace_all(s, mapping[idx].first, fmt::format("\x01{}\x01", idx));
    }
    for (std::size_t idx = 0; idx < mapping.size(); ++idx) {
        replace_all(s, fmt::format("\x01{}\x01", idx), mapping[idx].second);
    }
    return s;
}

namespace {

std::string formation_display(scenario::ConflictType t) {
    switch (t) {
    case scenario::ConflictType::head_on: return "Head-on";
    case scenario::ConflictType::parallel: return "Parallel";
    case scenario::ConflictType::t_formation: return "T-formation";
    case scenario::ConflictType::converging: return "Converging";
    }
    return "Unknown";
}

std::string formation_word(scenario::ConflictType t) {
    switch (t) {
    case scenario::ConflictType::head_on: return "head-on";
    case scenario::ConflictType::parallel: return "parallel";
    case scenario::ConflictType::t_formation: return "T-formation";
    case scenario::ConflictType::converging: return "converging";
    }
    return "unknown";
}

} // namespace

std::string TemplateSummarizer::describe_conflict(const SummaryMaterial& material) {
    const scenario::Scenario& sc = *material.scenario;
    std::string text =
        fmt::format("{} conflict involving {} aircraft.", formation_display(sc.conflict_type),
                    sc.n_aircraft);
    for (const auto& a : sc.initial_states) {
        text += fmt::format(" {} at {:.0f} ft, heading {:03.0f}, {:.0f} kt", a.callsign,
                            a.altitude_ft, a.heading_deg, a.ground_speed_kt);
        if (std::fabs(a.target_altitude_ft - a.altitude_ft) > 0.5) {
            text += fmt::format(", cleared to {:.0f} ft", a.target_altitude_ft);
        }
        text += ".";
    }
    if (!material.conflict_pairs.empty()) {
        std::string pairs;
        for (const auto& k : material.conflict_pairs) {
            if (!pairs.empty()) pairs += "; ";
            pairs += k;
        }
        text += fmt::format(" Predicted losses of separation: {}.", pairs);
    }
    return text;
}

std::string TemplateSummarizer::command_insight(const SummaryMaterial& material,
                                                const std::string& relative_command,
                                                bool helpful) {
    (void)relative_command;
    if (helpful) {
        return fmt::format("Eliminated at least one conflict pair in this {} geometry.",
                           formation_word(material.scenario->conflict_type));
    }
    return "Did not eliminate any conflict pair on its own.";
}

BackendSummarizer::BackendSummarizer(agent::Backend& backend, double temperature,
                                     agent::SleepFn sleep)
    : backend_(backend), temperature_(temperature), sleep_(std::move(sleep)) {}

std::string BackendSummarizer::id() const { return backend_.id(); }

std::string BackendSummarizer::ask(const std::string& instruction, const std::string& input) {
    agent::BackendRequest req;
    req.messages = {{"system", instruction}, {"user", input}};
    req.temperature = temperature_;
    try {
        agent::BackendRaw raw = agent::complete_with_retries(backend_, req, 3, sleep_);
        agent::BackendOutput out = agent::parse_backend_output(raw);
        if (!out.is_final() || out.text.empty()) {
            raise(Errc::summarizer_error, "summarizer must reply with plain text");
        }
        return out.text;
    } catch (const AtcError& e) {
        if (e.code() == Errc::backend_error || e.code() == Errc::malformed_tool_call) {
            raise(Errc::summarizer_error, e.what());
        }
        throw;
    }
}

std::string BackendSummarizer::describe_conflict(const SummaryMaterial& material) {
    const scenario::Scenario& sc = *material.scenario;
    json aircraft = json::array();
    for (const auto& a : sc.initial_states) {
        aircraft.push_back({{"callsign", a.callsign},
                            {"altitude_ft", a.altitude_ft},
                            {"heading_deg", a.heading_deg},
                            {"ground_speed_kt", a.ground_speed_kt},
                            {"target_altitude_ft", a.target_altitude_ft}});
    }
    json input = {{"formation", scenario::conflict_type_name(sc.conflict_type)},
                  {"num_aircraft", sc.n_aircraft},
                  {"aircraft", std::move(aircraft)},
                  {"conflict_info", material.conflict_info_text}};
    return ask("You write concise air traffic conflict descriptions. Using the material "
               "provided, describe the conflict geometry and the aircraft involved in one "
               "short paragraph. Reply with the description only.",
               input.dump());
}

std::string BackendSummarizer::command_insight(const SummaryMaterial& material,
                                               const std::string& relative_command,
                                               bool helpful) {
    json input = {{"conflict_description", material.description},
                  {"command", relative_command},
                  {"eliminated_a_conflict_pair", helpful}};
    return ask("You annotate air traffic resolution commands. Given a conflict description "
               "and one executed command with its outcome, reply with a single short "
               "sentence of insight about the command's effect.",
               input.dump());
}

std::optional<ExperienceDocument> build_experience_document(const agent::Transcript& transcript,
                                                            Summarizer& summarizer,
                                                            const Embedder& embedder,
                                                            const DocumentOptions& options) {
    if (!transcript.scored) {
        raise(Errc::incomplete_simulation, "transcript is not scored yet");
    }
    if (!options.trusted_backends.empty() &&
        std::find(options.trusted_backends.begin(), options.trusted_backends.end(),
                  summarizer.id()) == options.trusted_backends.end()) {
        return std::nullopt;
    }

    const scenario::Scenario& sc = transcript.scenario;
    auto categorized = categorize_commands(transcript, options.standard);
    std::vector<std::string> raw_commands;
    raw_commands.reserve(categorized.size());
    for (const auto& c : categorized) raw_commands.push_back(c.command);
    auto relative = relativize(raw_commands, sc.initial_states);

    SummaryMaterial material;
    material.scenario = &sc;
    {
        sim::World w = scenario::world_from(sc);
        for (const auto& p : conflict::detect_conflicts(w, options.standard)) {
            material.conflict_pairs.push_back(pair_key(p.callsign_a, p.callsign_b));
        }
        tools::ToolKit kit(std::move(w), options.standard);
        material.conflict_info_text = kit.get_conflict_info().text;
    }
    material.description = summarizer.describe_conflict(material);

    ExperienceDocument doc;
    doc.id = "exp-" + transcript.scenario_id;
    doc.num_aircraft = sc.n_aircraft;
    doc.conflict_formation = sc.conflict_type;
    doc.source_backend = summarizer.id();
    doc.created_at = options.created_at;

    auto mapping = anonymization_map(sc.initial_states);
    doc.conflict_description = anonymize(material.description, mapping);
    for (std::size_t i = 0; i < categorized.size(); ++i) {
        std::string insight =
            summarizer.command_insight(material, relative[i], categorized[i].helpful);
        doc.commands.push_back({anonymize(relative[i], mapping), categorized[i].helpful,
                                anonymize(insight, mapping)});
    }
    doc.embedding = embedder.embed(doc.conflict_description);
    return doc;
}

} // namespace atc::experience
