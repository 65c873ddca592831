#include "atc/tools/toolkit.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "atc/errors.hpp"
#include "atc/sim/command.hpp"

namespace atc::tools {
namespace {

using nlohmann::json;

std::string strip_negative_zero(std::string s) {
    if (!s.empty() && s[0] == '-' &&
        s.find_first_not_of("0.", 1) == std::string::npos) {
        s.erase(0, 1);
    }
    return s;
}

std::string f1(double v) { return strip_negative_zero(fmt::format("{:.1f}", v)); }
std::string f2(double v) { return strip_negative_zero(fmt::format("{:.2f}", v)); }

json pair_payload(const conflict::ConflictPair& p) {
    return {{"callsign_a", p.callsign_a},
            {"callsign_b", p.callsign_b},
            {"tcpa_s", p.tcpa_s},
            {"dcpa_nm", p.dcpa_nm},
            {"tlos_s", *p.tlos_s},
            {"heading_difference_deg", p.heading_difference_deg},
            {"horizontal_sep_nm", p.horizontal_sep_nm},
            {"vertical_sep_ft", p.vertical_sep_ft},
            {"total_sep_nm", p.total_sep_nm}};
}

std::set<std::string> pair_keys(const std::vector<conflict::ConflictPair>& pairs) {
    std::set<std::string> keys;
    for (const auto& p : pairs) keys.insert(pair_key(p.callsign_a, p.callsign_b));
    return keys;
}

std::string join(const std::set<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += "; ";
        out += s;
    }
    return out;
}

double arg_number(const json& args, const char* key, const char* tool) {
    const json& v = args.at(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        try {
            std::size_t used = 0;
            double parsed = std::stod(v.get<std::string>(), &used);
            if (used == v.get<std::string>().size() && std::isfinite(parsed)) return parsed;
        } catch (const std::exception&) {
        }
    }
    raise(Errc::malformed_tool_call,
          fmt::format("argument '{}' of {} must be a number", key, tool));
}

} // namespace

std::string pair_key(const std::string& callsign_a, const std::string& callsign_b) {
    return fmt::format("{} - {}", callsign_a, callsign_b);
}

std::string render_aircraft_line(const sim::AircraftState& a) {
    return fmt::format(
        "{}: Position ({}, {}) NM, Heading {} deg, Altitude {} ft, Vertical speed {} fpm, "
        "Ground speed {} kt",
        a.callsign, f2(a.x_nm), f2(a.y_nm), f1(a.heading_deg), f1(a.altitude_ft),
        f1(a.vertical_speed_fpm), f1(a.ground_speed_kt));
}

std::string render_conflicts(const std::vector<conflict::ConflictPair>& pairs) {
    if (pairs.empty()) return "No conflicts detected.";
    std::string out = "Aircraft Pairs in Conflict and their TCPA (sec):\n";
    std::set<std::string> involved;
    for (const auto& p : pairs) {
        involved.insert(p.callsign_a);
        involved.insert(p.callsign_b);
        out += fmt::format("{}:\n", pair_key(p.callsign_a, p.callsign_b));
        out += fmt::format("  TCPA: {} sec\n", f1(p.tcpa_s));
        out += fmt::format("  Heading difference: {} deg\n", f1(p.heading_difference_deg));
        out += fmt::format("  Total separation: {} NM\n", f2(p.total_sep_nm));
        out += fmt::format("  Vertical separation: {} ft\n", f1(p.vertical_sep_ft));
        out += fmt::format("  Horizontal separation: {} NM\n", f2(p.horizontal_sep_nm));
        out += fmt::format("  DCPA: {} NM\n", f2(p.dcpa_nm));
        out += fmt::format("  tLOS: {} sec\n", f1(*p.tlos_s));
    }
    out += fmt::format("Number of aircraft in conflict: {}\n", involved.size());
    out += "Aircraft Altitude Information:\n";
    struct AltLine {
        std::string callsign;
        conflict::AltitudeInfo info;
    };
    std::vector<AltLine> lines;
    for (const auto& p : pairs) {
        if (involved.count(p.callsign_a)) {
            lines.push_back({p.callsign_a, p.altitude_a});
            involved.erase(p.callsign_a);
        }
        if (involved.count(p.callsign_b)) {
            lines.push_back({p.callsign_b, p.altitude_b});
            involved.erase(p.callsign_b);
        }
    }
    std::sort(lines.begin(), lines.end(),
              [](const AltLine& a, const AltLine& b) { return a.callsign < b.callsign; });
    for (const auto& l : lines) {
        out += fmt::format("{}: Altitude {} ft -> {} ft ({})\n", l.callsign, f1(l.info.current_ft),
                           f1(l.info.target_ft), sim::tendency_name(l.info.tendency));
    }
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

ToolKit::ToolKit(sim::World world, conflict::SeparationStandard standard)
    : world_(std::move(world)), standard_(standard) {
    standard_.validate();
}

const std::vector<ToolDescriptor>& ToolKit::descriptors() {
    static const std::vector<ToolDescriptor> all = {
        {"GETALLAIRCRAFTINFO",
         "Retrieves the current state of every aircraft in the airspace: position, heading, "
         "altitude, vertical speed and ground speed.",
         {{"command", "string", false,
           "Info subcommand; GETACIDS returns the full aircraft list (the default)."}}},
        {"GETCONFLICTINFO",
         "Lists aircraft pairs predicted to lose separation within the lookahead: TCPA, heading "
         "difference, separations, DCPA and tLOS, plus each involved aircraft's altitude and "
         "trend.",
         {}},
        {"CONTINUEMONITORING",
         "Advances the simulation by the given duration and reports how the set of conflict "
         "pairs changed.",
         {{"duration", "number", true, "Seconds to monitor, between 1 and 300."}}},
        {"SENDCOMMAND",
         "Sends a control command to one aircraft: HDG <callsign> <degrees>, ALT <callsign> "
         "<feet> or SPD <callsign> <knots>.",
         {{"command", "string", true, "Command text, e.g. 'HDG AB112 225'."}}},
        {"SEARCHEXPERIENCELIBRARY",
         "Returns the most relevant stored experience document for a conflict situation.",
         {{"conflict_description", "string", true,
           "Short description of the current conflict geometry."},
          {"conflict_formation", "string", true,
           "One of HeadOn, Parallel, TFormation, Converging."},
          {"num_aircraft", "integer", true, "Number of aircraft involved in the conflict."}}},
    };
    return all;
}

const ToolDescriptor& ToolKit::descriptor(const std::string& name) {
    for (const auto& d : descriptors()) {
        if (d.name == name) return d;
    }
    raise(Errc::malformed_tool_call,
          fmt::format("unknown tool '{}'; available tools: GETALLAIRCRAFTINFO, GETCONFLICTINFO, "
                      "CONTINUEMONITORING, SENDCOMMAND, SEARCHEXPERIENCELIBRARY",
                      name));
}

std::vector<ToolDescriptor> ToolKit::available_descriptors() const {
    std::vector<ToolDescriptor> out;
    for (const auto& d : descriptors()) {
        if (d.name == "SEARCHEXPERIENCELIBRARY" && !experience_search_) continue;
        out.push_back(d);
    }
    return out;
}

json ToolDescriptor::schema() const {
    json props = json::object();
    json required = json::array();
    for (const auto& p : parameters) {
        props[p.name] = {{"type", p.type}, {"description", p.description}};
        if (p.required) required.push_back(p.name);
    }
    return {{"type", "function"},
            {"function",
             {{"name", name},
              {"description", description},
              {"parameters",
               {{"type", "object"}, {"properties", props}, {"required", required}}}}}};
}

ToolDescriptor ToolDescriptor::from_schema(const json& j) {
    try {
        const json& fn = j.at("function");
        ToolDescriptor d;
        d.name = fn.at("name").get<std::string>();
        d.description = fn.at("description").get<std::string>();
        const json& params = fn.at("parameters");
        std::set<std::string> required;
        for (const json& r : params.at("required")) required.insert(r.get<std::string>());
        for (auto it = params.at("properties").begin(); it != params.at("properties").end(); ++it) {
            d.parameters.push_back({it.key(), it.value().at("type").get<std::string>(),
                                    required.count(it.key()) > 0,
                                    it.value().at("description").get<std::string>()});
        }
        return d;
    } catch (const json::exception& e) {
        raise(Errc::parse_error, fmt::format("bad tool schema: {}", e.what()));
    }
}

ToolResult ToolKit::execute(const ToolCall& call) {
    const ToolDescriptor& desc = descriptor(call.tool);
    const json& args = call.args;
    if (!args.is_object() && !args.is_null()) {
        raise(Errc::malformed_tool_call,
              fmt::format("arguments for {} must be a JSON object", call.tool));
    }
    for (const auto& p : desc.parameters) {
        if (!p.required) continue;
        if (args.is_null() || !args.contains(p.name)) {
            raise(Errc::malformed_tool_call,
                  fmt::format("missing required argument '{}' for {}", p.name, call.tool));
        }
    }
    if (call.tool == "GETALLAIRCRAFTINFO") return get_all_aircraft_info();
    if (call.tool == "GETCONFLICTINFO") return get_conflict_info();
    if (call.tool == "CONTINUEMONITORING") {
        return continue_monitoring(arg_number(args, "duration", "CONTINUEMONITORING"));
    }
    if (call.tool == "SENDCOMMAND") {
        const json& v = args.at("command");
        if (!v.is_string()) {
            raise(Errc::malformed_tool_call, "argument 'command' of SENDCOMMAND must be a string");
        }
        return send_command(v.get<std::string>());
    }
    ExperienceQuery q;
    const json& dv = args.at("conflict_description");
    const json& fv = args.at("conflict_formation");
    if (!dv.is_string() || !fv.is_string()) {
        raise(Errc::malformed_tool_call,
              "conflict_description and conflict_formation must be strings");
    }
    q.conflict_description = dv.get<std::string>();
    q.conflict_formation = fv.get<std::string>();
    q.num_aircraft = static_cast<int>(arg_number(args, "num_aircraft", call.tool.c_str()));
    return search_experience(q);
}

ToolResult ToolKit::get_all_aircraft_info() {
    ToolResult r;
    r.clock_s = world_.clock_s();
    if (world_.aircraft().empty()) {
        r.text = "No aircraft in airspace.";
        r.payload = {{"aircraft", json::array()}};
        return r;
    }
    json list = json::array();
    std::string text;
    for (const auto& a : world_.aircraft()) {
        text += render_aircraft_line(a) + "\n";
        list.push_back({{"callsign", a.callsign},
                        {"x_nm", a.x_nm},
                        {"y_nm", a.y_nm},
                        {"altitude_ft", a.altitude_ft},
                        {"heading_deg", a.heading_deg},
                        {"ground_speed_kt", a.ground_speed_kt},
                        {"vertical_speed_fpm", a.vertical_speed_fpm},
                        {"target_altitude_ft", a.target_altitude_ft}});
    }
    text.pop_back();
    r.text = std::move(text);
    r.payload = {{"aircraft", std::move(list)}};
    return r;
}

ToolResult ToolKit::get_conflict_info() {
    ToolResult r;
    r.clock_s = world_.clock_s();
    auto pairs = conflict::detect_conflicts(world_, standard_);
    r.text = render_conflicts(pairs);
    json plist = json::array();
    std::set<std::string> involved;
    for (const auto& p : pairs) {
        plist.push_back(pair_payload(p));
        involved.insert(p.callsign_a);
        involved.insert(p.callsign_b);
    }
    json aircraft = json::array();
    for (const auto& cs : involved) {
        const sim::AircraftState* a = world_.find(cs);
        aircraft.push_back({{"callsign", cs},
                            {"altitude_ft", a->altitude_ft},
                            {"target_altitude_ft", a->target_altitude_ft},
                            {"tendency", sim::tendency_name(sim::altitude_tendency(*a))}});
    }
    r.payload = {{"pairs", std::move(plist)},
                 {"num_aircraft_in_conflict", involved.size()},
                 {"aircraft", std::move(aircraft)}};
    return r;
}

ToolResult ToolKit::continue_monitoring(double duration_s) {
    if (!(duration_s >= 1.0 && duration_s <= 300.0)) {
        raise(Errc::duration_out_of_range,
              fmt::format("duration {} outside [1, 300] seconds", duration_s));
    }
    auto before = pair_keys(conflict::detect_conflicts(world_, standard_));
    world_.run_until(world_.clock_s() + duration_s);
    auto pairs = conflict::detect_conflicts(world_, standard_);
    auto after = pair_keys(pairs);

    std::set<std::string> resolved, added, persisting;
    for (const auto& k : before) (after.count(k) ? persisting : resolved).insert(k);
    for (const auto& k : after) {
        if (!before.count(k)) added.insert(k);
    }

    std::string text = fmt::format("Monitoring complete after {} sec. World clock: {} sec.\n",
                                   f1(duration_s), f1(world_.clock_s()));
    if (resolved.empty() && added.empty()) {
        text += "No change in conflict status.\n";
    } else {
        if (!resolved.empty()) text += fmt::format("Resolved pairs: {}\n", join(resolved));
        if (!added.empty()) text += fmt::format("New pairs: {}\n", join(added));
        if (!persisting.empty()) text += fmt::format("Persisting pairs: {}\n", join(persisting));
    }
    text += "\n" + render_conflicts(pairs);

    ToolResult r;
    r.clock_s = world_.clock_s();
    r.text = std::move(text);
    r.payload = {{"duration_s", duration_s},
                 {"clock_s", world_.clock_s()},
                 {"resolved", json(resolved)},
                 {"new", json(added)},
                 {"persisting", json(persisting)}};
    return r;
}

ToolResult ToolKit::send_command(const std::string& command_text) {
    ToolResult r;
    try {
        sim::Command cmd = sim::Command::parse(command_text);
        world_.apply_command(cmd);
        std::string normalized = cmd.format();
        command_log_.emplace_back(world_.clock_s(), normalized);
        r.text = fmt::format("Command accepted: {}", normalized);
        r.payload = {{"accepted", true}, {"command", normalized}};
    } catch (const AtcError& e) {
        r.text = fmt::format("Command rejected: {}", e.what());
        r.payload = {{"accepted", false}, {"command", command_text}, {"error", e.what()}};
    }
    r.clock_s = world_.clock_s();
    return r;
}

ToolResult ToolKit::search_experience(const ExperienceQuery& query) {
    if (!experience_search_) {
        raise(Errc::library_unavailable, "no experience library attached to this run");
    }
    if (query.conflict_description.empty()) {
        raise(Errc::malformed_tool_call, "conflict_description must be non-empty");
    }
    ToolResult r = experience_search_(query);
    r.clock_s = world_.clock_s();
    return r;
}

double ToolKit::last_command_time_s() const {
    return command_log_.empty() ? 0.0 : command_log_.back().first;
}

} // namespace atc::tools
