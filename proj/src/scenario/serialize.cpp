#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "atc/errors.hpp"
#include "atc/geom.hpp"
#include "atc/scenario/scenario.hpp"

namespace atc::scenario {
namespace {

using nlohmann::json;

json aircraft_to_json(const sim::AircraftState& a) {
    json j;
    j["callsign"] = a.callsign;
    j["x_nm"] = a.x_nm;
    j["y_nm"] = a.y_nm;
    j["altitude_ft"] = a.altitude_ft;
    j["heading_deg"] = a.heading_deg;
    j["ground_speed_kt"] = a.ground_speed_kt;
    j["vertical_speed_fpm"] = a.vertical_speed_fpm;
    j["target_heading_deg"] = a.target_heading_deg;
    j["target_altitude_ft"] = a.target_altitude_ft;
    j["target_speed_kt"] = a.target_speed_kt;
    return j;
}

sim::AircraftState aircraft_from_json(const json& j) {
    sim::AircraftState a;
    a.callsign = j.at("callsign").get<std::string>();
    a.x_nm = j.at("x_nm").get<double>();
    a.y_nm = j.at("y_nm").get<double>();
    a.altitude_ft = j.at("altitude_ft").get<double>();
    a.heading_deg = j.at("heading_deg").get<double>();
    a.ground_speed_kt = j.at("ground_speed_kt").get<double>();
    a.vertical_speed_fpm = j.at("vertical_speed_fpm").get<double>();
    a.target_heading_deg = j.at("target_heading_deg").get<double>();
    a.target_altitude_ft = j.at("target_altitude_ft").get<double>();
    a.target_speed_kt = j.at("target_speed_kt").get<double>();
    return a;
}

Scenario parse_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(Errc::parse_error, e.what());
    }
    try {
        Scenario s;
        s.id = j.at("id").get<std::string>();
        s.conflict_type = conflict_type_from(j.at("conflict_type").get<std::string>());
        s.n_aircraft = j.at("n_aircraft").get<int>();
        s.planned_collision_time_s = j.at("planned_collision_time_s").get<double>();
        s.evaluation_horizon_s = j.at("evaluation_horizon_s").get<double>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.origin_lat = j.at("origin_lat").get<double>();
        s.origin_lon = j.at("origin_lon").get<double>();
        s.validated = j.at("validated").get<bool>();
        for (const json& a : j.at("aircraft")) s.initial_states.push_back(aircraft_from_json(a));
        if (s.n_aircraft != static_cast<int>(s.initial_states.size())) {
            raise(Errc::parse_error,
                  fmt::format("n_aircraft {} does not match {} aircraft entries", s.n_aircraft,
                              s.initial_states.size()));
        }
        return s;
    } catch (const json::exception& e) {
        raise(Errc::parse_error, e.what());
    }
}

[[noreturn]] void scn_fail(int line, int col, const std::string& msg) {
    raise(Errc::parse_error, fmt::format("{} (line {}, column {})", msg, line, col));
}

struct Token {
    std::string text;
    int col = 0; // 1-based start column
};

std::vector<Token> tokenize(const std::string& line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
    }
    return out;
}

double parse_num(const Token& tok, int line) {
    try {
        std::size_t used = 0;
        double v = std::stod(tok.text, &used);
        if (used != tok.text.size() || !std::isfinite(v)) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        scn_fail(line, tok.col, fmt::format("expected a number, got '{}'", tok.text));
    }
}

double parse_altitude(const Token& tok, int line) {
    if (tok.text.size() > 2 && (tok.text[0] == 'F' || tok.text[0] == 'f') &&
        (tok.text[1] == 'L' || tok.text[1] == 'l')) {
        Token rest{tok.text.substr(2), tok.col + 2};
        return parse_num(rest, line) * 100.0;
    }
    return parse_num(tok, line);
}

std::string format_altitude(double alt_ft) {
    double fl = alt_ft / 100.0;
    if (std::fabs(fl - std::round(fl)) < 1e-9) return fmt::format("FL{:.0f}", fl);
    return fmt::format("{}", alt_ft);
}

double parse_timestamp(const std::string& text, int line, int col) {
    int h = 0, m = 0;
    double sec = 0.0;
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    in >> h >> c1 >> m >> c2 >> sec;
    if (!in || c1 != ':' || c2 != ':' || m < 0 || m > 59 || sec < 0.0 || sec >= 60.0) {
        scn_fail(line, col, fmt::format("bad timestamp '{}'", text));
    }
    return h * 3600.0 + m * 60.0 + sec;
}

Scenario parse_scn(const std::string& text) {
    std::map<std::string, std::string> meta;
    struct CmdLine {
        int line;
        double t;
        std::vector<Token> tokens;
    };
    std::vector<CmdLine> cmds;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (line[first] == '#') {
            std::string body = line.substr(first + 1);
            std::size_t sep = body.find(':');
            if (sep == std::string::npos) continue; // plain comment
            auto trim = [](std::string v) {
                std::size_t b = v.find_first_not_of(" \t");
                std::size_t e = v.find_last_not_of(" \t");
                return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
            };
            meta[trim(body.substr(0, sep))] = trim(body.substr(sep + 1));
            continue;
        }
        std::size_t arrow = line.find('>');
        if (arrow == std::string::npos) {
            scn_fail(lineno, static_cast<int>(first) + 1, "expected 'H:MM:SS.ss>VERB args'");
        }
        double t = parse_timestamp(line.substr(first, arrow - first), lineno,
                                   static_cast<int>(first) + 1);
        if (t != 0.0) {
            scn_fail(lineno, static_cast<int>(first) + 1,
                     "only time-0 commands describe an initial state");
        }
        auto tokens = tokenize(line.substr(arrow + 1));
        for (Token& tok : tokens) tok.col += static_cast<int>(arrow) + 1;
        if (tokens.empty()) scn_fail(lineno, static_cast<int>(arrow) + 2, "empty command");
        cmds.push_back({lineno, t, std::move(tokens)});
    }

    Scenario s;
    auto meta_num = [&](const char* key, double fallback) {
        auto it = meta.find(key);
        if (it == meta.end()) return fallback;
        Token tok{it->second, 1};
        return parse_num(tok, 0);
    };
    if (auto it = meta.find("scenario"); it != meta.end()) s.id = it->second;
    if (auto it = meta.find("conflict_type"); it != meta.end()) {
        s.conflict_type = conflict_type_from(it->second);
    }
    if (auto it = meta.find("origin"); it != meta.end()) {
        auto toks = tokenize(it->second);
        if (toks.size() != 2) raise(Errc::parse_error, "origin needs 'lat lon'");
        s.origin_lat = parse_num(toks[0], 0);
        s.origin_lon = parse_num(toks[1], 0);
    }
    s.planned_collision_time_s = meta_num("planned_collision_time_s", 0.0);
    s.evaluation_horizon_s =
        meta_num("evaluation_horizon_s", s.planned_collision_time_s + 300.0);
    if (auto it = meta.find("seed"); it != meta.end()) {
        try {
            std::size_t used = 0;
            s.seed = std::stoull(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            raise(Errc::parse_error, fmt::format("bad seed '{}'", it->second));
        }
    }
    if (auto it = meta.find("validated"); it != meta.end()) s.validated = it->second == "true";

    auto find_aircraft = [&](const Token& cs, int line) -> sim::AircraftState& {
        for (auto& a : s.initial_states) {
            if (a.callsign == cs.text) return a;
        }
        scn_fail(line, cs.col, fmt::format("'{}' references an aircraft with no CRE line", cs.text));
    };

    for (const CmdLine& c : cmds) {
        const std::string& verb = c.tokens[0].text;
        if (verb == "CRE") {
            if (c.tokens.size() != 8) {
                scn_fail(c.line, c.tokens[0].col,
                         "CRE needs: callsign type lat lon heading altitude speed");
            }
            sim::AircraftState a;
            a.callsign = c.tokens[1].text;
            for (const auto& existing : s.initial_states) {
                if (existing.callsign == a.callsign) {
                    scn_fail(c.line, c.tokens[1].col,
                             fmt::format("duplicate CRE for '{}'", a.callsign));
                }
            }
            double lat = parse_num(c.tokens[3], c.line);
            double lon = parse_num(c.tokens[4], c.line);
            a.y_nm = (lat - s.origin_lat) * 60.0;
            a.x_nm = (lon - s.origin_lon) * 60.0 * std::cos(deg_to_rad(lat));
            a.heading_deg = normalize_heading(parse_num(c.tokens[5], c.line));
            a.altitude_ft = parse_altitude(c.tokens[6], c.line);
            a.ground_speed_kt = parse_num(c.tokens[7], c.line);
            a.target_heading_deg = a.heading_deg;
            a.target_altitude_ft = a.altitude_ft;
            a.target_speed_kt = a.ground_speed_kt;
            s.initial_states.push_back(std::move(a));
        } else if (verb == "ALT" || verb == "HDG" || verb == "SPD") {
            if (c.tokens.size() != 3) {
                scn_fail(c.line, c.tokens[0].col,
                         fmt::format("{} needs: callsign value", verb));
            }
            sim::AircraftState& a = find_aircraft(c.tokens[1], c.line);
            double v = verb == "ALT" ? parse_altitude(c.tokens[2], c.line)
                                     : parse_num(c.tokens[2], c.line);
            if (verb == "ALT") {
                a.target_altitude_ft = v;
                double da = v - a.altitude_ft;
                a.vertical_speed_fpm = da > 0.0 ? 2000.0 : da < 0.0 ? -2000.0 : 0.0;
            } else if (verb == "HDG") {
                a.target_heading_deg = normalize_heading(v);
            } else {
                a.target_speed_kt = v;
            }
        } else {
            scn_fail(c.line, c.tokens[0].col,
                     fmt::format("unknown verb '{}', expected CRE, ALT, HDG or SPD", verb));
        }
    }

    if (auto it = meta.find("n_aircraft"); it != meta.end()) {
        Token tok{it->second, 1};
        int declared = static_cast<int>(parse_num(tok, 0));
        if (declared != static_cast<int>(s.initial_states.size())) {
            raise(Errc::parse_error,
                  fmt::format("metadata declares {} aircraft, file creates {}", declared,
                              s.initial_states.size()));
        }
    }
    s.n_aircraft = static_cast<int>(s.initial_states.size());
    return s;
}

} // namespace

std::string serialize(const Scenario& s) {
    json j;
    j["format"] = "scenario-v1";
    j["id"] = s.id;
    j["conflict_type"] = conflict_type_name(s.conflict_type);
    j["n_aircraft"] = s.n_aircraft;
    j["planned_collision_time_s"] = s.planned_collision_time_s;
    j["evaluation_horizon_s"] = s.evaluation_horizon_s;
    j["seed"] = s.seed;
    j["origin_lat"] = s.origin_lat;
    j["origin_lon"] = s.origin_lon;
    j["validated"] = s.validated;
    json acs = json::array();
    for (const auto& a : s.initial_states) acs.push_back(aircraft_to_json(a));
    j["aircraft"] = std::move(acs);
    return j.dump(2) + "\n";
}

std::string to_scn(const Scenario& s) {
    std::string out;
    out += fmt::format("# scenario: {}\n", s.id);
    out += fmt::format("# conflict_type: {}\n", conflict_type_name(s.conflict_type));
    out += fmt::format("# n_aircraft: {}\n", s.n_aircraft);
    out += fmt::format("# planned_collision_time_s: {}\n", s.planned_collision_time_s);
    out += fmt::format("# evaluation_horizon_s: {}\n", s.evaluation_horizon_s);
    out += fmt::format("# seed: {}\n", s.seed);
    out += fmt::format("# origin: {} {}\n", s.origin_lat, s.origin_lon);
    out += fmt::format("# validated: {}\n", s.validated);
    for (const auto& a : s.initial_states) {
        double lat = s.origin_lat + a.y_nm / 60.0;
        double lon = s.origin_lon + a.x_nm / (60.0 * std::cos(deg_to_rad(lat)));
        out += fmt::format("0:00:00.00>CRE {} B738 {:.10f} {:.10f} {} {} {}\n", a.callsign, lat,
                           lon, a.heading_deg, format_altitude(a.altitude_ft), a.ground_speed_kt);
        if (a.target_altitude_ft != a.altitude_ft) {
            out += fmt::format("0:00:00.00>ALT {} {}\n", a.callsign,
                               format_altitude(a.target_altitude_ft));
        }
        if (a.target_heading_deg != a.heading_deg) {
            out += fmt::format("0:00:00.00>HDG {} {}\n", a.callsign, a.target_heading_deg);
        }
        if (a.target_speed_kt != a.ground_speed_kt) {
            out += fmt::format("0:00:00.00>SPD {} {}\n", a.callsign, a.target_speed_kt);
        }
    }
    return out;
}

Scenario parse(const std::string& text) {
    std::size_t first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) raise(Errc::parse_error, "empty scenario text");
    if (text[first] == '{') return parse_json(text);
    return parse_scn(text);
}

} // namespace atc::scenario
