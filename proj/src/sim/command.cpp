#include "atc/sim/command.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <fmt/core.h>

#include "atc/errors.hpp"

namespace atc::sim {

const char* verb_name(CommandVerb v) {
    switch (v) {
        case CommandVerb::heading: return "HDG";
        case CommandVerb::altitude: return "ALT";
        case CommandVerb::speed: return "SPD";
    }
    return "?";
}

namespace {

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
}

bool is_alnum_word(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c); });
}

} // namespace

Command Command::parse(const std::string& text) {
    std::istringstream in(text);
    std::string verb_tok, callsign_tok, value_tok, extra;
    in >> verb_tok >> callsign_tok >> value_tok;

    Command cmd;
    std::string verb = upper(verb_tok);
    if (verb == "HDG") {
        cmd.verb = CommandVerb::heading;
    } else if (verb == "ALT") {
        cmd.verb = CommandVerb::altitude;
    } else if (verb == "SPD") {
        cmd.verb = CommandVerb::speed;
    } else if (verb.empty()) {
        raise(Errc::parse_error, "expected '<VERB> <CALLSIGN> <NUMBER>', got nothing (line 1, column 1)");
    } else {
        raise(Errc::parse_error,
              fmt::format("unknown verb '{}'; allowed verbs: HDG, ALT, SPD (line 1, column 1)", verb_tok));
    }
    if (callsign_tok.empty() || value_tok.empty()) {
        raise(Errc::parse_error, fmt::format("expected '<VERB> <CALLSIGN> <NUMBER>', got '{}' (line 1, column 1)", text));
    }
    if (in >> extra) {
        raise(Errc::parse_error,
              fmt::format("trailing token '{}' after command (line 1, column {})",
                          extra, text.find(extra) + 1));
    }

    cmd.callsign = upper(callsign_tok);
    if (!is_alnum_word(cmd.callsign)) {
        raise(Errc::parse_error,
              fmt::format("callsign '{}' must be alphanumeric (line 1, column {})",
                          callsign_tok, text.find(callsign_tok) + 1));
    }

    std::size_t consumed = 0;
    double value = 0.0;
    try {
        value = std::stod(value_tok, &consumed);
    } catch (const std::exception&) {
        consumed = 0;
    }
    if (consumed != value_tok.size() || !std::isfinite(value)) {
        raise(Errc::parse_error,
              fmt::format("value '{}' is not a number (line 1, column {})",
                          value_tok, text.rfind(value_tok) + 1));
    }
    cmd.value = value;
    return cmd;
}

std::string Command::format() const {
    return fmt::format("{} {} {}", verb_name(verb), callsign, value);
}

} // namespace atc::sim
