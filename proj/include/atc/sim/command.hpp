#pragma once

#include <string>

namespace atc::sim {

enum class CommandVerb { heading, altitude, speed };

const char* verb_name(CommandVerb v); // HDG / ALT / SPD

struct Command {
    CommandVerb verb = CommandVerb::heading;
    std::string callsign;
    double value = 0.0; // degrees, feet or knots depending on verb

    // Grammar: <VERB> <CALLSIGN> <NUMBER>, verbs HDG/ALT/SPD, case-insensitive.
    // Throws AtcError(parse_error) with line/column info on malformed input.
    static Command parse(const std::string& text);

    std::string format() const;

    bool operator==(const Command&) const = default;
};

} // namespace atc::sim
