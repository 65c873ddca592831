#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "atc/conflict/metrics.hpp"
#include "atc/conflict/standard.hpp"
#include "atc/sim/world.hpp"

namespace atc::tools {

struct ParamSpec {
    std::string name;
    std::string type; // "string" | "integer" | "number"
    bool required = true;
    std::string description;

    bool operator==(const ParamSpec&) const = default;
};

struct ToolDescriptor {
    std::string name;
    std::string description;
    std::vector<ParamSpec> parameters;

    // Chat-completions function-calling schema; from_schema inverts it.
    nlohmann::json schema() const;
    static ToolDescriptor from_schema(const nlohmann::json& j);

    bool operator==(const ToolDescriptor&) const = default;
};

struct ToolCall {
    std::string tool;
    nlohmann::json args = nlohmann::json::object();
};

struct ToolResult {
    std::string text;
    nlohmann::json payload = nlohmann::json::object();
    double clock_s = 0.0;
};

struct ExperienceQuery {
    std::string conflict_description;
    int num_aircraft = 0;
    std::string conflict_formation;
};

// Bridges SEARCHEXPERIENCELIBRARY to whatever library the run carries,
// keeping this layer free of a dependency on the library itself.
using ExperienceSearchFn = std::function<ToolResult(const ExperienceQuery&)>;

// The five reconnaissance/action tools exposed to the language model, bound
// to one world. Rendering is deterministic: feet, degrees, knots, fpm and
// seconds carry one decimal; nautical miles two.
class ToolKit {
public:
    ToolKit(sim::World world, conflict::SeparationStandard standard);

    const sim::World& world() const { return world_; }
    sim::World& mutable_world() { return world_; }
    const conflict::SeparationStandard& standard() const { return standard_; }

    void set_experience_search(ExperienceSearchFn fn) { experience_search_ = std::move(fn); }
    bool has_experience_search() const { return static_cast<bool>(experience_search_); }

    // All five descriptors, in protocol order.
    static const std::vector<ToolDescriptor>& descriptors();
    static const ToolDescriptor& descriptor(const std::string& name); // MalformedToolCall

    // Descriptors offered to the model: drops SEARCHEXPERIENCELIBRARY when
    // no library is attached.
    std::vector<ToolDescriptor> available_descriptors() const;

    // Validates args against the descriptor schema and dispatches. Throws
    // MalformedToolCall (unknown tool / bad args), DurationOutOfRange,
    // LibraryUnavailable. Simulator command errors never throw; they come
    // back as result text.
    ToolResult execute(const ToolCall& call);

    ToolResult get_all_aircraft_info();
    ToolResult get_conflict_info();
    ToolResult continue_monitoring(double duration_s);
    ToolResult send_command(const std::string& command_text);
    ToolResult search_experience(const ExperienceQuery& query);

    // Accepted commands with the clock at which each was issued.
    const std::vector<std::pair<double, std::string>>& command_log() const { return command_log_; }
    double last_command_time_s() const;

private:
    sim::World world_;
    conflict::SeparationStandard standard_;
    ExperienceSearchFn experience_search_;
    std::vector<std::pair<double, std::string>> command_log_;
};

// Rendering helpers shared by the tools (exposed for tests and transcripts).
std::string render_aircraft_line(const sim::AircraftState& a);
std::string render_conflicts(const std::vector<conflict::ConflictPair>& pairs);
std::string pair_key(const std::string& callsign_a, const std::string& callsign_b);

} // namespace atc::tools
