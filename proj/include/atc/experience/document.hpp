#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atc/scenario/scenario.hpp"

namespace atc::experience {

struct CommandEntry {
    std::string command; // relativized, anonymized text
    bool helpful = false;
    std::string insight;

    bool operator==(const CommandEntry&) const = default;
};

struct ExperienceDocument {
    std::string id;
    std::string conflict_description;
    int num_aircraft = 0;
    scenario::ConflictType conflict_formation = scenario::ConflictType::converging;
    std::vector<CommandEntry> commands;
    std::vector<float> embedding;
    std::string source_backend;
    std::string created_at;

    bool operator==(const ExperienceDocument&) const = default;

    // Everything except the embedding, which lives in the binary sidecar.
    nlohmann::json to_json() const;
    static ExperienceDocument from_json(const nlohmann::json& j);
};

} // namespace atc::experience
