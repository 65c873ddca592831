#include "atc/experience/document.hpp"

namespace atc::experience {

using nlohmann::json;

json ExperienceDocument::to_json() const {
    json cmds = json::array();
    for (const auto& c : commands) {
        cmds.push_back({{"command", c.command}, {"helpful", c.helpful}, {"insight", c.insight}});
    }
    return {{"id", id},
            {"conflict_description", conflict_description},
            {"num_aircraft", num_aircraft},
            {"conflict_formation", scenario::conflict_type_name(conflict_formation)},
            {"commands", std::move(cmds)},
            {"source_backend", source_backend},
            {"created_at", created_at}};
}

ExperienceDocument ExperienceDocument::from_json(const json& j) {
    ExperienceDocument d;
    d.id = j.at("id").get<std::string>();
    d.conflict_description = j.at("conflict_description").get<std::string>();
    d.num_aircraft = j.at("num_aircraft").get<int>();
    d.conflict_formation = scenario::conflict_type_from(j.at("conflict_formation").get<std::string>());
    for (const auto& c : j.at("commands")) {
        d.commands.push_back({c.at("command").get<std::string>(), c.at("helpful").get<bool>(),
                              c.at("insight").get<std::string>()});
    }
    d.source_backend = j.at("source_backend").get<std::string>();
    d.created_at = j.at("created_at").get<std::string>();
    return d;
}

} // namespace atc::experience
