#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atc/conflict/standard.hpp"
#include "atc/sim/world.hpp"

namespace atc::scenario {

enum class ConflictType { head_on, parallel, t_formation, converging };

inline constexpr ConflictType kConflictTypes[] = {
    ConflictType::head_on,
    ConflictType::parallel,
    ConflictType::t_formation,
    ConflictType::converging,
};

const char* conflict_type_name(ConflictType t); // HeadOn / Parallel / TFormation / Converging
const char* conflict_type_slug(ConflictType t); // headon / parallel / tformation / converging
ConflictType conflict_type_from(const std::string& text); // accepts either spelling

// Initial-conditions bundle for one conflict geometry. Positions live on a
// local flat plane; the origin lat/lon only anchors the command-script
// mirror's coordinates.
struct Scenario {
    std::string id;
    ConflictType conflict_type = ConflictType::converging;
    int n_aircraft = 0;
    std::vector<sim::AircraftState> initial_states;
    double planned_collision_time_s = 0.0;
    double evaluation_horizon_s = 0.0;
    std::uint64_t seed = 0;
    double origin_lat = 52.0;
    double origin_lon = 4.0;
    bool validated = false;

    bool operator==(const Scenario&) const = default;
};

// Back-propagated geometry: pick a conjunction point and time T in
// [120, 300] s, assign headings per conflict type, then place every aircraft
// T seconds upstream with a small lateral offset. Vertical profiles are
// staggered tiers that all capture a shared altitude band before T, so the
// unmanaged simulation always ends in a near miss. Redraws internally up to
// 100 times; deterministic for a fixed (type, count, seed).
// Throws GenerationExhausted when no draw validates.
Scenario generate(ConflictType type, int n_aircraft, std::uint64_t seed);

// Fresh world holding the initial states verbatim. Throws DatasetInvalid on
// a malformed scenario.
sim::World world_from(const Scenario& s);

// True iff simulating the scenario with zero commands through its evaluation
// horizon scores -1.
bool validate_inevitable_collision(const Scenario& s, const conflict::SeparationStandard& std);

// Canonical JSON document; parse(serialize(s)) == s exactly.
std::string serialize(const Scenario& s);

// Command-script mirror: `# key: value` metadata plus timestamped CRE lines
// (with ALT/HDG/SPD target lines where targets differ). Human-oriented;
// coordinates round-trip only to printed precision.
std::string to_scn(const Scenario& s);

// Accepts both the JSON document and the command-script form.
// Throws ParseError with line/column context.
Scenario parse(const std::string& text);

// The evaluation dataset: 4 conflict types x 3 aircraft counts x 10 = 120
// scenarios, seeds derived from master_seed.
std::vector<Scenario> build_dataset(std::uint64_t master_seed);

} // namespace atc::scenario
