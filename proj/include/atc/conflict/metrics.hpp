#pragma once

#include <optional>
#include <string>
#include <vector>

#include "atc/conflict/standard.hpp"
#include "atc/sim/world.hpp"

namespace atc::conflict {

struct CpaResult {
    double tcpa_s = 0.0;
    double dcpa_nm = 0.0;
};

// Closest point of approach under straight-line extrapolation of the current
// heading and ground speed (targets ignored). With relative position p and
// relative velocity v: tcpa = max(0, -(p.v)/|v|^2), 0 when |v| = 0, and
// dcpa = |p + v*tcpa|.
CpaResult cpa(const sim::AircraftState& a, const sim::AircraftState& b);

// Altitude at time t under the snapshot's vertical profile: the current
// vertical speed until the target altitude is captured, level afterwards.
// A vertical speed pointing away from the target is treated as level.
double extrapolated_altitude_ft(const sim::AircraftState& a, double t_s);

// Earliest time in [0, lookahead_s] at which horizontal AND vertical
// separation are below the standard simultaneously, under linear horizontal
// extrapolation and the piecewise-linear vertical profile above. Exact
// interval arithmetic; absent when the conjunction never holds in window.
std::optional<double> tlos(const sim::AircraftState& a, const sim::AircraftState& b,
                           const SeparationStandard& std);

struct AltitudeInfo {
    double current_ft = 0.0;
    double target_ft = 0.0;
    sim::AltitudeTendency tendency = sim::AltitudeTendency::level;
};

struct ConflictPair {
    std::string callsign_a;
    std::string callsign_b;
    double tcpa_s = 0.0;
    double dcpa_nm = 0.0;
    std::optional<double> tlos_s;
    double heading_difference_deg = 0.0; // [0, 180]
    double horizontal_sep_nm = 0.0;
    double vertical_sep_ft = 0.0;
    double total_sep_nm = 0.0; // sqrt(h^2 + (v / 6076.12)^2)
    AltitudeInfo altitude_a;
    AltitudeInfo altitude_b;
};

// All pairs with a predicted loss of separation inside the lookahead,
// ascending by tlos (callsign pair breaks ties).
std::vector<ConflictPair> detect_conflicts(const sim::World& world, const SeparationStandard& std);

// Table-driven outcome score over a full-horizon separation log:
//   -1  some instant violated both near-miss thresholds
//    0  some instant violated both separation minima
//    1  otherwise
// Throws EmptyLog on an empty log.
int classify_outcome(const std::vector<sim::SeparationSample>& min_sep_log,
                     const SeparationStandard& std);

} // namespace atc::conflict
