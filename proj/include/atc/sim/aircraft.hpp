#pragma once

#include <string>

#include "atc/geom.hpp"

namespace atc::sim {

// Command-tracking rates and state envelope shared by all aircraft in a world.
struct KinematicLimits {
    double turn_rate_deg_s = 3.0;
    double climb_rate_fpm = 2000.0;
    double accel_kt_s = 1.0;
    double min_speed_kt = 100.0;
    double max_speed_kt = 600.0;
    double min_altitude_ft = 0.0;
    double max_altitude_ft = 45000.0;
    double max_vertical_speed_fpm = 10000.0;
};

struct AircraftState {
    std::string callsign;
    double x_nm = 0.0;
    double y_nm = 0.0;
    double altitude_ft = 0.0;
    double heading_deg = 0.0; // [0, 360), clockwise from north
    double ground_speed_kt = 0.0;
    double vertical_speed_fpm = 0.0;
    double target_heading_deg = 0.0;
    double target_altitude_ft = 0.0;
    double target_speed_kt = 0.0;

    Vec2 position() const { return {x_nm, y_nm}; }
    Vec2 velocity_nm_s() const { return heading_unit(heading_deg) * kt_to_nm_s(ground_speed_kt); }

    bool operator==(const AircraftState&) const = default;
};

enum class AltitudeTendency { level, climbing, descending };

const char* tendency_name(AltitudeTendency t);

// Tendency reflects the commanded intent: where the target altitude sits
// relative to the current one, with a 1 ft dead band.
AltitudeTendency altitude_tendency(const AircraftState& a);

} // namespace atc::sim
